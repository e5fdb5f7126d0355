"""Price oracle policy and flashloan provider."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .errors import (
    InsufficientBalanceError,
    LiquidityExhaustedError,
    UnknownIdError,
    UnpricedAssetError,
    UnrepaidFlashloanError,
)
from .world import exceeds


@dataclass(frozen=True)
class PriceSource:
    kind: Literal["fixed", "amm_spot", "vault_price"]
    value: float = 1.0

    @classmethod
    def fixed(cls, value: float) -> "PriceSource":
        return cls("fixed", value)


class Oracle:
    """Prices in stable units, read straight from current component state.

    There is no caching and no time-weighting: a swap moves the AMM-sourced
    price immediately.
    """

    def __init__(self, sources: dict[str, PriceSource] | None = None):
        self.sources: dict[str, PriceSource] = dict(sources or {})
        self.world = None

    def set_source(self, asset: str, source: PriceSource) -> None:
        self.sources[asset] = source

    def has_price(self, asset: str) -> bool:
        return asset in self.sources

    def price(self, asset: str) -> float:
        src = self.sources.get(asset)
        if src is None:
            raise UnpricedAssetError(f"no price source for {asset!r}")
        if src.kind == "fixed":
            return src.value
        if src.kind == "amm_spot":
            pool = self.world.pool
            if pool is None or pool.asset_m != asset:
                raise UnpricedAssetError(f"{asset!r} is not the manipulated side of a pool")
            return pool.spot_price_m() * self.price(pool.asset_s)
        vault = self.world.vault
        if vault is None or vault.share_asset != asset:
            raise UnpricedAssetError(f"{asset!r} is not a vault share")
        return vault.share_price * self.price(vault.underlying_asset)

    def prices(self) -> dict[str, float]:
        return {a: self.price(a) for a in sorted(self.sources)}


@dataclass
class FlashLoan:
    handle: int
    agent: str
    asset: str
    principal: float


class FlashloanProvider:
    """Uncollateralised same-event loans.

    Repayment is ``principal / (1 - fee)``, i.e. the fee is charged on the
    grossed-up amount rather than as ``principal * (1 + fee)``.
    """

    def __init__(self, fee: float = 0.0, holder: str = "flash"):
        if not 0.0 <= fee < 1.0:
            raise ValueError("flashloan fee must be in [0, 1)")
        self.fee = fee
        self.holder = holder
        self.open: dict[int, FlashLoan] = {}
        self._next = 1
        self.world = None

    def state(self) -> dict:
        return {"fee": self.fee, "open": sorted(self.open)}

    def liquidity(self, asset: str) -> float:
        return self.world.balance(self.holder, asset)

    def repayment(self, principal: float) -> float:
        return principal / (1.0 - self.fee)

    def flash_borrow(self, agent: str, asset: str, amount: float) -> int:
        avail = self.liquidity(asset)
        if exceeds(amount, avail):
            raise LiquidityExhaustedError(f"flash provider holds {avail!r} {asset}, asked {amount!r}")
        w = self.world
        with w.operation("flash_borrow", agent=agent, asset=asset, amount=amount):
            moved = w.transfer(self.holder, agent, asset, amount)
        loan = FlashLoan(self._next, agent, asset, moved)
        self.open[loan.handle] = loan
        self._next += 1
        return loan.handle

    def outstanding(self) -> dict[str, float]:
        """Repayment due per asset for every open handle."""
        due: dict[str, float] = {}
        for loan in self.open.values():
            due[loan.asset] = due.get(loan.asset, 0.0) + self.repayment(loan.principal)
        return due

    def flash_repay(self, handle: int) -> float:
        """Settle ``handle``; returns the fee paid."""
        loan = self.open.get(handle)
        if loan is None:
            raise UnknownIdError(f"no open flashloan {handle}")
        due = self.repayment(loan.principal)
        held = self.world.balance(loan.agent, loan.asset)
        if exceeds(due, held):
            raise InsufficientBalanceError(
                f"{loan.agent} holds {held!r} {loan.asset}, flashloan {handle} needs {due!r}"
            )
        w = self.world
        with w.operation("flash_repay", agent=loan.agent, asset=loan.asset, amount=due):
            w.transfer(loan.agent, self.holder, loan.asset, due)
        del self.open[handle]
        return due - loan.principal

    def assert_settled(self) -> None:
        if self.open:
            raise UnrepaidFlashloanError(f"open flashloans at event end: {sorted(self.open)}")
