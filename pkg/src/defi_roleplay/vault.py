"""Interest-bearing share vault whose price can be pushed up by donations."""

from __future__ import annotations

from .errors import InsufficientBalanceError
from .world import exceeds


class InterestBearingVault:
    """Share token backed by an underlying balance: price = underlying / shares.

    Yield accrual is not modelled; the only ways the price moves are ``burn``
    (shares destroyed with nothing paid out) and ``donate`` (underlying added
    with no shares minted).
    """

    def __init__(self, share_asset: str, underlying_asset: str, holder: str = "vault"):
        self.share_asset = share_asset
        self.underlying_asset = underlying_asset
        self.share_supply = 0.0
        self.holder = holder
        self.world = None

    @property
    def underlying_balance(self) -> float:
        return self.world.balance(self.holder, self.underlying_asset)

    @property
    def share_price(self) -> float:
        if self.share_supply <= 0.0:
            raise ZeroDivisionError("share price undefined with zero supply")
        return self.underlying_balance / self.share_supply

    def state(self) -> dict:
        return {"share_supply": self.share_supply, "underlying": self.underlying_balance}

    def seed(self, holder: str, shares: float, underlying: float) -> None:
        """Scenario setup: issue ``shares`` to ``holder`` backed by ``underlying``."""
        w = self.world
        with w.operation("vault_seed", holder=holder, shares=shares, underlying=underlying):
            w.credit(self.holder, self.underlying_asset, underlying)
            w.credit(holder, self.share_asset, shares)
            self.share_supply += shares

    def mint(self, agent: str, underlying_amt: float) -> float:
        w = self.world
        price = self.share_price if self.share_supply > 0 else 1.0
        shares = underlying_amt / price
        with w.operation("mint", agent=agent, underlying=underlying_amt):
            w.transfer(agent, self.holder, self.underlying_asset, underlying_amt)
            w.credit(agent, self.share_asset, shares)
            self.share_supply += shares
        return shares

    def _take_shares(self, agent: str, shares: float) -> float:
        held = self.world.balance(agent, self.share_asset)
        if exceeds(shares, held):
            raise InsufficientBalanceError(f"{agent} holds {held!r} shares, needs {shares!r}")
        shares = min(shares, held)
        self.world.debit(agent, self.share_asset, shares)
        self.share_supply = max(self.share_supply - shares, 0.0)
        return shares

    def redeem(self, agent: str, shares: float) -> float:
        w = self.world
        with w.operation("redeem", agent=agent, shares=shares):
            # price is taken before the burn so the payout keeps it unchanged
            payout = min(shares * self.share_price, self.underlying_balance)
            self._take_shares(agent, shares)
            w.transfer(self.holder, agent, self.underlying_asset, payout)
        return payout

    def burn(self, agent: str, shares: float) -> None:
        with self.world.operation("burn", agent=agent, shares=shares):
            self._take_shares(agent, shares)

    def donate(self, agent: str, underlying_amt: float) -> float:
        with self.world.operation("donate", agent=agent, underlying=underlying_amt):
            self.world.transfer(agent, self.holder, self.underlying_asset, underlying_amt)
        return self.share_price
