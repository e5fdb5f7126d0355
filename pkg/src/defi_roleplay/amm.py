"""Uniswap-V2 style x*y=k pool between a stable and a manipulated asset."""

from __future__ import annotations

from .errors import UnknownIdError


class ConstantProductPool:
    """Two-asset constant-product pool whose reserves live in the world ledger.

    ``fee`` is taken from the input amount before applying the invariant.  The
    closed-form checks all assume the default of zero.
    """

    def __init__(self, asset_s: str, asset_m: str, fee: float = 0.0, holder: str = "pool"):
        if not 0.0 <= fee < 1.0:
            raise ValueError("pool fee must be in [0, 1)")
        self.asset_s = asset_s
        self.asset_m = asset_m
        self.fee = fee
        self.holder = holder
        self.world = None

    @property
    def reserve_s(self) -> float:
        return self.world.balance(self.holder, self.asset_s)

    @property
    def reserve_m(self) -> float:
        return self.world.balance(self.holder, self.asset_m)

    def reserves(self) -> tuple[float, float]:
        return self.reserve_s, self.reserve_m

    def state(self) -> dict:
        return {"reserve_s": self.reserve_s, "reserve_m": self.reserve_m, "fee": self.fee}

    def _sides(self, pay_asset: str) -> tuple[str, float, float]:
        if pay_asset == self.asset_s:
            return self.asset_m, self.reserve_s, self.reserve_m
        if pay_asset == self.asset_m:
            return self.asset_s, self.reserve_m, self.reserve_s
        raise UnknownIdError(f"{pay_asset!r} is not a side of this pool")

    def quote(self, pay_asset: str, pay_amt: float) -> float:
        """Amount of the opposite asset received for paying ``pay_amt``."""
        if pay_amt < 0:
            raise ValueError("swap amount must be non-negative")
        _, r_in, r_out = self._sides(pay_asset)
        eff = pay_amt * (1.0 - self.fee)
        if eff <= r_in:
            return r_out * eff / (r_in + eff)
        # large swaps: derive the new reserve from the invariant first so the
        # product and the post-swap price stay accurate when the swap dwarfs the pool
        return r_out - r_in * r_out / (r_in + eff)

    def quote_swap_in(self, out_s: float) -> float:
        """Manipulated tokens bought by spending ``out_s`` stable tokens."""
        return self.quote(self.asset_s, out_s)

    def execute_swap(self, trader: str, pay_asset: str, pay_amt: float) -> float:
        receive_asset, _, _ = self._sides(pay_asset)
        received = self.quote(pay_asset, pay_amt)
        w = self.world
        with w.operation("swap", trader=trader, pay_asset=pay_asset, pay_amt=pay_amt):
            w.transfer(trader, self.holder, pay_asset, pay_amt)
            w.transfer(self.holder, trader, receive_asset, received)
        return received

    def spot_price_m(self) -> float:
        """Price of the manipulated asset in stable units."""
        return self.reserve_s / self.reserve_m
