"""Pooled collateralised lending market (Compound-style, no interest).

Deposits are both collateral and lendable supply: whatever an account deposits
sits in the market's cash and can be borrowed by anyone else.  Borrow capacity
is the per-asset sum of ``collateral * oracle price * CR``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    CapacityExceededError,
    InsufficientBalanceError,
    LiquidityExhaustedError,
    OverpayError,
    SeizureExceedsCollateralError,
    TargetHealthyError,
    UnhealthyWithdrawError,
)
from .world import TOL, exceeds


@dataclass
class Position:
    collateral: dict[str, float] = field(default_factory=dict)
    debt: dict[str, float] = field(default_factory=dict)


class LendingMarket:
    def __init__(
        self,
        collateral_rates: dict[str, float],
        liq_incentive: float = 0.0,
        holder: str = "market",
    ):
        for asset, cr in collateral_rates.items():
            if not 0.0 <= cr <= 1.0:
                raise ValueError(f"collateral rate for {asset} must be in [0, 1]")
        if not 0.0 <= liq_incentive < 1.0:
            raise ValueError("liquidation incentive must be in [0, 1)")
        self.collateral_rates = dict(collateral_rates)
        self.liq_incentive = liq_incentive
        self.positions: dict[str, Position] = {}
        self.holder = holder
        self.world = None

    def state(self) -> dict:
        return {
            "positions": {
                a: (sorted(p.collateral.items()), sorted(p.debt.items()))
                for a, p in sorted(self.positions.items())
            },
            "cash": sorted(self.world.holdings(self.holder).items()),
        }

    # -- queries ----------------------------------------------------------

    def cr(self, asset: str) -> float:
        return self.collateral_rates.get(asset, 0.0)

    def cash(self, asset: str) -> float:
        """Borrowable amount: supplied minus borrowed."""
        return self.world.balance(self.holder, asset)

    def position(self, agent: str) -> Position:
        return self.positions.setdefault(agent, Position())

    def collateral(self, agent: str, asset: str) -> float:
        pos = self.positions.get(agent)
        return pos.collateral.get(asset, 0.0) if pos else 0.0

    def debt(self, agent: str, asset: str) -> float:
        pos = self.positions.get(agent)
        return pos.debt.get(asset, 0.0) if pos else 0.0

    def supplied(self, asset: str) -> float:
        return sum(p.collateral.get(asset, 0.0) for p in self.positions.values())

    def borrowed(self, asset: str) -> float:
        return sum(p.debt.get(asset, 0.0) for p in self.positions.values())

    def _price(self, asset: str) -> float:
        return self.world.oracle.price(asset)

    def collateral_value(self, agent: str) -> float:
        pos = self.positions.get(agent)
        if pos is None:
            return 0.0
        return sum(amt * self._price(a) for a, amt in pos.collateral.items() if amt)

    def borrow_capacity(self, agent: str) -> float:
        pos = self.positions.get(agent)
        if pos is None:
            return 0.0
        return sum(amt * self._price(a) * self.cr(a) for a, amt in pos.collateral.items() if amt)

    def debt_value(self, agent: str) -> float:
        pos = self.positions.get(agent)
        if pos is None:
            return 0.0
        return sum(amt * self._price(a) for a, amt in pos.debt.items() if amt)

    def is_healthy(self, agent: str) -> bool:
        return not exceeds(self.debt_value(agent), self.borrow_capacity(agent))

    def max_borrow(self, agent: str, asset: str) -> float:
        headroom = (self.borrow_capacity(agent) - self.debt_value(agent)) / self._price(asset)
        return max(0.0, min(headroom, self.cash(asset)))

    def max_withdraw(self, agent: str, asset: str) -> float:
        held = self.collateral(agent, asset)
        limit = min(held, self.cash(asset))
        weight = self.cr(asset) * self._price(asset)
        if self.debt_value(agent) > 0.0 and weight > 0.0:
            spare = (self.borrow_capacity(agent) - self.debt_value(agent)) / weight
            limit = min(limit, max(spare, 0.0))
        return max(limit, 0.0)

    def bad_debt(self) -> float:
        total = 0.0
        for agent in sorted(self.positions):
            if not self.is_healthy(agent):
                total += max(0.0, self.debt_value(agent) - self.collateral_value(agent))
        return total

    # -- mutations --------------------------------------------------------

    def deposit(self, agent: str, asset: str, amt: float) -> None:
        w = self.world
        with w.operation("deposit", agent=agent, asset=asset, amount=amt):
            moved = w.transfer(agent, self.holder, asset, amt)
            pos = self.position(agent)
            pos.collateral[asset] = pos.collateral.get(asset, 0.0) + moved

    def borrow(self, agent: str, asset: str, amt: float) -> None:
        if amt < 0:
            raise ValueError("borrow amount must be non-negative")
        cash = self.cash(asset)
        if exceeds(amt, cash):
            raise LiquidityExhaustedError(f"market holds {cash!r} {asset}, asked {amt!r}")
        new_debt = self.debt_value(agent) + amt * self._price(asset)
        cap = self.borrow_capacity(agent)
        if exceeds(new_debt, cap):
            raise CapacityExceededError(f"{agent}: debt {new_debt!r} would exceed capacity {cap!r}")
        w = self.world
        with w.operation("borrow", agent=agent, asset=asset, amount=amt):
            moved = w.transfer(self.holder, agent, asset, amt)
            pos = self.position(agent)
            pos.debt[asset] = pos.debt.get(asset, 0.0) + moved

    def repay(self, agent: str, asset: str, amt: float) -> None:
        owed = self.debt(agent, asset)
        if exceeds(amt, owed):
            raise OverpayError(f"{agent} owes {owed!r} {asset}, tried to repay {amt!r}")
        w = self.world
        with w.operation("repay", agent=agent, asset=asset, amount=amt):
            moved = w.transfer(agent, self.holder, asset, min(amt, owed))
            pos = self.position(agent)
            pos.debt[asset] = max(owed - moved, 0.0)

    def withdraw(self, agent: str, asset: str, amt: float) -> None:
        held = self.collateral(agent, asset)
        if exceeds(amt, held):
            raise InsufficientBalanceError(f"{agent} has {held!r} {asset} collateral, asked {amt!r}")
        amt = min(amt, held)
        cash = self.cash(asset)
        if exceeds(amt, cash):
            raise LiquidityExhaustedError(f"market holds {cash!r} {asset}, asked {amt!r}")
        after_cap = self.borrow_capacity(agent) - amt * self._price(asset) * self.cr(asset)
        if exceeds(self.debt_value(agent), after_cap):
            raise UnhealthyWithdrawError(f"{agent}: withdrawing {amt!r} {asset} breaks health")
        w = self.world
        with w.operation("withdraw", agent=agent, asset=asset, amount=amt):
            moved = w.transfer(self.holder, agent, asset, amt)
            pos = self.position(agent)
            pos.collateral[asset] = max(held - moved, 0.0)

    def liquidate(
        self,
        liquidator: str,
        target: str,
        repay_asset: str,
        amt: float,
        seize_asset: str | None = None,
    ) -> float:
        """Repay ``amt`` of the target's debt and seize collateral worth ``value / (1 - incentive)``.

        Returns the seized amount in units of ``seize_asset`` (defaults to the
        target's most valuable collateral).
        """
        if self.is_healthy(target):
            raise TargetHealthyError(f"{target} is healthy")
        owed = self.debt(target, repay_asset)
        if exceeds(amt, owed):
            raise OverpayError(f"{target} owes {owed!r} {repay_asset}, tried to repay {amt!r}")
        amt = min(amt, owed)
        held = self.world.balance(liquidator, repay_asset)
        if exceeds(amt, held):
            raise InsufficientBalanceError(f"{liquidator} holds {held!r} {repay_asset}")
        pos = self.position(target)
        if seize_asset is None:
            seize_asset = max(
                sorted(pos.collateral), key=lambda a: pos.collateral[a] * self._price(a), default=None
            )
            if seize_asset is None:
                raise SeizureExceedsCollateralError(f"{target} has no collateral")
        value = amt * self._price(repay_asset)
        seized = value / (1.0 - self.liq_incentive) / self._price(seize_asset)
        coll = pos.collateral.get(seize_asset, 0.0)
        if exceeds(seized, coll):
            raise SeizureExceedsCollateralError(
                f"seizing {seized!r} {seize_asset} exceeds {target}'s {coll!r}"
            )
        seized = min(seized, coll)
        if exceeds(seized, self.cash(seize_asset)):
            raise LiquidityExhaustedError(f"market cannot pay out {seized!r} {seize_asset}")
        w = self.world
        with w.operation(
            "liquidate", liquidator=liquidator, target=target, asset=repay_asset, amount=amt
        ):
            moved = w.transfer(liquidator, self.holder, repay_asset, amt)
            pos.debt[repay_asset] = max(owed - moved, 0.0)
            pos.collateral[seize_asset] = max(coll - seized, 0.0)
            w.transfer(self.holder, liquidator, seize_asset, seized)
        return seized


__all__ = ["LendingMarket", "Position", "TOL"]
