"""Asset registry, holder balance ledger and conservation accounting.

Every token that exists in a simulation lives in ``World.balances``, keyed by
holder.  Holders are either agents (externally owned addresses) or protocol
components (pool, lending market, vault, flashloan provider), which keep their
token inventory in the same ledger so that one sum per asset covers everything.
"""

from __future__ import annotations

import copy
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator

from .errors import DuplicateIdError, InsufficientBalanceError, UnknownIdError

# Relative slack for feasibility checks; results are clamped, never left negative.
TOL = 1e-9


def exceeds(amount: float, limit: float, tol: float = TOL) -> bool:
    """True when ``amount`` is larger than ``limit`` by more than the tolerance."""
    return amount - limit > tol * max(1.0, abs(limit), abs(amount))


class AssetClass(str, Enum):
    STABLE = "stable"
    MANIPULATED = "manipulated"
    INTEREST_BEARING = "interest-bearing"
    UNDERLYING = "underlying"


@dataclass(frozen=True)
class OpRecord:
    step: int
    name: str
    args: dict[str, Any] = field(default_factory=dict)


class World:
    """Single source of truth for balances and attached protocol components."""

    def __init__(self) -> None:
        self.assets: dict[str, AssetClass] = {}
        self.agents: list[str] = []
        self.components: dict[str, Any] = {}
        self.balances: dict[str, dict[str, float]] = {}
        self.supply: dict[str, float] = {}
        self.step = 0
        self.journal: list[OpRecord] = []
        self.oracle: Any = None
        # holders with a nonzero balance per asset, and holders touched since
        # the last reset; both let observers revalue only what changed
        self.holders: dict[str, set[str]] = {}
        self.touched: set[str] = set()
        self._depth = 0

    # -- registry ---------------------------------------------------------

    def register_asset(self, asset: str, classification: AssetClass | str) -> None:
        if asset in self.assets:
            raise DuplicateIdError(f"asset {asset!r} already registered")
        self.assets[asset] = AssetClass(classification)
        self.supply[asset] = 0.0

    def classification(self, asset: str) -> AssetClass:
        self._check_asset(asset)
        return self.assets[asset]

    def register_agent(self, agent: str) -> None:
        if agent in self.balances:
            raise DuplicateIdError(f"holder {agent!r} already registered")
        self.agents.append(agent)
        self.balances[agent] = {}

    def has_holder(self, holder: str) -> bool:
        return holder in self.balances

    def attach(self, name: str, component: Any) -> Any:
        """Register a protocol component as a token holder and bind it to this world."""
        if component.holder in self.balances:
            raise DuplicateIdError(f"holder {component.holder!r} already registered")
        self.balances[component.holder] = {}
        self.components[name] = component
        component.world = self
        return component

    @property
    def pool(self):
        return self.components.get("pool")

    @property
    def market(self):
        return self.components.get("market")

    @property
    def vault(self):
        return self.components.get("vault")

    @property
    def flash(self):
        return self.components.get("flash")

    def _check_asset(self, asset: str) -> None:
        if asset not in self.assets:
            raise UnknownIdError(f"unregistered asset {asset!r}")

    def _check_holder(self, holder: str) -> None:
        if holder not in self.balances:
            raise UnknownIdError(f"unregistered holder {holder!r}")

    # -- journal ----------------------------------------------------------

    @contextmanager
    def operation(self, name: str, **args: Any) -> Iterator[None]:
        """Group mutations into one journaled step.

        Nested operations are folded into the outermost one, so a swap that
        moves two tokens is still a single step.
        """
        self._depth += 1
        try:
            yield
        except BaseException:
            self._depth -= 1
            raise
        self._depth -= 1
        if self._depth == 0:
            self.step += 1
            self.journal.append(OpRecord(self.step, name, dict(args)))

    # -- balances ---------------------------------------------------------

    def balance(self, holder: str, asset: str) -> float:
        return self.balances[holder].get(asset, 0.0)

    def holdings(self, holder: str) -> dict[str, float]:
        return {a: v for a, v in self.balances[holder].items() if v != 0.0}

    def _set(self, holder: str, asset: str, value: float) -> None:
        self.balances[holder][asset] = value
        held = self.holders.setdefault(asset, set())
        if value != 0.0:
            held.add(holder)
        else:
            held.discard(holder)
        self.touched.add(holder)

    def credit(self, holder: str, asset: str, amount: float) -> float:
        """Issue ``amount`` new tokens to ``holder`` (scenario seeding, share minting)."""
        self._check_asset(asset)
        self._check_holder(holder)
        if amount < 0:
            raise ValueError("credit amount must be non-negative")
        with self.operation("credit", holder=holder, asset=asset, amount=amount):
            bal = self.balance(holder, asset) + amount
            self._set(holder, asset, bal)
            self.supply[asset] += amount
        return bal

    def debit(self, holder: str, asset: str, amount: float) -> float:
        """Destroy ``amount`` tokens held by ``holder``; returns the new balance."""
        self._check_asset(asset)
        self._check_holder(holder)
        if amount < 0:
            raise ValueError("debit amount must be non-negative")
        bal = self.balance(holder, asset)
        if exceeds(amount, bal):
            raise InsufficientBalanceError(
                f"{holder} holds {bal!r} {asset}, cannot debit {amount!r}"
            )
        with self.operation("debit", holder=holder, asset=asset, amount=amount):
            new = max(bal - amount, 0.0)
            self._set(holder, asset, new)
            self.supply[asset] -= bal - new
        return new

    def transfer(self, src: str, dst: str, asset: str, amount: float) -> float:
        """Move tokens between holders; returns the amount actually moved.

        A request that overshoots the source balance by less than ``TOL`` moves
        the whole balance, which keeps totals exact instead of creating dust.
        """
        self._check_asset(asset)
        self._check_holder(src)
        self._check_holder(dst)
        if amount < 0:
            raise ValueError("transfer amount must be non-negative")
        bal = self.balance(src, asset)
        if exceeds(amount, bal):
            raise InsufficientBalanceError(
                f"{src} holds {bal!r} {asset}, cannot send {amount!r}"
            )
        moved = min(amount, bal)
        with self.operation("transfer", src=src, dst=dst, asset=asset, amount=moved):
            self._set(src, asset, bal - moved)
            self._set(dst, asset, self.balance(dst, asset) + moved)
        return moved

    # -- accounting -------------------------------------------------------

    def totals(self) -> dict[str, float]:
        out = {a: 0.0 for a in self.assets}
        for held in self.balances.values():
            for asset, amt in held.items():
                out[asset] += amt
        return out

    def conservation_residual(self, reference: dict[str, float]) -> float:
        """Largest relative drift of any asset total against ``reference``.

        Vault shares are compared with the vault's recorded share supply, since
        minting and redeeming legitimately change how many exist.
        """
        totals = self.totals()
        worst = 0.0
        share = self.vault.share_asset if self.vault is not None else None
        for asset in self.assets:
            expected = self.vault.share_supply if asset == share else reference.get(asset, 0.0)
            scale = max(1.0, abs(expected))
            worst = max(worst, abs(totals[asset] - expected) / scale)
            # ledger integrity: issued supply must match what holders hold
            worst = max(worst, abs(totals[asset] - self.supply[asset]) / max(1.0, abs(self.supply[asset])))
        return worst

    # -- snapshots --------------------------------------------------------

    def snapshot(self) -> "World":
        """Deep copy of the whole world; treat it as read-only."""
        return copy.deepcopy(self)

    def restore(self, snap: "World") -> None:
        fresh = copy.deepcopy(snap)
        self.__dict__.clear()
        self.__dict__.update(fresh.__dict__)
        for comp in self.components.values():
            comp.world = self
        if self.oracle is not None:
            self.oracle.world = self

    def state_key(self) -> tuple:
        """Hashable summary used to compare worlds for equality in tests."""
        comps = tuple(sorted((k, repr(v.state())) for k, v in self.components.items()))
        bals = tuple(sorted((h, tuple(sorted(b.items()))) for h, b in self.balances.items()))
        return (self.step, bals, comps)
