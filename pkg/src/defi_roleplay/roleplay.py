"""Roles, actions, events and per-role gain accounting.

An :class:`Action` is a named group of world operations performed by one agent
under one role.  Its value delta for every agent is the agent's wallet valued
at oracle prices after the action minus the same wallet valued at the prices
before it, so summing deltas over an event telescopes exactly to
``final value (final prices) - initial value (initial prices)``.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator

from .world import OpRecord, World


class Role(IntEnum):
    # numbering follows the role legend used by the incident table
    LENDER = 1
    BORROWER = 2
    TRADER = 3
    LIQUIDITY_PROVIDER = 4
    YIELD_FARMER = 5
    YIELD_SOURCE = 6
    LIQUIDATOR = 7

    @property
    def label(self) -> str:
        return self.name.replace("_", " ").title()


@dataclass
class Action:
    agent: str
    role: Role
    name: str
    ops: list[OpRecord] = field(default_factory=list)
    deltas: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "role": self.role.label,
            "name": self.name,
            "ops": [{"step": o.step, "op": o.name, **o.args} for o in self.ops],
            "deltas": dict(sorted(self.deltas.items())),
        }


@dataclass
class Event:
    actions: list[Action] = field(default_factory=list)


@dataclass
class GainsLedger:
    gains: dict[str, float] = field(default_factory=dict)
    by_role: dict[tuple[str, Role], float] = field(default_factory=dict)
    attackers: set[str] = field(default_factory=set)

    def g(self, agent: str) -> float:
        return self.gains.get(agent, 0.0)

    def to_dict(self) -> dict:
        return {
            "gains": dict(sorted(self.gains.items())),
            "by_role": {
                f"{a}/{r.label}": v for (a, r), v in sorted(self.by_role.items(), key=lambda kv: (kv[0][0], kv[0][1]))
            },
            "attackers": sorted(self.attackers),
        }


def record_action(event: Event, ledger: GainsLedger, action: Action) -> None:
    event.actions.append(action)
    for agent, delta in action.deltas.items():
        ledger.gains[agent] = ledger.gains.get(agent, 0.0) + delta
        key = (agent, action.role)
        ledger.by_role[key] = ledger.by_role.get(key, 0.0) + delta


def attacker_gain(ledger: GainsLedger, controlled: Iterable[str]) -> float:
    return sum(ledger.g(a) for a in controlled)


@dataclass
class RoleplayReport:
    roles_by_agent: dict[str, list[str]]
    roles: list[str]
    distinct_roles: int
    multi_role: bool
    attacker_gain: float

    def to_dict(self) -> dict:
        return {
            "roles_by_agent": self.roles_by_agent,
            "roles": self.roles,
            "distinct_roles": self.distinct_roles,
            "multi_role": self.multi_role,
            "attacker_gain": self.attacker_gain,
        }


def classify_roleplay(event: Event, ledger: GainsLedger, controlled: Iterable[str]) -> RoleplayReport:
    controlled = set(controlled)
    per_agent: dict[str, set[Role]] = {}
    for act in event.actions:
        if act.agent in controlled:
            per_agent.setdefault(act.agent, set()).add(act.role)
    union = set().union(*per_agent.values()) if per_agent else set()
    return RoleplayReport(
        roles_by_agent={a: [r.label for r in sorted(rs)] for a, rs in sorted(per_agent.items())},
        roles=[r.label for r in sorted(union)],
        distinct_roles=len(union),
        multi_role=len(union) >= 2,
        attacker_gain=attacker_gain(ledger, controlled),
    )


def wallet_value(world: World, agent: str, prices: dict[str, float]) -> float:
    total = 0.0
    for asset, amt in sorted(world.balances[agent].items()):
        if amt:
            total += amt * prices[asset]
    return total


class AttributionError(RuntimeError):
    """A world mutation happened outside any recorded action."""


class EventRecorder:
    """Wraps a strategy run: every mutation must happen inside ``action()``."""

    def __init__(self, world: World, controlled: Iterable[str]):
        self.world = world
        self.controlled: list[str] = list(controlled)
        self.event = Event()
        self.ledger = GainsLedger(attackers=set(self.controlled))
        self.start_step = world.step
        self.start_prices = world.oracle.prices()
        self.start_values = {a: wallet_value(world, a, self.start_prices) for a in world.agents}
        # value of every agent as of the end of the last action, at that moment's prices
        self._values_now = dict(self.start_values)
        self._prices_now = dict(self.start_prices)
        self._agent_set = set(world.agents)

    def add_controlled(self, agent: str) -> None:
        if agent not in self.controlled:
            self.controlled.append(agent)
            self.ledger.attackers.add(agent)
        self.start_values.setdefault(agent, 0.0)

    def _values(self) -> dict[str, float]:
        prices = self.world.oracle.prices()
        return {a: wallet_value(self.world, a, prices) for a in self.world.agents}

    def _affected(self, prices: dict[str, float]) -> set[str]:
        """Agents whose holdings changed or who hold an asset whose price moved."""
        w = self.world
        out = set(w.touched)
        for asset, p in prices.items():
            if p != self._prices_now.get(asset):
                out |= w.holders.get(asset, set())
        if len(self._agent_set) != len(self.world.agents):
            self._agent_set = set(self.world.agents)
        return out & self._agent_set

    @contextmanager
    def action(self, agent: str, role: Role, name: str) -> Iterator[Action]:
        w = self.world
        if w.step != self._covered_step():
            raise AttributionError(f"unattributed mutations before action {name!r}")
        w.touched.clear()
        first = len(w.journal)
        act = Action(agent, role, name)
        try:
            yield act
        finally:
            act.ops = list(w.journal[first:])
            prices = w.oracle.prices()
            deltas = {}
            for a in sorted(self._affected(prices)):
                after = wallet_value(w, a, prices)
                delta = after - self._values_now.get(a, 0.0)
                self._values_now[a] = after
                if delta != 0.0:
                    deltas[a] = delta
            self._prices_now = prices
            act.deltas = deltas
            record_action(self.event, self.ledger, act)

    def _covered_step(self) -> int:
        for act in reversed(self.event.actions):
            if act.ops:
                return act.ops[-1].step
        return self.start_step

    def check_attribution(self) -> None:
        """Every journal step since the start belongs to exactly one action."""
        seen: list[int] = [op.step for act in self.event.actions for op in act.ops]
        expected = list(range(self.start_step + 1, self.world.step + 1))
        if seen != expected:
            raise AttributionError(f"journal steps {expected} but actions cover {seen}")

    def exit_values(self) -> dict[str, float]:
        """Controlled wallets valued at the prices seen before the event started."""
        out = {}
        for a in self.controlled:
            total = 0.0
            for asset, amt in sorted(self.world.balances[a].items()):
                if amt:
                    total += amt * self.start_prices[asset]
            out[a] = total
        return out

    def exit_profit(self) -> float:
        ev = self.exit_values()
        return sum(ev[a] - self.start_values.get(a, 0.0) for a in self.controlled)

    def telescoping_residual(self) -> float:
        """|sum of deltas - (final value - initial value)| over all agents."""
        final = self._values()
        # rounding accumulates with the size of the deltas, not of their sum
        volume: dict[str, float] = {}
        for act in self.event.actions:
            for a, d in act.deltas.items():
                volume[a] = volume.get(a, 0.0) + abs(d)
        worst = 0.0
        for a in final:
            lhs = self.ledger.g(a)
            rhs = final[a] - self.start_values.get(a, 0.0)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs), volume.get(a, 0.0)))
        return worst
