"""Borrow-and-Buy: pump a thin collateral token on the AMM and over-borrow against it.

Round 1 is the forward direction (buy the manipulated token with stable,
deposit it, borrow stable).  With ``rounds > 1`` the direction alternates: a
backward round flash-borrows manipulated tokens, dumps them for stable,
deposits the stable and borrows the manipulated tokens the market still holds
at the now depressed price.  Every round after the first uses a fresh
attacker-controlled account, since the previous one is left holding an
underwater position.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ..errors import SimulationError
from ..roleplay import EventRecorder, Role
from ..world import World
from . import formulas as F
from ._harness import finish
from .report import AttackReport, BBParams


@dataclass(frozen=True)
class BBInputs:
    init_s: float
    init_m: float
    CR_m: float
    CR_s: float
    L0: float
    M0: float
    flash_fee: float

    @property
    def symmetric(self) -> bool:
        return math.isclose(self.L0, self.M0, rel_tol=1e-12)


def bb_inputs_from_world(world: World) -> BBInputs:
    pool, market = world.pool, world.market
    if pool is None or market is None:
        raise ValueError("borrow-and-buy needs a pool and a lending market")
    flash = world.flash
    return BBInputs(
        init_s=market.cash(pool.asset_s),
        init_m=market.cash(pool.asset_m),
        CR_m=market.cr(pool.asset_m),
        CR_s=market.cr(pool.asset_s),
        L0=pool.reserve_s,
        M0=pool.reserve_m,
        flash_fee=flash.fee if flash is not None else 0.0,
    )


def _solve_quadratic_size(cash: float, cr: float, reserve: float) -> float:
    """Size x with cr * x * (1 + x / reserve) == cash."""
    return (math.sqrt(1.0 + 4.0 * cash / (cr * reserve)) - 1.0) * reserve / 2.0


class _Runner:
    def __init__(self, world: World, treasury: str):
        self.w = world
        self.pool = world.pool
        self.market = world.market
        self.s = self.pool.asset_s
        self.m = self.pool.asset_m
        self.treasury = treasury
        self.rec = EventRecorder(world, [treasury])

    def account(self, k: int) -> str:
        if k == 1:
            return self.treasury
        name = f"{self.treasury}.r{k}"
        if not self.w.has_holder(name):
            self.w.register_agent(name)
        self.rec.add_controlled(name)
        return name

    def forward_plan(self) -> float | None:
        cr = self.market.cr(self.m)
        cash = self.market.cash(self.s)
        if cr <= 0.0 or cash <= 0.0:
            return None
        return _solve_quadratic_size(cash, cr, self.pool.reserve_s)

    def forward(self, acct: str, out_s: float) -> float:
        rec, w = self.rec, self.w
        if acct != self.treasury:
            with rec.action(self.treasury, Role.BORROWER, "fund round account"):
                w.transfer(self.treasury, acct, self.s, out_s)
        with rec.action(acct, Role.TRADER, "buy manipulated"):
            bought = self.pool.execute_swap(acct, self.s, out_s)
        with rec.action(acct, Role.LENDER, "deposit manipulated"):
            self.market.deposit(acct, self.m, bought)
        with rec.action(acct, Role.BORROWER, "borrow stable"):
            amt = self.market.max_borrow(acct, self.s)
            self.market.borrow(acct, self.s, amt)
            if acct != self.treasury:
                w.transfer(acct, self.treasury, self.s, amt)
        return amt

    def backward_plan(self) -> float | None:
        cr = self.market.cr(self.s)
        cash = self.market.cash(self.m)
        if cr <= 0.0 or cash <= 0.0 or self.w.flash is None:
            return None
        y = _solve_quadratic_size(cash, cr, self.pool.reserve_m)
        return min(y, self.w.flash.liquidity(self.m))

    def backward(self, acct: str, y: float) -> float:
        rec, w, flash = self.rec, self.w, self.w.flash
        with rec.action(acct, Role.BORROWER, "flash borrow manipulated"):
            handle = flash.flash_borrow(acct, self.m, y)
        with rec.action(acct, Role.TRADER, "dump manipulated"):
            got = self.pool.execute_swap(acct, self.m, y)
        with rec.action(acct, Role.LENDER, "deposit stable"):
            self.market.deposit(acct, self.s, got)
        with rec.action(acct, Role.BORROWER, "borrow manipulated and settle"):
            units = self.market.max_borrow(acct, self.m)
            self.market.borrow(acct, self.m, units)
            flash.flash_repay(handle)
        left = w.balance(acct, self.m)
        with rec.action(acct, Role.TRADER, "sell surplus"):
            proceeds = self.pool.execute_swap(acct, self.m, left)
        with rec.action(acct, Role.BORROWER, "sweep to treasury"):
            w.transfer(acct, self.treasury, self.s, proceeds)
        return proceeds


def _round_gain_forward(r: _Runner, x: float) -> float:
    return min(r.market.cr(r.m) * x * (1.0 + x / r.pool.reserve_s), r.market.cash(r.s)) - x


def _round_gain_backward(r: _Runner, y: float) -> float:
    """Stable proceeds of a backward round, evaluated without touching the world."""
    S, M = r.pool.reserve_s, r.pool.reserve_m
    got = S * y / (M + y)
    S2, M2 = S - got, M + y
    units = min(r.market.cr(r.s) * got * M2 / S2, r.market.cash(r.m))
    spare = units - r.w.flash.repayment(y)
    if spare <= 0.0:
        return spare
    return S2 * spare / (M2 + spare)


def _run(world: World, params: BBParams, attacker: str, strategy: str) -> AttackReport:
    reference = world.totals()
    inputs = bb_inputs_from_world(world)
    runner = _Runner(world, attacker)
    threshold = params.min_round_profit * max(1.0, inputs.init_s)
    rounds: list[dict] = []
    stop_reason = "max_rounds"
    error = None
    try:
        for k in range(1, params.rounds + 1):
            forward = k % 2 == 1
            if forward:
                size = params.out_s if (k == 1 and params.out_s is not None) else runner.forward_plan()
                gain = _round_gain_forward(runner, size) if size is not None else None
            else:
                size = runner.backward_plan()
                gain = _round_gain_backward(runner, size) if size else None
            # the first round always runs so a single-round report exists at any out_s
            if k > 1 and (gain is None or gain <= threshold):
                stop_reason = "unprofitable"
                break
            if size is None:
                stop_reason = "no capacity"
                break
            acct = runner.account(k)
            got = runner.forward(acct, size) if forward else runner.backward(acct, size)
            rounds.append({"round": k, "direction": "forward" if forward else "backward",
                           "account": acct, "size": size, "received": got, "planned_gain": gain})
    except SimulationError as exc:
        error = f"{type(exc).__name__}: {exc}"

    market = world.market
    residual_s = market.cash(world.pool.asset_s)
    residual_m = market.cash(world.pool.asset_m)
    # manipulated tokens left in the market count at what they would fetch in the pool
    residual_value = residual_s + world.pool.quote(world.pool.asset_m, residual_m)
    metrics: dict = {
        "inputs": asdict(inputs),
        "rounds_executed": len(rounds),
        "rounds": rounds,
        "stop_reason": stop_reason if error is None else "error",
        "residual_stable": residual_s,
        "residual_manipulated": residual_m,
        "residual_value": residual_value,
    }
    closed_form = None
    exact = inputs.symmetric and world.pool.fee == 0.0
    if strategy == "bb":
        first = rounds[0] if rounds else None
        out_s = first["size"] if first else (params.out_s or 0.0)
        borrowed = first["received"] if first else 0.0
        metrics["out_s"] = out_s
        metrics["borrowed"] = borrowed
        metrics["borrow_uncapped"] = F.bb_borrow_amount(out_s, inputs.CR_m, inputs.L0)
        metrics["truncated"] = metrics["borrow_uncapped"] > inputs.init_s
        if world.pool.fee == 0.0 and inputs.CR_m > 0:
            closed_form = F.bb_round_profit(out_s, inputs.init_s, inputs.CR_m, inputs.L0)
            if inputs.init_s > 0:
                metrics["formula_optimum"] = asdict(F.bb_single_formula(inputs.init_s, inputs.CR_m, inputs.L0))
        feasibility = {"profitable": borrowed > out_s}
    else:
        if inputs.CR_m > 0:
            L1 = inputs.L0 / (1.0 + inputs.init_m / inputs.L0)
            bound = F.bb_multi_residual_bound(inputs.CR_m, inputs.L0, inputs.init_m)
            metrics["residual_bound"] = bound
            metrics["bound_holds"] = residual_value <= bound + 1e-9 * max(1.0, L1)
            # the bound speaks about the state once further rounds stop paying
            metrics["bound_applies"] = stop_reason == "unprofitable" and error is None
            metrics["bound_form_profit"] = F.bb_multi_formula(inputs.init_s, inputs.init_m, inputs.CR_m, inputs.L0)
        metrics["manipulated_drained"] = residual_m <= 1e-9 * max(1.0, inputs.init_m)
        fee_free = all(r["direction"] == "forward" for r in rounds) or inputs.flash_fee == 0.0
        if exact and fee_free and error is None:
            closed_form = F.bb_multi_profit(inputs.init_s, inputs.init_m, inputs.L0, residual_value)
        feasibility = {"profitable": bool(rounds) and rounds[0]["received"] > rounds[0]["size"]}
    report_params = {"out_s": params.out_s, "rounds": params.rounds, "min_round_profit": params.min_round_profit}
    report = finish(world, runner.rec, strategy, report_params, reference, closed_form, feasibility, metrics, error)
    if report.profit <= 0.0:
        report.feasibility["profitable"] = False
    return report


def bb_single_run(world: World, params: BBParams | None = None, attacker: str = "attacker") -> AttackReport:
    params = params or BBParams()
    if params.rounds != 1:
        params = BBParams(params.out_s, 1, params.min_round_profit)
    return _run(world, params, attacker, "bb")


def bb_multi_run(world: World, params: BBParams, attacker: str = "attacker") -> AttackReport:
    return _run(world, params, attacker, "bb-multi")
