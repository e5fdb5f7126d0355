"""Command line entry point: simulate, optimize, formula and verify."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .errors import InfeasibleParametersError, ScenarioError, SimulationError
from .optimizer import SearchSpec, grid_oracle, integer_sweep, optimise_continuous
from .scenario import STRATEGIES, ScenarioConfig, build_world, fingerprint, load_scenario, require_for
from .strategies import (
    AttackReport,
    bb_inputs_from_world,
    bd_inputs_from_world,
    make_params,
    rel_dev,
    run_strategy,
)
from .strategies import formulas as F

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
VERIFY_TOL = 1e-6
FEE_SWEEP = (0.0, 0.0003, 0.0009, 0.003, 0.01)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2, which means infeasible here
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _coerce(text: str) -> Any:
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"parameter value {text!r} is not a number") from exc


def parse_param_pairs(pairs: list[str] | None) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = _coerce(value.strip())
    return out


def strategy_values(cfg: ScenarioConfig, strategy: str, overrides: dict[str, Any]) -> dict[str, Any]:
    values = dict(cfg.defaults.get(strategy, {}))
    values.update(overrides)
    if strategy.startswith("bd"):
        values.setdefault("init_mint", 0.0)
        values.setdefault("iter", 2)
    return values


def simulate(cfg: ScenarioConfig, strategy: str, values: dict[str, Any]) -> AttackReport:
    require_for(cfg, strategy)
    params = make_params(strategy, values)
    return run_strategy(strategy, build_world(cfg), params)


def report_file(cfg: ScenarioConfig, report: AttackReport, seed: int | None) -> dict:
    return {
        "tool_version": __version__,
        "scenario": cfg.name,
        "scenario_fingerprint": fingerprint(cfg),
        "seed": seed,
        "report": report.to_dict(),
    }


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(obj: Any, out: str | None) -> None:
    text = dumps(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- formula ---------------------------------------------------------------


def formula_values(cfg: ScenarioConfig, strategy: str, values: dict[str, Any]) -> dict:
    require_for(cfg, strategy)
    world = build_world(cfg)
    if strategy.startswith("bb"):
        m = bb_inputs_from_world(world)
        if m.CR_m <= 0:
            raise InfeasibleParametersError("manipulated collateral rate is zero")
        out: dict[str, Any] = {"inputs": asdict(m), "assumptions_hold": m.symmetric and world.pool.fee == 0.0}
        if strategy == "bb":
            out["optimum"] = asdict(F.bb_single_formula(m.init_s, m.CR_m, m.L0))
            if values.get("out_s") is not None:
                out["profit_at_out_s"] = F.bb_round_profit(float(values["out_s"]), m.init_s, m.CR_m, m.L0)
        else:
            out["residual_bound"] = F.bb_multi_residual_bound(m.CR_m, m.L0, m.init_m)
            out["bound_form_profit"] = F.bb_multi_formula(m.init_s, m.init_m, m.CR_m, m.L0)
        return out
    m = bd_inputs_from_world(world)
    p = make_params(strategy, values)
    f = F.bd_formula(m, p.init_mint, p.iter, p.enhanced)
    return {"inputs": asdict(m), "formula": {**asdict(f), "flash_total": f.flash_total}}


# -- optimize --------------------------------------------------------------


def search_spec(cfg: ScenarioConfig, strategy: str, values: dict[str, Any]) -> SearchSpec:
    world = build_world(cfg)
    if strategy == "bb":
        m = bb_inputs_from_world(world)
        hi = max(m.init_s, 1.0)
        return SearchSpec(strategy, world, continuous={"out_s": (0.0, hi)},
                          fixed={k: v for k, v in values.items() if k != "out_s"})
    if strategy == "bb-multi":
        rounds = int(values.get("rounds", 2))
        return SearchSpec(strategy, world, integer={"rounds": (1, max(rounds, 1))},
                          fixed={k: v for k, v in values.items() if k not in ("rounds", "out_s")})
    p = make_params(strategy, values)
    m = bd_inputs_from_world(world)
    try:
        f = F.bd_formula(m, p.init_mint, p.iter, p.enhanced)
        c_hi, d_hi = 2.0 * f.collateral_B, 2.0 * max(f.donate, 1.0)
    except InfeasibleParametersError:
        c_hi = d_hi = 2.0 * (m.borrowable_s + m.supply_IB)
    fixed = {k: v for k, v in values.items() if k not in ("collateral_B", "donate")}
    return SearchSpec(strategy, world, continuous={"collateral_B": (0.0, c_hi), "donate": (0.0, d_hi)}, fixed=fixed)


def _bracketed(spec: SearchSpec, best: dict[str, Any], resolution: int) -> SearchSpec:
    """Shrink every continuous axis to the grid cells around the grid optimum."""
    narrowed = {}
    for name, (lo, hi) in spec.continuous.items():
        step = (hi - lo) / resolution
        x = best.get(name, lo)
        narrowed[name] = (max(lo, x - step), min(hi, x + step))
    return SearchSpec(spec.strategy, spec.world, narrowed, spec.integer, spec.fixed)


def _finite(x: float) -> float | None:
    """Infeasible points score -inf internally; JSON output shows them as null."""
    return x if math.isfinite(x) else None


def numeric_optimum(spec: SearchSpec, resolution: int = 8) -> dict[str, Any]:
    if spec.integer:
        axis = next(iter(spec.integer))
        sweep = integer_sweep(spec, axis)
        if not math.isfinite(sweep.profit):
            return {"params": {}, "profit": 0.0, "all_infeasible": True,
                    "table": [[v, _finite(p)] for v, p, _ in sweep.table]}
        return {"params": {axis: sweep.best}, "profit": sweep.profit, "all_infeasible": False,
                "table": [[v, _finite(p)] for v, p, _ in sweep.table]}
    grid = grid_oracle(spec, resolution)
    if grid.all_infeasible:
        return {"params": {}, "profit": 0.0, "all_infeasible": True}
    refined = _bracketed(spec, grid.best_params, resolution)
    params, profit = optimise_continuous(refined, {})
    if profit < grid.best_profit:
        params, profit = grid.best_params, grid.best_profit
    return {"params": params, "profit": profit, "all_infeasible": False,
            "grid_best": {"params": grid.best_params, "profit": grid.best_profit}}


# -- verify ----------------------------------------------------------------


@dataclass
class VerifyRow:
    strategy: str
    formula: float | None
    simulated: float | None
    numeric: float | None
    deviation: float | None
    passed: bool
    note: str = ""
    fee_profits: list[tuple[float, float]] = field(default_factory=list)


def _supported(cfg: ScenarioConfig) -> list[str]:
    out = []
    for s in STRATEGIES:
        try:
            require_for(cfg, s)
        except ScenarioError:
            continue
        out.append(s)
    return out


def verify_strategy(cfg: ScenarioConfig, strategy: str, fee_sweep: bool = False, numeric: bool = True) -> VerifyRow:
    values = strategy_values(cfg, strategy, {})
    if strategy == "bb":
        world = build_world(cfg)
        m = bb_inputs_from_world(world)
        if not (m.symmetric and world.pool.fee == 0.0 and m.CR_m > 0):
            return VerifyRow(strategy, None, None, None, None, True, "closed form not applicable")
        formula = F.bb_single_formula(m.init_s, m.CR_m, m.L0).max_profit
        sim = simulate(cfg, strategy, {k: v for k, v in values.items() if k != "out_s"}).profit
        num = numeric_optimum(search_spec(cfg, strategy, values))["profit"] if numeric else None
        devs = [rel_dev(sim, formula)] + ([rel_dev(num, formula)] if num is not None else [])
        dev = max(devs)
        return VerifyRow(strategy, formula, sim, num, dev, dev <= VERIFY_TOL)
    if strategy == "bb-multi":
        rep = simulate(cfg, strategy, values)
        bound_ok = bool(rep.metrics.get("bound_holds", False)) or not rep.metrics.get("bound_applies", False)
        note = f"residual {rep.metrics['residual_value']:.6g} vs bound {rep.metrics.get('residual_bound', float('nan')):.6g}"
        if rep.closed_form is None:
            return VerifyRow(strategy, None, rep.profit, None, None, bound_ok, note + "; market not drained")
        dev = rep.deviation
        return VerifyRow(strategy, rep.closed_form, rep.profit, None, dev, bound_ok and dev <= VERIFY_TOL, note)
    # borrow-and-donate
    try:
        rep = simulate(cfg, strategy, values)
    except InfeasibleParametersError as exc:
        return VerifyRow(strategy, None, None, None, None, False, str(exc))
    if rep.closed_form is None:
        return VerifyRow(strategy, None, rep.profit, None, None, False,
                         rep.metrics.get("formula_error") or rep.error or "closed form not applicable")
    formula, sim = rep.closed_form, rep.profit
    dev = rel_dev(sim, formula)
    num = None
    if numeric:
        num = numeric_optimum(search_spec(cfg, strategy, values))["profit"]
        # a numeric optimum above the closed form is headroom, not a mismatch
        dev = max(dev, max(0.0, formula - num) / max(1.0, abs(formula)))
    row = VerifyRow(strategy, formula, sim, num, dev, dev <= VERIFY_TOL and rep.feasible)
    if fee_sweep:
        for fee in FEE_SWEEP:
            swept = cfg.model_copy(deep=True)
            swept.flashloan.fee = fee
            row.fee_profits.append((fee, simulate(swept, strategy, values).profit))
        profits = [p for _, p in row.fee_profits]
        mono = all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(profits, profits[1:]))
        row.note = "fee sweep nonincreasing" if mono else "fee sweep NOT monotone"
        row.passed = row.passed and mono
    return row


def verify(cfg: ScenarioConfig, fee_sweep: bool = False, numeric: bool = True,
           strategies: list[str] | None = None) -> list[VerifyRow]:
    chosen = strategies or _supported(cfg)
    return [verify_strategy(cfg, s, fee_sweep, numeric) for s in chosen]


def _fmt(x: float | None) -> str:
    if x is None:
        return "-"
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return f"{x:.10g}"


def render_table(rows: list[VerifyRow]) -> str:
    head = ("strategy", "formula", "simulated", "numeric", "max_rel_dev", "status", "note")
    body = [
        (r.strategy, _fmt(r.formula), _fmt(r.simulated), _fmt(r.numeric), _fmt(r.deviation),
         "PASS" if r.passed else "FAIL", r.note)
        for r in rows
    ]
    widths = [max(len(str(row[i])) for row in [head, *body]) for i in range(len(head))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head, *body]]
    for r in rows:
        if r.fee_profits:
            lines.append(f"{r.strategy} fee sweep: " + ", ".join(f"{f:g}: {p:.10g}" for f, p in r.fee_profits))
    return "\n".join(lines)


# -- argument handling -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="defi-roleplay", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, strategy: bool = True) -> None:
        p.add_argument("--scenario", required=True, help="scenario YAML path or preset name")
        if strategy:
            p.add_argument("--strategy", required=True, choices=STRATEGIES)
            p.add_argument("--param", action="append", metavar="KEY=VALUE", help="strategy parameter (repeatable)")
        p.add_argument("--out", help="write JSON output here instead of stdout")
        p.add_argument("--seed", type=int, default=None, help="reserved; every run is deterministic")

    p = sub.add_parser("simulate", help="run one strategy and emit its report")
    common(p)
    p.add_argument("--out-s", type=float, dest="out_s", help="stable spent in the first buy (bb only)")
    p = sub.add_parser("optimize", help="search strategy parameters for the best simulated profit")
    common(p)
    p.add_argument("--resolution", type=int, default=8, help="grid cells per axis before refinement")
    p.add_argument("--sweep-iter", metavar="LO:HI", help="bd only: sweep iter with closed-form collateral and donation")
    p = sub.add_parser("formula", help="evaluate the closed-form profit expressions")
    common(p)
    p = sub.add_parser("verify", help="compare closed forms, simulation and numeric optima")
    common(p, strategy=False)
    p.add_argument("--strategy", action="append", choices=STRATEGIES, help="limit to these strategies")
    p.add_argument("--fee-sweep", action="store_true", help="bd rows: check profit is nonincreasing in the flash fee")
    p.add_argument("--no-numeric", action="store_true", help="skip the numeric optimum column")
    return parser


def _cmd_simulate(args: argparse.Namespace, cfg: ScenarioConfig) -> int:
    overrides = parse_param_pairs(args.param)
    if args.out_s is not None:
        overrides["out_s"] = args.out_s
    report = simulate(cfg, args.strategy, strategy_values(cfg, args.strategy, overrides))
    _emit(report_file(cfg, report, args.seed), args.out)
    if args.out:
        state = "feasible" if report.feasible else "infeasible"
        print(f"{args.strategy}: profit {report.profit:.10g} ({state}); report written to {args.out}")
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def _cmd_optimize(args: argparse.Namespace, cfg: ScenarioConfig) -> int:
    require_for(cfg, args.strategy)
    values = strategy_values(cfg, args.strategy, parse_param_pairs(args.param))
    if args.sweep_iter:
        if not args.strategy.startswith("bd"):
            raise UsageError("--sweep-iter applies to bd strategies only")
        lo, _, hi = args.sweep_iter.partition(":")
        try:
            bounds = (int(lo), int(hi))
        except ValueError as exc:
            raise UsageError("--sweep-iter expects LO:HI integers") from exc
        fixed = {k: v for k, v in values.items() if k not in ("iter", "collateral_B", "donate")}
        spec = SearchSpec(args.strategy, build_world(cfg), integer={"iter": bounds}, fixed=fixed)
        result = numeric_optimum(spec)
    else:
        result = numeric_optimum(search_spec(cfg, args.strategy, values), args.resolution)
    out = {"tool_version": __version__, "scenario": cfg.name, "scenario_fingerprint": fingerprint(cfg),
           "strategy": args.strategy, "fixed": values, **result}
    _emit(out, args.out)
    return EXIT_INFEASIBLE if result["all_infeasible"] or result["profit"] <= 0 else EXIT_OK


def _cmd_formula(args: argparse.Namespace, cfg: ScenarioConfig) -> int:
    values = strategy_values(cfg, args.strategy, parse_param_pairs(args.param))
    try:
        out = formula_values(cfg, args.strategy, values)
    except InfeasibleParametersError as exc:
        _emit({"strategy": args.strategy, "feasible": False, "reason": str(exc)}, args.out)
        return EXIT_INFEASIBLE
    _emit({"strategy": args.strategy, "scenario": cfg.name, **out}, args.out)
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace, cfg: ScenarioConfig) -> int:
    rows = verify(cfg, args.fee_sweep, not args.no_numeric, args.strategy)
    if not rows:
        raise UsageError("the scenario supports none of the strategies")
    print(render_table(rows))
    if args.out:
        Path(args.out).write_text(dumps({"scenario": cfg.name, "rows": [asdict(r) for r in rows]}))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_ERROR


COMMANDS = {"simulate": _cmd_simulate, "optimize": _cmd_optimize, "formula": _cmd_formula, "verify": _cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_scenario(args.scenario)
        return COMMANDS[args.command](args, cfg)
    except (ScenarioError, UsageError, ValueError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
