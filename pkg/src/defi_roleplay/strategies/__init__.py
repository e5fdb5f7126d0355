"""Attack strategies, their closed forms and a name-based dispatcher."""

from __future__ import annotations

from typing import Any

from ..world import World
from .bb import BBInputs, bb_inputs_from_world, bb_multi_run, bb_single_run
from .bd import bd_enhanced_run, bd_inputs_from_world, bd_primitive_run
from .report import DEFAULT_MAX_ITER, AttackReport, BBParams, BDParams, rel_dev

STRATEGY_NAMES = ("bb", "bb-multi", "bd", "bd-enhanced")


def make_params(strategy: str, values: dict[str, Any]) -> BBParams | BDParams:
    """Build the parameter object for ``strategy`` from loosely typed values."""
    v = dict(values)
    if strategy in ("bb", "bb-multi"):
        unknown = set(v) - {"out_s", "rounds", "min_round_profit"}
        if unknown:
            raise ValueError(f"unknown parameter(s) for {strategy}: {', '.join(sorted(unknown))}")
        rounds = int(v.get("rounds", 1 if strategy == "bb" else 2))
        out_s = v.get("out_s")
        return BBParams(
            out_s=None if out_s is None else float(out_s),
            rounds=rounds,
            min_round_profit=float(v.get("min_round_profit", 1e-12)),
        )
    if strategy in ("bd", "bd-enhanced"):
        unknown = set(v) - {"init_mint", "iter", "collateral_B", "donate", "max_iter"}
        if unknown:
            raise ValueError(f"unknown parameter(s) for {strategy}: {', '.join(sorted(unknown))}")
        if "init_mint" not in v or "iter" not in v:
            raise ValueError(f"{strategy} needs init_mint and iter")
        it = float(v["iter"])
        if it != int(it):
            raise ValueError("iter must be an integer")
        opt = lambda k: None if v.get(k) is None else float(v[k])  # noqa: E731
        return BDParams(
            init_mint=float(v["init_mint"]),
            iter=int(it),
            collateral_B=opt("collateral_B"),
            donate=opt("donate"),
            enhanced=strategy == "bd-enhanced",
            max_iter=int(v.get("max_iter", DEFAULT_MAX_ITER)),
        )
    raise ValueError(f"unknown strategy {strategy!r}")


def run_strategy(strategy: str, world: World, params: BBParams | BDParams) -> AttackReport:
    if strategy == "bb":
        return bb_single_run(world, params)
    if strategy == "bb-multi":
        return bb_multi_run(world, params)
    if strategy == "bd":
        return bd_primitive_run(world, params)
    if strategy == "bd-enhanced":
        return bd_enhanced_run(world, params)
    raise ValueError(f"unknown strategy {strategy!r}")


__all__ = [
    "AttackReport",
    "BBInputs",
    "BBParams",
    "BDParams",
    "STRATEGY_NAMES",
    "bb_inputs_from_world",
    "bb_multi_run",
    "bb_single_run",
    "bd_enhanced_run",
    "bd_inputs_from_world",
    "bd_primitive_run",
    "make_params",
    "rel_dev",
    "run_strategy",
]
