"""Brute-force grids, golden-section refinement and integer sweeps over strategy parameters.

Every objective evaluation runs the real strategy on a private copy of the
base world, so the optimizer never relies on the closed forms it is used to
check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import SimulationError
from .strategies import AttackReport, make_params, run_strategy
from .world import World

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
X_TOL = 1e-9
PRESAMPLES = 9
FALLBACK_POINTS = 201


@dataclass
class SearchSpec:
    strategy: str
    world: World
    continuous: dict[str, tuple[float, float]] = field(default_factory=dict)
    integer: dict[str, tuple[int, int]] = field(default_factory=dict)
    fixed: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, (lo, hi) in {**self.continuous, **self.integer}.items():
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"bounds for {name} must be finite")
            if lo > hi:
                raise ValueError(f"bounds for {name} are reversed: {lo} > {hi}")
        for name, (lo, hi) in self.integer.items():
            if int(lo) != lo or int(hi) != hi:
                raise ValueError(f"bounds for integer axis {name} must be integers")
        overlap = (set(self.continuous) | set(self.integer)) & set(self.fixed)
        if overlap:
            raise ValueError(f"parameters both searched and fixed: {sorted(overlap)}")

    def axes(self) -> list[str]:
        return sorted([*self.continuous, *self.integer])


@dataclass
class Evaluation:
    params: dict[str, Any]
    profit: float
    feasible: bool


def run_point(spec: SearchSpec, params: dict[str, Any]) -> AttackReport | None:
    """Run the strategy on a fresh copy of the base world; None if parameters are invalid."""
    try:
        p = make_params(spec.strategy, {**spec.fixed, **params})
    except ValueError:
        return None
    try:
        return run_strategy(spec.strategy, spec.world.snapshot(), p)
    except SimulationError:
        return None


def evaluate(spec: SearchSpec, params: dict[str, Any]) -> Evaluation:
    rep = run_point(spec, params)
    if rep is None:
        return Evaluation(dict(params), -math.inf, False)
    return Evaluation(dict(params), rep.profit, rep.feasible)


# -- exhaustive grid -----------------------------------------------------------


@dataclass
class GridResult:
    best_params: dict[str, Any]
    best_profit: float
    all_infeasible: bool
    surface: list[Evaluation]


def grid_axis(lo: float, hi: float, resolution: int) -> np.ndarray:
    """``resolution`` equal cells, so doubling the resolution nests the previous grid."""
    return lo + (hi - lo) * np.arange(resolution + 1) / resolution


def grid_oracle(spec: SearchSpec, resolution: int) -> GridResult:
    if resolution < 3:
        raise ValueError("resolution must be at least 3")
    names = spec.axes()
    values: list[list[Any]] = []
    for name in names:
        if name in spec.continuous:
            values.append([float(x) for x in grid_axis(*spec.continuous[name], resolution)])
        else:
            lo, hi = spec.integer[name]
            values.append(list(range(int(lo), int(hi) + 1)))
    surface: list[Evaluation] = []
    best: Evaluation | None = None
    # product() walks the axes in lexicographic order, so keeping the first
    # strict maximum is the deterministic tie-break
    for combo in itertools.product(*values):
        ev = evaluate(spec, dict(zip(names, combo)))
        surface.append(ev)
        if ev.feasible and (best is None or ev.profit > best.profit):
            best = ev
    if best is None:
        return GridResult({}, 0.0, True, surface)
    return GridResult(best.params, best.profit, False, surface)


# -- one-dimensional refinement ------------------------------------------------


@dataclass
class Refinement:
    x: float
    f: float
    evaluations: int
    fallback: bool = False


def _is_unimodal(vals: list[float]) -> bool:
    finite = [v for v in vals if math.isfinite(v)]
    scale = max([1.0] + [abs(v) for v in finite])
    slack = 1e-12 * scale
    m = int(np.argmax(vals))
    rising = all(vals[i + 1] >= vals[i] - slack for i in range(m))
    falling = all(vals[i + 1] <= vals[i] + slack for i in range(m, len(vals) - 1))
    return rising and falling


def golden_section(
    f: Callable[[float], float], lo: float, hi: float, tol: float = X_TOL
) -> tuple[float, float, int]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns (x, f(x), evaluations)."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    # absolute 1e-9 is below double resolution for large brackets
    eff_tol = max(tol, 8.0 * np.finfo(float).eps * max(abs(lo), abs(hi)))
    while b - a > eff_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        n += 1
    x = (a + b) / 2.0
    fx = f(x)
    candidates = [(fx, x), (fc, c), (fd, d)]
    fbest, xbest = max(candidates, key=lambda t: (t[0], -t[1]))
    return xbest, fbest, n + 1


def maximise_1d(f: Callable[[float], float], lo: float, hi: float, tol: float = X_TOL) -> Refinement:
    if hi - lo <= 0.0:
        return Refinement(lo, f(lo), 1)
    xs = list(np.linspace(lo, hi, PRESAMPLES))
    vals = [f(x) for x in xs]
    n = len(xs)
    finite = [v for v in vals if math.isfinite(v)]
    scale = max([1.0] + [abs(v) for v in finite])
    if finite and len(finite) == len(vals) and max(vals) - min(vals) <= 1e-15 * scale:
        mid = (lo + hi) / 2.0
        return Refinement(mid, f(mid), n + 1)
    fallback = not _is_unimodal(vals)
    if fallback:
        xs = list(np.linspace(lo, hi, FALLBACK_POINTS))
        vals = [f(x) for x in xs]
        n += len(xs)
    m = int(np.argmax(vals))
    a, b = xs[max(m - 1, 0)], xs[min(m + 1, len(xs) - 1)]
    x, fx, k = golden_section(f, a, b, tol)
    n += k
    if vals[m] > fx:
        x, fx = xs[m], vals[m]
    return Refinement(float(x), float(fx), n, fallback)


def refine_1d(
    spec: SearchSpec,
    axis: str,
    bracket: tuple[float, float] | None = None,
    params: dict[str, Any] | None = None,
    tol: float = X_TOL,
) -> Refinement:
    """Golden-section search on one continuous axis, other axes held at ``params``."""
    if axis not in spec.continuous:
        raise ValueError(f"{axis} is not a continuous axis of this spec")
    lo, hi = bracket if bracket is not None else spec.continuous[axis]
    base = dict(params or {})

    def f(x: float) -> float:
        return evaluate(spec, {**base, axis: x}).profit

    return maximise_1d(f, lo, hi, tol)


@dataclass
class NestedRefinement:
    params: dict[str, float]
    profit: float
    evaluations: int


def refine_nested(
    spec: SearchSpec,
    outer: str,
    inner: str,
    params: dict[str, Any] | None = None,
    tol: float = X_TOL,
) -> NestedRefinement:
    """Maximise over two continuous axes by refining the profile max_inner f(outer, inner)."""
    base = dict(params or {})
    count = 0
    best_inner: dict[float, float] = {}

    def profile(x: float) -> float:
        nonlocal count
        r = refine_1d(spec, inner, params={**base, outer: x}, tol=tol)
        count += r.evaluations
        best_inner[x] = r.x
        return r.f

    r = maximise_1d(profile, *spec.continuous[outer], tol=tol)
    y = best_inner.get(r.x)
    if y is None:
        y = refine_1d(spec, inner, params={**base, outer: r.x}, tol=tol).x
    return NestedRefinement({**base, outer: r.x, inner: y}, r.f, count)


def optimise_continuous(spec: SearchSpec, params: dict[str, Any], tol: float = X_TOL) -> tuple[dict, float]:
    """Best profit over the spec's continuous axes with ``params`` fixed."""
    axes = sorted(spec.continuous)
    if not axes:
        ev = evaluate(spec, params)
        return dict(params), ev.profit if ev.feasible else -math.inf
    if len(axes) == 1:
        r = refine_1d(spec, axes[0], params=params, tol=tol)
        return {**params, axes[0]: r.x}, r.f
    if len(axes) == 2:
        outer, inner = axes
        r = refine_nested(spec, outer, inner, params=params, tol=tol)
        return r.params, r.profit
    raise ValueError("at most two continuous axes can be refined jointly")


# -- integer sweep -------------------------------------------------------------


@dataclass
class SweepResult:
    best: int
    profit: float
    table: list[tuple[int, float, dict]]


def integer_sweep(spec: SearchSpec, axis: str, tol: float = X_TOL) -> SweepResult:
    """Try every integer on ``axis``, re-optimising continuous axes; ties go to the smallest."""
    if axis not in spec.integer:
        raise ValueError(f"{axis} is not an integer axis of this spec")
    lo, hi = spec.integer[axis]
    others = [a for a in spec.integer if a != axis]
    if others:
        raise ValueError("sweep one integer axis at a time; fix the others")
    table: list[tuple[int, float, dict]] = []
    for v in range(int(lo), int(hi) + 1):
        best_params, profit = optimise_continuous(spec, {axis: v}, tol)
        table.append((v, profit, best_params))
    best_v, best_p = table[0][0], table[0][1]
    for v, p, _ in table[1:]:
        if p > best_p and not math.isclose(p, best_p, rel_tol=1e-9, abs_tol=1e-12):
            best_v, best_p = v, p
    return SweepResult(best_v, best_p, table)
