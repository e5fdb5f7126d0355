"""Strategy parameter types and the attack report."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

DEFAULT_MAX_ITER = 50


@dataclass
class BBParams:
    out_s: float | None = None  # None: per-round optimum
    rounds: int = 1
    min_round_profit: float = 1e-12  # relative to the market's initial stable liquidity

    def __post_init__(self) -> None:
        if self.out_s is not None and self.out_s <= 0:
            raise ValueError("out_s must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be a positive integer")


@dataclass
class BDParams:
    init_mint: float
    iter: int
    collateral_B: float | None = None  # None: closed-form value
    donate: float | None = None  # None: closed-form value
    enhanced: bool = False
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        if self.iter < 1:
            raise ValueError("iter must be at least 1")
        if self.iter > self.max_iter:
            raise ValueError(f"iter {self.iter} exceeds max_iter {self.max_iter}")
        for name in ("init_mint", "collateral_B", "donate"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def flash_total(self) -> float:
        return self.init_mint + (self.collateral_B or 0.0) + (self.donate or 0.0)


def rel_dev(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


@dataclass
class AttackReport:
    strategy: str
    params: dict[str, Any]
    profit: float
    closed_form: float | None
    trace: list[dict]
    gains: dict
    roleplay: dict
    feasibility: dict[str, bool]
    residual_state: dict[str, Any]
    metrics: dict[str, Any] = field(default_factory=dict)
    error: str | None = None

    @property
    def feasible(self) -> bool:
        return self.error is None and all(self.feasibility.values())

    @property
    def roles(self) -> set[str]:
        return set(self.roleplay.get("roles", []))

    @property
    def deviation(self) -> float | None:
        if self.closed_form is None:
            return None
        return rel_dev(self.profit, self.closed_form)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["feasible"] = self.feasible
        out["deviation"] = self.deviation
        return out
