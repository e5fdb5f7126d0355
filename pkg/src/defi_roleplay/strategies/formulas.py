"""Closed-form profit expressions for the Borrow-and-Buy and Borrow-and-Donate attacks.

All amounts are in stable units; the interest-bearing token is assumed to
start at a share price of one, as in the analytical model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import InfeasibleParametersError


# -- Borrow and Buy ------------------------------------------------------------


def bb_buy_amount(out_s: float, L0: float) -> float:
    """Manipulated tokens received for ``out_s`` stable on a fresh symmetric pool."""
    return L0 * out_s / (L0 + out_s)


def bb_new_price(out_s: float, L0: float) -> float:
    return (1.0 + out_s / L0) ** 2


def bb_borrow_amount(out_s: float, CR_m: float, L0: float) -> float:
    """Stable borrowable against the bought tokens at the post-swap price."""
    return (1.0 + out_s / L0) * out_s * CR_m


def bb_round_profit(out_s: float, init_s: float, CR_m: float, L0: float) -> float:
    """Single-round profit with the borrow truncated at the market's stable liquidity."""
    return min(bb_borrow_amount(out_s, CR_m, L0), init_s) - out_s


def bb_optimal_out(init_s: float, CR_m: float, L0: float) -> float:
    """Purchase size at which the borrow exactly exhausts ``init_s``."""
    return (math.sqrt(1.0 + 4.0 * init_s / (CR_m * L0)) - 1.0) * L0 / 2.0


@dataclass(frozen=True)
class BBFormula:
    out_s: float
    max_profit: float
    feasible: bool


def bb_single_formula(init_s: float, CR_m: float, L0: float) -> BBFormula:
    if init_s < 0 or L0 <= 0 or not 0.0 < CR_m <= 1.0:
        raise InfeasibleParametersError("need init_s >= 0, L0 > 0 and CR_m in (0, 1]")
    if init_s == 0:
        return BBFormula(0.0, 0.0, False)
    x = bb_optimal_out(init_s, CR_m, L0)
    profit = init_s - x
    # borrow(x) == init_s at the optimum, so profitability is exactly init_s > x
    if profit <= 0:
        return BBFormula(x, 0.0, False)
    return BBFormula(x, profit, True)


def bb_multi_residual_bound(CR_m: float, L0: float, init_m: float) -> float:
    """Upper bound on stable assets left in the market once no new round pays."""
    return (CR_m - 3.0 + 2.0 / CR_m) * L0 / (1.0 + init_m / L0)


def bb_multi_profit(init_s: float, init_m: float, L0: float, stable_left: float) -> float:
    """Total extraction when every manipulated token has been borrowed and sold."""
    return init_s + init_m / (1.0 + init_m / L0) - stable_left


def bb_multi_formula(init_s: float, init_m: float, CR_m: float, L0: float) -> float:
    return bb_multi_profit(init_s, init_m, L0, bb_multi_residual_bound(CR_m, L0, init_m))


# -- Borrow and Donate ---------------------------------------------------------


@dataclass(frozen=True)
class BDInputs:
    supply_IB: float
    borrowable_IB: float
    borrowable_s: float
    CR_s: float
    CR_IB: float
    flash_fee: float = 0.0
    liq_incentive: float = 0.0


@dataclass(frozen=True)
class BDFormula:
    epsilon: float
    profit: float
    init_mint: float
    collateral_B: float
    donate: float
    iter: int

    @property
    def flash_total(self) -> float:
        return self.init_mint + self.collateral_B + self.donate


def _check_bd(m: BDInputs, init_mint: float, iter: int) -> None:
    if iter < 1:
        raise InfeasibleParametersError("iter must be at least 1")
    if init_mint < 0:
        raise InfeasibleParametersError("init_mint must be non-negative")
    if m.supply_IB - m.borrowable_IB <= 0:
        raise InfeasibleParametersError("supply_IB - borrowable_IB must be positive")
    if not (0 < m.CR_s <= 1 and 0 < m.CR_IB <= 1):
        raise InfeasibleParametersError("collateral rates must be in (0, 1]")


def _flash_profit(m: BDInputs, gross: float, init_mint: float, collateral: float, donate: float) -> float:
    return gross - (init_mint + collateral + donate) / (1.0 - m.flash_fee)


def bd_primitive_formula(m: BDInputs, init_mint: float, iter: int) -> BDFormula:
    _check_bd(m, init_mint, iter)
    loop = iter * (m.borrowable_IB + init_mint)
    kept = iter * init_mint + (iter - 1) * m.borrowable_IB
    denom = m.CR_IB * kept
    if denom <= 0:
        raise InfeasibleParametersError("contract A keeps no collateral after the withdrawal")
    collateral_B = loop / m.CR_s
    eps = (m.borrowable_s + collateral_B) / denom
    if eps < 1.0:
        raise InfeasibleParametersError(f"required price factor {eps!r} < 1")
    donate = (eps - 1.0) * (m.supply_IB - m.borrowable_IB)
    gross = m.borrowable_s + collateral_B + m.borrowable_IB + init_mint
    profit = _flash_profit(m, gross, init_mint, collateral_B, donate)
    return BDFormula(eps, profit, init_mint, collateral_B, donate, iter)


def bd_enhanced_formula(m: BDInputs, init_mint: float, iter: int) -> BDFormula:
    _check_bd(m, init_mint, iter)
    kept = init_mint + (iter - 1) * (m.borrowable_IB + init_mint)
    if kept <= 0:
        raise InfeasibleParametersError("contract A keeps no collateral after the withdrawal")
    collateral_B = (iter * (m.borrowable_IB + init_mint) + m.borrowable_s) / m.CR_s
    eps = collateral_B * (1.0 - m.liq_incentive) / kept
    if eps < 1.0:
        raise InfeasibleParametersError(f"required price factor {eps!r} < 1")
    donate = (eps - 1.0) * (m.supply_IB - m.borrowable_IB)
    gross = m.borrowable_s + collateral_B + m.borrowable_IB + init_mint
    profit = _flash_profit(m, gross, init_mint, collateral_B, donate)
    return BDFormula(eps, profit, init_mint, collateral_B, donate, iter)


def bd_formula(m: BDInputs, init_mint: float, iter: int, enhanced: bool = False) -> BDFormula:
    if enhanced:
        return bd_enhanced_formula(m, init_mint, iter)
    return bd_primitive_formula(m, init_mint, iter)


def donation_factor(donate: float, supply_IB: float, borrowable_IB: float) -> float:
    denom = supply_IB - borrowable_IB
    if denom <= 0:
        raise InfeasibleParametersError("supply_IB - borrowable_IB must be positive")
    return 1.0 + donate / denom
