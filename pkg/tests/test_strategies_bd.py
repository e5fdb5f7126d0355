import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from builders import bd_world
from defi_roleplay.strategies import BDParams, bd_enhanced_run, bd_primitive_run, make_params, run_strategy


def desk_params(**kw):
    return BDParams(init_mint=kw.pop("init_mint", 100.0), iter=kw.pop("iter", 5), **kw)


def test_primitive_on_desk():
    rep = bd_primitive_run(bd_world(), desk_params())
    assert rep.feasible
    assert rep.profit == pytest.approx(3530.8641975, rel=1e-9)
    assert rep.metrics["epsilon_measured"] == pytest.approx(4.11522633744856, rel=1e-12)
    assert rep.metrics["bad_debt_B"] == pytest.approx(7510.288, rel=1e-6)
    assert rep.roles == {"Borrower", "Lender", "Yield Farmer"}


def test_enhanced_on_desk():
    rep = bd_enhanced_run(bd_world(), desk_params())
    assert rep.feasible
    assert rep.profit == pytest.approx(3619.047619, rel=1e-9)
    assert rep.metrics["liquidations"] == 2
    assert "Liquidator" in rep.roles
    assert rep.deviation <= 1e-9


def test_donation_strands_bad_debt_and_conserves_tokens():
    rep = bd_primitive_run(bd_world(), desk_params())
    assert rep.metrics["bad_debt"] > rep.profit
    assert rep.metrics["conservation_residual"] <= 1e-12
    assert rep.metrics["telescoping_residual"] <= 1e-12


def test_explicit_amounts_override_closed_form():
    rep = bd_primitive_run(bd_world(), desk_params(collateral_B=3000.0, donate=1500.0))
    assert rep.closed_form is None
    assert rep.params["collateral_B"] == 3000.0


def test_infeasible_closed_form_becomes_error():
    rep = bd_primitive_run(bd_world(), desk_params(init_mint=0.0, iter=1))
    assert rep.error is not None and not rep.feasible


def test_undersized_donation_cannot_repay():
    rep = bd_primitive_run(bd_world(), desk_params(donate=0.0))
    assert not rep.feasible


def test_param_validation():
    with pytest.raises(ValueError):
        make_params("bd", {"init_mint": 1.0})
    with pytest.raises(ValueError):
        make_params("bd", {"init_mint": 1.0, "iter": 2.5})
    with pytest.raises(ValueError):
        make_params("bd", {"init_mint": 1.0, "iter": 60})
    with pytest.raises(ValueError):
        make_params("bd", {"init_mint": -1.0, "iter": 2})


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.01), st.floats(0.0, 0.01))
def test_profit_falls_as_flash_fee_rises(f1, f2):
    lo, hi = sorted((f1, f2))
    p = make_params("bd", {"init_mint": 100.0, "iter": 5})
    a = run_strategy("bd", bd_world(fee=lo), p).profit
    b = run_strategy("bd", bd_world(fee=hi), p).profit
    assert b <= a + 1e-9 * abs(a)


@settings(max_examples=60, deadline=None)
@given(st.floats(100.0, 1e6), st.floats(0.05, 0.9), st.floats(0.1, 20.0), st.floats(0.3, 0.95),
       st.floats(0.3, 0.95), st.floats(0.0, 1.0), st.integers(1, 10), st.booleans())
def test_every_feasible_run_matches_closed_form(S, bfrac, bs_mult, crs, crib, mint_frac, it, enhanced):
    strategy = "bd-enhanced" if enhanced else "bd"
    rep = run_strategy(strategy, bd_world(S=S, b=S * bfrac, b_s=S * bs_mult, CR_s=crs, CR_IB=crib),
                       make_params(strategy, {"init_mint": S * mint_frac, "iter": it}))
    assume(rep.closed_form is not None and rep.feasible)
    assert rep.deviation <= 1e-6
    assert rep.metrics["conservation_residual"] <= 1e-12
