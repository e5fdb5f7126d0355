import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import bb_world
from defi_roleplay.cli import simulate, strategy_values
from defi_roleplay.scenario import load_scenario
from defi_roleplay.strategies import BBParams, bb_multi_run, bb_single_run, make_params, run_strategy
from defi_roleplay.strategies import formulas as F


def test_single_round_on_desk():
    rep = bb_single_run(bb_world())
    assert rep.feasible
    assert rep.profit == pytest.approx(7129.375264, rel=1e-9)
    assert rep.metrics["out_s"] == pytest.approx(2870.6247, rel=1e-7)
    assert rep.deviation <= 1e-12
    assert rep.roles == {"Trader", "Lender", "Borrower"}


def test_single_round_below_optimum_is_uncapped():
    rep = bb_single_run(bb_world(), BBParams(out_s=1000.0))
    # 0.9 * 1000 * (1 + 1) = 1800 borrowed for 1000 spent
    assert rep.metrics["borrowed"] == pytest.approx(1800.0, rel=1e-12)
    assert rep.profit == pytest.approx(800.0, rel=1e-12)
    assert not rep.metrics["truncated"]


def test_single_round_above_optimum_is_truncated():
    rep = bb_single_run(bb_world(), BBParams(out_s=5000.0))
    assert rep.metrics["truncated"]
    assert rep.profit == pytest.approx(5000.0, rel=1e-12)


def test_unprofitable_round_reported_infeasible():
    rep = bb_single_run(bb_world(init_s=100.0, CR_m=0.5), BBParams(out_s=50.0))
    assert rep.profit < 0
    assert not rep.feasible


@settings(max_examples=40, deadline=None)
@given(st.floats(100.0, 1e6), st.floats(0.3, 0.95), st.floats(0.01, 1.0), st.floats(0.5, 20.0))
def test_single_round_matches_closed_form_at_any_size(L0, cr, frac, mult):
    init_s = L0 * mult
    rep = bb_single_run(bb_world(L0=L0, init_s=init_s, CR_m=cr, CR_s=cr), BBParams(out_s=init_s * frac))
    assert rep.profit == pytest.approx(F.bb_round_profit(init_s * frac, init_s, cr, L0), rel=1e-9, abs=1e-9 * init_s)
    assert rep.metrics["conservation_residual"] <= 1e-12


def test_multi_round_on_desk():
    cfg = load_scenario("bb_desk")
    rep = simulate(cfg, "bb-multi", strategy_values(cfg, "bb-multi", {}))
    m = rep.metrics
    assert m["stop_reason"] == "unprofitable"
    assert m["bound_applies"] and m["bound_holds"]
    assert m["residual_value"] <= m["residual_bound"]
    assert rep.deviation <= 1e-9
    # rounds alternate and each later round uses its own account
    dirs = [r["direction"] for r in m["rounds"]]
    assert dirs[:4] == ["forward", "backward", "forward", "backward"]
    assert m["rounds"][1]["account"] == "attacker.r2"


def test_multi_round_with_one_round_equals_single():
    single = bb_single_run(bb_world())
    multi = bb_multi_run(bb_world(), BBParams(rounds=1))
    assert multi.profit == pytest.approx(single.profit, rel=1e-12)


def test_multi_round_drains_supplied_manipulated_tokens():
    rep = run_strategy("bb-multi", bb_world(init_m=500.0), make_params("bb-multi", {"rounds": 200}))
    assert rep.metrics["residual_manipulated"] < 1.0
    assert rep.profit > run_strategy("bb", bb_world(init_m=500.0), make_params("bb", {})).profit


def test_flash_fee_reduces_multi_round_profit():
    free = run_strategy("bb-multi", bb_world(init_m=500.0), make_params("bb-multi", {"rounds": 50}))
    paid = run_strategy("bb-multi", bb_world(init_m=500.0, flash_fee=0.003), make_params("bb-multi", {"rounds": 50}))
    assert paid.profit < free.profit
    assert paid.closed_form is None


def test_rejects_bad_params():
    with pytest.raises(ValueError):
        make_params("bb", {"out_s": -1.0})
    with pytest.raises(ValueError):
        make_params("bb-multi", {"rounds": 0})
    with pytest.raises(ValueError):
        make_params("bb", {"iter": 3})
