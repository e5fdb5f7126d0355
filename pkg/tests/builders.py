"""Programmatic scenario builders shared by the test modules."""

from __future__ import annotations

from defi_roleplay.scenario import ScenarioConfig, build_world


def bb_config(L0=1000.0, init_s=10000.0, init_m=0.0, CR_m=0.9, CR_s=0.9, flash_fee=0.0,
              capital=None, reserve_m=None, pool_fee=0.0, liq=0.0) -> ScenarioConfig:
    pool = {"stable": "USD", "manipulated": "TKN", "fee": pool_fee}
    if reserve_m is None:
        pool["L0"] = L0
    else:
        pool.update(reserve_s=L0, reserve_m=reserve_m)
    supply = {"USD": init_s}
    if init_m:
        supply["TKN"] = init_m
    return ScenarioConfig.model_validate({
        "name": "bb_test",
        "assets": {"USD": "stable", "TKN": "manipulated"},
        "agents": {"attacker": {"USD": capital if capital is not None else 10.0 * (init_s + L0)}},
        "pool": pool,
        "market": {"collateral_rates": {"USD": CR_s, "TKN": CR_m}, "liq_incentive": liq, "supply": supply},
        "flashloan": {"fee": flash_fee, "liquidity": {"TKN": 1e6 * (L0 + init_m)}},
    })


def bb_world(**kw):
    return build_world(bb_config(**kw))


def bd_config(S=1000.0, b=400.0, b_s=5000.0, CR_s=0.9, CR_IB=0.9, fee=0.0, liq=0.0,
              init_mint=None, iter=None) -> ScenarioConfig:
    defaults = {}
    if init_mint is not None:
        defaults = {k: {"init_mint": init_mint, "iter": iter} for k in ("bd", "bd-enhanced")}
    return ScenarioConfig.model_validate({
        "name": "bd_test",
        "assets": {"USD": "underlying", "IB": "interest-bearing"},
        "agents": {"contract_A": {}, "contract_B": {}},
        "vault": {"share": "IB", "underlying": "USD", "supply": S},
        "market": {"collateral_rates": {"USD": CR_s, "IB": CR_IB}, "liq_incentive": liq,
                   "supply": {"IB": b, "USD": b_s}},
        "flashloan": {"fee": fee, "liquidity": {"USD": 1e3 * (S + b_s)}},
        "defaults": defaults,
    })


def bd_world(**kw):
    return build_world(bd_config(**kw))
