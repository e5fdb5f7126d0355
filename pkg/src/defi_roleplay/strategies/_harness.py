from __future__ import annotations

from typing import Any

from ..roleplay import EventRecorder, classify_roleplay
from ..world import World
from .report import AttackReport


def residual_state(world: World, controlled: list[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    mine = set(controlled)
    market = world.market
    if market is not None:
        out["market_cash"] = dict(sorted(world.holdings(market.holder).items()))
        out["bad_debt"] = market.bad_debt()
        out["positions"] = {
            a: {
                "collateral": dict(sorted(p.collateral.items())),
                "debt": dict(sorted(p.debt.items())),
                "healthy": market.is_healthy(a),
            }
            for a, p in sorted(market.positions.items())
            if a in mine
        }
    if world.pool is not None:
        out["pool_reserves"] = {"stable": world.pool.reserve_s, "manipulated": world.pool.reserve_m}
    if world.vault is not None and world.vault.share_supply > 0:
        out["vault_price"] = world.vault.share_price
        out["vault_supply"] = world.vault.share_supply
    out["wallets"] = {a: dict(sorted(world.holdings(a).items())) for a in controlled}
    return out


def finish(
    world: World,
    rec: EventRecorder,
    strategy: str,
    params: dict[str, Any],
    reference_totals: dict[str, float],
    closed_form: float | None,
    feasibility: dict[str, bool],
    metrics: dict[str, Any],
    error: str | None = None,
) -> AttackReport:
    """Assemble the report once the strategy has stopped mutating the world."""
    profit = rec.exit_profit()
    flash = world.flash
    if flash is not None and flash.open:
        # an unrepayable loan still counts against the attacker at face value
        for asset, due in flash.outstanding().items():
            profit -= due * rec.start_prices[asset]
        feasibility["flash_repayable"] = False
    rec.check_attribution()
    rp = classify_roleplay(rec.event, rec.ledger, rec.controlled)
    metrics = dict(metrics)
    metrics["conservation_residual"] = world.conservation_residual(reference_totals)
    metrics["telescoping_residual"] = rec.telescoping_residual()
    metrics["steps"] = world.step - rec.start_step
    return AttackReport(
        strategy=strategy,
        params=params,
        profit=profit,
        closed_form=closed_form,
        trace=[a.to_dict() for a in rec.event.actions],
        gains=rec.ledger.to_dict(),
        roleplay=rp.to_dict(),
        feasibility=feasibility,
        residual_state=residual_state(world, rec.controlled),
        metrics=metrics,
        error=error,
    )
