"""Borrow-and-Donate: loop an interest-bearing token through the market, then inflate it.

Two attacker contracts cooperate.  Contract A holds the flashloan, mints and
supplies the interest-bearing token; contract B posts underlying collateral
and repeatedly borrows the token back out so A can re-supply it.  A then pulls
out what it can, redeems it, donates underlying to the vault to inflate the
share price and borrows everything else the market holds against its now
overvalued collateral.  The enhanced variant lets B drain the market before
the donation and has A liquidate B afterwards to recover B's collateral.
"""

from __future__ import annotations

import math
from dataclasses import asdict

from ..errors import InfeasibleParametersError, SimulationError
from ..roleplay import EventRecorder, Role
from ..world import World
from . import formulas as F
from ._harness import finish
from .report import AttackReport, BDParams

MAX_LIQUIDATIONS = 500


def bd_inputs_from_world(world: World) -> F.BDInputs:
    vault, market, flash = world.vault, world.market, world.flash
    if vault is None or market is None or flash is None:
        raise ValueError("borrow-and-donate needs a vault, a lending market and a flashloan provider")
    ib, u = vault.share_asset, vault.underlying_asset
    oracle = world.oracle
    borrowable_s = sum(
        amt * oracle.price(a) for a, amt in sorted(world.holdings(market.holder).items()) if a != ib
    )
    return F.BDInputs(
        supply_IB=vault.share_supply,
        borrowable_IB=market.cash(ib),
        borrowable_s=borrowable_s,
        CR_s=market.cr(u),
        CR_IB=market.cr(ib),
        flash_fee=flash.fee,
        liq_incentive=market.liq_incentive,
    )


class _Contracts:
    def __init__(self, world: World, a: str, b: str):
        self.w = world
        self.vault = world.vault
        self.market = world.market
        self.flash = world.flash
        self.ib = self.vault.share_asset
        self.u = self.vault.underlying_asset
        self.a, self.b = a, b
        self.rec = EventRecorder(world, [a, b])
        self.handle: int | None = None

    def other_assets(self) -> list[str]:
        return sorted(x for x in self.w.holdings(self.market.holder) if x != self.ib)

    def setup(self, init_mint: float, collateral_B: float, donate: float) -> None:
        rec, a, b = self.rec, self.a, self.b
        with rec.action(a, Role.BORROWER, "flash borrow"):
            self.handle = self.flash.flash_borrow(a, self.u, init_mint + collateral_B + donate)
        if init_mint > 0:
            with rec.action(a, Role.YIELD_FARMER, "mint"):
                shares = self.vault.mint(a, init_mint)
            with rec.action(a, Role.LENDER, "supply minted"):
                self.market.deposit(a, self.ib, shares)
        with rec.action(a, Role.BORROWER, "fund contract B"):
            self.w.transfer(a, b, self.u, collateral_B)
        with rec.action(b, Role.LENDER, "post collateral"):
            self.market.deposit(b, self.u, collateral_B)

    def loop(self, iterations: int) -> None:
        rec, a, b = self.rec, self.a, self.b
        for _ in range(iterations):
            with rec.action(b, Role.BORROWER, "borrow interest-bearing"):
                amt = self.market.max_borrow(b, self.ib)
                self.market.borrow(b, self.ib, amt)
                self.w.transfer(b, a, self.ib, amt)
            with rec.action(a, Role.LENDER, "re-supply"):
                self.market.deposit(a, self.ib, self.w.balance(a, self.ib))

    def pull_and_redeem(self) -> float:
        rec, a = self.rec, self.a
        with rec.action(a, Role.LENDER, "withdraw"):
            amt = self.market.max_withdraw(a, self.ib)
            self.market.withdraw(a, self.ib, amt)
        with rec.action(a, Role.YIELD_FARMER, "redeem"):
            self.vault.redeem(a, self.w.balance(a, self.ib))
        return amt

    def donate(self, amount: float) -> tuple[float, float]:
        before = self.vault.share_price
        with self.rec.action(self.a, Role.YIELD_FARMER, "donate"):
            after = self.vault.donate(self.a, amount)
        return before, after

    def drain(self, agent: str) -> None:
        with self.rec.action(agent, Role.BORROWER, "drain market"):
            for asset in self.other_assets():
                amt = self.market.max_borrow(agent, asset)
                if amt > 0:
                    self.market.borrow(agent, asset, amt)
            if agent != self.a:
                for asset, amt in sorted(self.w.holdings(agent).items()):
                    self.w.transfer(agent, self.a, asset, amt)

    def liquidate_b(self) -> int:
        """Recycle A's funds into liquidations of B until B is closed out."""
        rec, w, m, a, b = self.rec, self.w, self.market, self.a, self.b
        price = w.oracle.price
        count = 0
        while count < MAX_LIQUIDATIONS:
            coll = m.collateral(b, self.u)
            owed = m.debt(b, self.ib)
            if m.is_healthy(b) or coll <= 0.0 or owed <= 0.0:
                break
            cash_u = w.balance(a, self.u)
            if cash_u > 0:
                with rec.action(a, Role.YIELD_FARMER, "mint for liquidation"):
                    self.vault.mint(a, cash_u)
            cap = coll * price(self.u) * (1.0 - m.liq_incentive) / price(self.ib)
            amt = min(w.balance(a, self.ib), owed, cap)
            if amt <= 0.0:
                break
            with rec.action(a, Role.LIQUIDATOR, "liquidate contract B"):
                m.liquidate(a, b, self.ib, amt, seize_asset=self.u)
            count += 1
            spare = m.max_withdraw(a, self.ib)
            if spare > 0:
                with rec.action(a, Role.LENDER, "withdraw recycled"):
                    m.withdraw(a, self.ib, spare)
        return count

    def settle(self) -> None:
        rec, w, a, b = self.rec, self.w, self.a, self.b
        spare = self.market.max_withdraw(a, self.ib)
        if spare > 0:
            with rec.action(a, Role.LENDER, "withdraw remaining"):
                self.market.withdraw(a, self.ib, spare)
        if w.balance(a, self.ib) > 0:
            with rec.action(a, Role.YIELD_FARMER, "redeem remaining"):
                self.vault.redeem(a, w.balance(a, self.ib))
        if w.holdings(b):
            with rec.action(b, Role.BORROWER, "sweep contract B"):
                for asset, amt in sorted(w.holdings(b).items()):
                    w.transfer(b, a, asset, amt)
        with rec.action(a, Role.BORROWER, "repay flashloan"):
            self.flash.flash_repay(self.handle)
            self.handle = None


def _resolve(m: F.BDInputs, params: BDParams) -> tuple[F.BDFormula | None, str | None]:
    try:
        return F.bd_formula(m, params.init_mint, params.iter, params.enhanced), None
    except (InfeasibleParametersError, ZeroDivisionError) as exc:
        return None, str(exc)


def _run(world: World, params: BDParams, a: str, b: str) -> AttackReport:
    strategy = "bd-enhanced" if params.enhanced else "bd"
    reference = world.totals()
    inputs = bd_inputs_from_world(world)
    formula, why = _resolve(inputs, params)
    vault = world.vault
    # the closed forms assume the share token starts at a price of one underlying
    unit_price = vault.share_supply > 0 and math.isclose(vault.share_price, 1.0, rel_tol=1e-12)
    collateral_B = params.collateral_B if params.collateral_B is not None else (formula.collateral_B if formula else None)
    donate = params.donate if params.donate is not None else (formula.donate if formula else None)
    metrics: dict = {"inputs": asdict(inputs), "formula": asdict(formula) if formula else None}
    if why:
        metrics["formula_error"] = why
    for agent in (a, b):
        if not world.has_holder(agent):
            world.register_agent(agent)
    c = _Contracts(world, a, b)
    error = None
    liquidations = 0
    eps_measured = None
    if collateral_B is None or donate is None:
        error = f"InfeasibleParametersError: {why}"
    else:
        try:
            c.setup(params.init_mint, collateral_B, donate)
            c.loop(params.iter)
            if params.enhanced:
                c.drain(b)
            metrics["withdrawn_IB"] = c.pull_and_redeem()
            before, after = c.donate(donate)
            eps_measured = after / before
            if params.enhanced:
                liquidations = c.liquidate_b()
            else:
                c.drain(a)
            metrics["bad_debt_B"] = max(
                0.0, world.market.debt_value(b) - world.market.collateral_value(b)
            )
            c.settle()
        except SimulationError as exc:
            error = f"{type(exc).__name__}: {exc}"
    metrics["epsilon_measured"] = eps_measured
    metrics["epsilon_donation"] = (
        F.donation_factor(donate, inputs.supply_IB, inputs.borrowable_IB)
        if donate is not None and inputs.supply_IB > inputs.borrowable_IB
        else None
    )
    metrics["liquidations"] = liquidations
    metrics["bad_debt"] = world.market.bad_debt()
    metrics["B_healthy"] = world.market.is_healthy(b)
    if collateral_B is not None and donate is not None:
        metrics["flash_total"] = params.init_mint + collateral_B + donate
    uses_formula = params.collateral_B is None and params.donate is None
    closed_form = formula.profit if (formula and uses_formula and unit_price) else None
    report_params = {
        "init_mint": params.init_mint,
        "iter": params.iter,
        "collateral_B": collateral_B,
        "donate": donate,
        "enhanced": params.enhanced,
        "max_iter": params.max_iter,
    }
    report = finish(world, c.rec, strategy, report_params, reference, closed_form, {}, metrics, error)
    report.feasibility.setdefault("flash_repayable", error is None)
    report.feasibility["profitable"] = report.profit > 0.0
    return report


def bd_primitive_run(world: World, params: BDParams, a: str = "contract_A", b: str = "contract_B") -> AttackReport:
    if params.enhanced:
        raise ValueError("use bd_enhanced_run for the enhanced variant")
    return _run(world, params, a, b)


def bd_enhanced_run(world: World, params: BDParams, a: str = "contract_A", b: str = "contract_B") -> AttackReport:
    if not params.enhanced:
        params = BDParams(params.init_mint, params.iter, params.collateral_B, params.donate, True, params.max_iter)
    return _run(world, params, a, b)


__all__ = ["bd_inputs_from_world", "bd_primitive_run", "bd_enhanced_run"]
