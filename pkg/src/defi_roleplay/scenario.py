"""YAML scenario files: validation, presets, fingerprinting and world construction."""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .amm import ConstantProductPool
from .envservices import FlashloanProvider, Oracle, PriceSource
from .errors import ScenarioError
from .lending import LendingMarket
from .vault import InterestBearingVault
from .world import AssetClass, World

PRESET_NAMES = ("bb_desk", "bd_desk", "agora_like", "lodestar_like")
STRATEGIES = ("bb", "bb-multi", "bd", "bd-enhanced")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PoolConfig(_Strict):
    stable: str
    manipulated: str
    L0: float | None = Field(default=None, gt=0.0)
    reserve_s: float | None = Field(default=None, gt=0.0)
    reserve_m: float | None = Field(default=None, gt=0.0)
    fee: float = Field(default=0.0, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _reserves(self) -> "PoolConfig":
        if self.L0 is None and (self.reserve_s is None or self.reserve_m is None):
            raise ValueError("give L0 or both reserve_s and reserve_m")
        if self.L0 is not None and (self.reserve_s is not None or self.reserve_m is not None):
            raise ValueError("give L0 or explicit reserves, not both")
        return self

    @property
    def reserves(self) -> tuple[float, float]:
        if self.L0 is not None:
            return self.L0, self.L0
        return self.reserve_s, self.reserve_m


class MarketConfig(_Strict):
    collateral_rates: dict[str, float]
    liq_incentive: float = Field(default=0.0, ge=0.0, lt=1.0)
    supply: dict[str, float] = Field(default_factory=dict)
    supplier: str = "lenders"

    @model_validator(mode="after")
    def _ranges(self) -> "MarketConfig":
        for asset, cr in self.collateral_rates.items():
            if not 0.0 <= cr <= 1.0:
                raise ValueError(f"collateral rate for {asset} is {cr}, must be within [0, 1]")
        for asset, amt in self.supply.items():
            if amt < 0:
                raise ValueError(f"supply of {asset} must be non-negative")
        return self


class VaultConfig(_Strict):
    share: str
    underlying: str
    supply: float = Field(gt=0.0)
    underlying_balance: float | None = Field(default=None, gt=0.0)
    holder: str = "lenders"


class FlashConfig(_Strict):
    fee: float = Field(default=0.0, ge=0.0, lt=1.0)
    liquidity: dict[str, float] = Field(default_factory=dict)


class PriceConfig(_Strict):
    kind: Literal["fixed", "amm_spot", "vault_price"]
    value: float = Field(default=1.0, gt=0.0)


class ScenarioConfig(_Strict):
    name: str
    description: str = ""
    assets: dict[str, AssetClass]
    agents: dict[str, dict[str, float]] = Field(default_factory=dict)
    pool: PoolConfig | None = None
    market: MarketConfig | None = None
    vault: VaultConfig | None = None
    flashloan: FlashConfig | None = None
    oracle: dict[str, PriceConfig] = Field(default_factory=dict)
    defaults: dict[str, dict[str, float | int | bool]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _references(self) -> "ScenarioConfig":
        known = set(self.assets)

        def need(asset: str, where: str) -> None:
            if asset not in known:
                raise ValueError(f"{where} refers to unknown asset {asset!r}")

        for agent, bals in self.agents.items():
            for asset, amt in bals.items():
                need(asset, f"agents.{agent}")
                if amt < 0:
                    raise ValueError(f"agents.{agent}.{asset} must be non-negative")
        if self.pool:
            need(self.pool.stable, "pool.stable")
            need(self.pool.manipulated, "pool.manipulated")
        if self.market:
            for asset in self.market.collateral_rates:
                need(asset, "market.collateral_rates")
            for asset in self.market.supply:
                need(asset, "market.supply")
        if self.vault:
            need(self.vault.share, "vault.share")
            need(self.vault.underlying, "vault.underlying")
            if self.market and self.market.supply.get(self.vault.share, 0.0) > 0.0:
                if self.market.supply[self.vault.share] > self.vault.supply:
                    raise ValueError("market.supply of the share token exceeds vault.supply")
                if self.market.supplier != self.vault.holder:
                    raise ValueError("market.supplier must be vault.holder when supplying the share token")
        if self.flashloan:
            for asset in self.flashloan.liquidity:
                need(asset, "flashloan.liquidity")
        for asset, src in self.oracle.items():
            need(asset, "oracle")
            if src.kind == "amm_spot" and (self.pool is None or self.pool.manipulated != asset):
                raise ValueError(f"oracle.{asset}: amm_spot needs a pool whose manipulated side is {asset}")
            if src.kind == "vault_price" and (self.vault is None or self.vault.share != asset):
                raise ValueError(f"oracle.{asset}: vault_price needs a vault issuing {asset}")
        for strategy in self.defaults:
            if strategy not in STRATEGIES:
                raise ValueError(f"defaults.{strategy}: unknown strategy")
        return self

    def price_sources(self) -> dict[str, PriceSource]:
        out: dict[str, PriceSource] = {}
        for asset, cls in self.assets.items():
            if asset in self.oracle:
                src = self.oracle[asset]
                out[asset] = PriceSource(src.kind, src.value)
            elif cls == AssetClass.MANIPULATED and self.pool and self.pool.manipulated == asset:
                out[asset] = PriceSource("amm_spot")
            elif cls == AssetClass.INTEREST_BEARING and self.vault and self.vault.share == asset:
                out[asset] = PriceSource("vault_price")
            elif cls in (AssetClass.STABLE, AssetClass.UNDERLYING):
                out[asset] = PriceSource.fixed(1.0)
        return out


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"field {loc}: {err['msg']}")
    return "; ".join(parts)


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else "?"
        raise ScenarioError(f"{source}: parse error at line {line}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(f"{source}: {_format_validation(exc)}") from exc


def preset_text(name: str) -> str:
    return resources.files("defi_roleplay.presets").joinpath(f"{name}.yaml").read_text()


def load_incidents() -> dict:
    """Shipped incident metadata: per-incident losses and roles plus the reported total."""
    data = yaml.safe_load(preset_text("incidents"))
    total = sum(float(row["loss_usd"]) for row in data["incidents"])
    return {**data, "computed_total_usd": total}


def load_scenario(path_or_preset: str | Path) -> ScenarioConfig:
    """Load a scenario from a file path, or from a shipped preset by bare name."""
    p = Path(path_or_preset)
    if p.exists():
        return parse_scenario(p.read_text(), str(p))
    name = str(path_or_preset)
    if name in PRESET_NAMES:
        return parse_scenario(preset_text(name), name)
    raise ScenarioError(f"no scenario file or preset named {name!r}")


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json", exclude_none=True), sort_keys=False)


def canonical_json(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def fingerprint(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def require_for(cfg: ScenarioConfig, strategy: str) -> None:
    """Fail with a message naming the missing section if ``strategy`` cannot run."""
    if strategy not in STRATEGIES:
        raise ScenarioError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    missing = []
    if strategy.startswith("bb"):
        missing += [s for s in ("pool", "market") if getattr(cfg, s) is None]
        if strategy == "bb-multi" and cfg.flashloan is None:
            missing.append("flashloan")
    else:
        missing += [s for s in ("vault", "market", "flashloan") if getattr(cfg, s) is None]
    if missing:
        raise ScenarioError(f"strategy {strategy} needs section(s): {', '.join(missing)}")
    if strategy.startswith("bd"):
        src = cfg.price_sources().get(cfg.vault.underlying)
        if src is None or src.kind != "fixed" or src.value != 1.0:
            raise ScenarioError("field oracle: the vault underlying must be priced fixed at 1")


def build_world(cfg: ScenarioConfig) -> World:
    w = World()
    for asset, cls in cfg.assets.items():
        w.register_asset(asset, cls)
    holders = list(cfg.agents)
    for extra in (cfg.market.supplier if cfg.market else None, cfg.vault.holder if cfg.vault else None):
        if extra and extra not in holders:
            holders.append(extra)
    for agent in holders:
        w.register_agent(agent)
    for agent, bals in cfg.agents.items():
        for asset, amt in bals.items():
            w.credit(agent, asset, amt)

    if cfg.pool:
        pool = w.attach("pool", ConstantProductPool(cfg.pool.stable, cfg.pool.manipulated, cfg.pool.fee))
        rs, rm = cfg.pool.reserves
        w.credit(pool.holder, pool.asset_s, rs)
        w.credit(pool.holder, pool.asset_m, rm)
    if cfg.vault:
        v = cfg.vault
        vault = w.attach("vault", InterestBearingVault(v.share, v.underlying))
        vault.seed(v.holder, v.supply, v.underlying_balance if v.underlying_balance is not None else v.supply)
    if cfg.flashloan:
        flash = w.attach("flash", FlashloanProvider(cfg.flashloan.fee))
        for asset, amt in cfg.flashloan.liquidity.items():
            w.credit(flash.holder, asset, amt)
    w.oracle = Oracle(cfg.price_sources())
    w.oracle.world = w
    if cfg.market:
        mk = cfg.market
        market = w.attach("market", LendingMarket(mk.collateral_rates, mk.liq_incentive))
        share = cfg.vault.share if cfg.vault else None
        for asset, amt in mk.supply.items():
            if amt <= 0:
                continue
            if asset != share:
                w.credit(mk.supplier, asset, amt)
            market.deposit(mk.supplier, asset, amt)
    return w
