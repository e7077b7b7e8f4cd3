"""Scenario configuration: typed, validated, JSON round-trippable.

A scenario pins everything a simulation run depends on except the seed, so a
(scenario, seed) pair is fully reproducible. Unknown keys are rejected
rather than ignored — silent typos in experiment configs are worse than a
loud failure.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .cfmm import CURVES
from .errors import ConfigError
from .rebate import RebateSchedule

SCHEMA_VERSION = 1

UPDATE_POLICIES = ("always", "never", "best_response", "threshold")
PRICE_POLICIES = ("external", "offset", "stale")


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True, slots=True)
class PriceModel:
    """Multiplicative log-normal walk for the external market price.

    With ``drift == 0`` the walk is a martingale: each step multiplies by
    ``exp(sigma * Z - sigma^2 / 2)``.
    """

    initial: float = 100.0
    sigma: float = 0.02
    drift: float = 0.0

    def validate(self):
        _require(self.initial > 0, "price.initial must be > 0")
        _require(self.sigma >= 0, "price.sigma must be >= 0")


@dataclass(frozen=True, slots=True)
class FlowModel:
    """User order flow: Poisson arrivals with value-symmetric sides.

    Each order draws a value uniform on ``(0, value_frac * cap]`` where
    ``cap = min(max_x, max_y * eps)``, then sells x or y with equal
    probability — so the expected signed value imbalance is zero at any
    external price. ``limit_prob`` of orders carry a limit within
    ``limit_width`` (relative) of the external price; ``no_reveal_prob`` of
    committed orders are never revealed and burn their collateral.
    """

    arrival: float = 0.0
    limit_prob: float = 0.0
    limit_width: float = 0.01
    value_frac: float = 1.0
    no_reveal_prob: float = 0.0

    def validate(self):
        _require(self.arrival >= 0, "flow.arrival must be >= 0")
        _require(0 <= self.limit_prob <= 1, "flow.limit_prob must lie in [0, 1]")
        _require(self.limit_width >= 0, "flow.limit_width must be >= 0")
        _require(0 < self.value_frac <= 1, "flow.value_frac must lie in (0, 1]")
        _require(0 <= self.no_reveal_prob <= 1, "flow.no_reveal_prob must lie in [0, 1]")


@dataclass(frozen=True, slots=True)
class ProducerModel:
    """Block producer behavior.

    ``update_policy`` decides when an update transaction is sent and which
    allocation height it carries; ``price_policy`` picks the target price
    (the external price, a multiplicative offset of it, or the previous
    block's — a stale oracle). ``self_trade_alpha`` sizes the producer's own
    order flow relative to the per-order bounds, ``censor_rate`` drops
    pending commitments from insertion, ``update_cost`` is the fixed cost of
    sending an update, and ``min_keep`` is the threshold policy's minimum
    acceptable kept fraction ``1 - beta``.
    """

    update_policy: str = "always"
    price_policy: str = "external"
    price_offset: float = 1.0
    self_trade_alpha: float = 0.0
    censor_rate: float = 0.0
    update_cost: float = 0.0
    min_keep: float = 1.0
    budget_x: float = 100_000.0
    budget_y: float = 1_000.0

    def validate(self):
        _require(self.update_policy in UPDATE_POLICIES,
                 f"producer.update_policy must be one of {UPDATE_POLICIES}")
        _require(self.price_policy in PRICE_POLICIES,
                 f"producer.price_policy must be one of {PRICE_POLICIES}")
        _require(self.price_offset > 0, "producer.price_offset must be > 0")
        _require(self.self_trade_alpha >= 0, "producer.self_trade_alpha must be >= 0")
        _require(0 <= self.censor_rate <= 1, "producer.censor_rate must lie in [0, 1]")
        _require(self.update_cost >= 0, "producer.update_cost must be >= 0")
        _require(0 <= self.min_keep <= 1, "producer.min_keep must lie in [0, 1]")
        _require(self.budget_x >= 0 and self.budget_y >= 0, "producer budgets must be >= 0")


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    name: str = "default"
    blocks: int = 200
    pool_x: float = 10_000.0
    pool_y: float = 100.0
    curve: str = "constant_product"
    z_max: int = 4
    beta0: float = 0.8
    max_x: float = 10.0
    max_y: float = 0.1
    reveal_window: int = 2
    conversion_frequency: int = 5
    record_events: bool = False
    user_budget_x: float = 100_000.0
    user_budget_y: float = 1_000.0
    price: PriceModel = field(default_factory=PriceModel)
    flow: FlowModel = field(default_factory=FlowModel)
    producer: ProducerModel = field(default_factory=ProducerModel)

    def validate(self) -> "ScenarioConfig":
        _require(bool(self.name), "name must be non-empty")
        _require(self.blocks > 0, "blocks must be > 0")
        _require(self.pool_x > 0 and self.pool_y > 0, "pool reserves must be > 0")
        _require(self.curve in CURVES, f"curve must be one of {sorted(CURVES)}")
        _require(isinstance(self.z_max, int) and self.z_max >= 0,
                 "rebate.z_max must be a non-negative integer")
        _require(0 <= self.beta0 < 1, "rebate.beta0 must lie in [0, 1)")
        _require((self.z_max > 0) == (self.beta0 > 0),
                 "rebate.beta0 must be > 0 exactly when rebate.z_max > 0")
        _require(self.max_x > 0 and self.max_y > 0, "order bounds must be > 0")
        _require(self.reveal_window >= 0, "reveal_window must be >= 0")
        _require(self.conversion_frequency >= 0, "conversion_frequency must be >= 0")
        _require(self.user_budget_x >= 0 and self.user_budget_y >= 0,
                 "user budgets must be >= 0")
        self.price.validate()
        self.flow.validate()
        self.producer.validate()
        return self

    def rebate_schedule(self) -> RebateSchedule:
        return RebateSchedule(z_max=self.z_max, beta0=self.beta0)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "name": cfg.name,
        "blocks": cfg.blocks,
        "pool": {"x": cfg.pool_x, "y": cfg.pool_y},
        "curve": cfg.curve,
        "rebate": {"z_max": cfg.z_max, "beta0": cfg.beta0},
        "bounds": {"max_x": cfg.max_x, "max_y": cfg.max_y},
        "reveal_window": cfg.reveal_window,
        "conversion_frequency": cfg.conversion_frequency,
        "record_events": cfg.record_events,
        "users": {"budget_x": cfg.user_budget_x, "budget_y": cfg.user_budget_y},
        "price": asdict(cfg.price),
        "flow": asdict(cfg.flow),
        "producer": asdict(cfg.producer),
    }


def _section(raw: dict, key: str, cls):
    sub = raw.pop(key, None)
    if sub is None:
        return cls()
    _require(isinstance(sub, dict), f"{key} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(sub) - allowed
    _require(not unknown, f"unknown keys in {key}: {sorted(unknown)}")
    try:
        return cls(**sub)
    except TypeError as e:
        raise ConfigError(f"bad {key} section: {e}") from None


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    raw = dict(raw)
    version = raw.pop("version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, f"unsupported scenario version {version!r}")
    pool = raw.pop("pool", {})
    rebate = raw.pop("rebate", {})
    bounds = raw.pop("bounds", {})
    users = raw.pop("users", {})
    for label, sub, keys in (
        ("pool", pool, {"x", "y"}),
        ("rebate", rebate, {"z_max", "beta0"}),
        ("bounds", bounds, {"max_x", "max_y"}),
        ("users", users, {"budget_x", "budget_y"}),
    ):
        _require(isinstance(sub, dict), f"{label} must be an object")
        unknown = set(sub) - keys
        _require(not unknown, f"unknown keys in {label}: {sorted(unknown)}")
    price = _section(raw, "price", PriceModel)
    flow = _section(raw, "flow", FlowModel)
    producer = _section(raw, "producer", ProducerModel)
    top = {
        "name": raw.pop("name", "default"),
        "blocks": raw.pop("blocks", 200),
        "curve": raw.pop("curve", "constant_product"),
        "reveal_window": raw.pop("reveal_window", 2),
        "conversion_frequency": raw.pop("conversion_frequency", 5),
        "record_events": raw.pop("record_events", False),
    }
    _require(not raw, f"unknown scenario keys: {sorted(raw)}")
    cfg = ScenarioConfig(
        pool_x=pool.get("x", 10_000.0),
        pool_y=pool.get("y", 100.0),
        z_max=rebate.get("z_max", 4),
        beta0=rebate.get("beta0", 0.8),
        max_x=bounds.get("max_x", 10.0),
        max_y=bounds.get("max_y", 0.1),
        user_budget_x=users.get("budget_x", 100_000.0),
        user_budget_y=users.get("budget_y", 1_000.0),
        price=price,
        flow=flow,
        producer=producer,
        **top,
    )
    return cfg.validate()


def scenario_to_json(cfg: ScenarioConfig) -> str:
    return json.dumps(scenario_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path!r}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"scenario {path!r} is not valid JSON: {e}") from None
    return scenario_from_dict(raw)


def builtin_scenarios() -> dict[str, ScenarioConfig]:
    """Named scenario presets usable anywhere a scenario file is."""
    base = dict(pool_x=10_000.0, pool_y=100.0, max_x=10.0, max_y=0.1)
    scenarios = [
        ScenarioConfig(
            name="default",
            blocks=200,
            flow=FlowModel(arrival=2.0, limit_prob=0.3, limit_width=0.02,
                           no_reveal_prob=0.02),
            **base,
        ),
        # Rebate capture with no user flow: every block is a pure
        # arbitrage update, so the kept fraction is cleanly measurable.
        # Short conversion windows keep the vault's mark-to-market noise
        # from drowning the ratio statistic.
        ScenarioConfig(name="lvr", blocks=500, conversion_frequency=2, **base),
        # Zero-rebate schedule: the protocol degenerates to a plain CFMM.
        ScenarioConfig(
            name="fallback",
            blocks=200,
            z_max=0,
            beta0=0.0,
            flow=FlowModel(arrival=2.0, limit_prob=0.3, limit_width=0.02,
                           no_reveal_prob=0.02),
            **base,
        ),
        # Heavy market-order flow for execution-price statistics.
        ScenarioConfig(
            name="neutrality",
            blocks=3000,
            flow=FlowModel(arrival=4.0),
            **base,
        ),
        # Competitive producer deciding each block whether updating pays.
        ScenarioConfig(
            name="equilibrium",
            blocks=200,
            flow=FlowModel(arrival=1.0),
            producer=ProducerModel(update_policy="best_response", update_cost=2e-6),
            **base,
        ),
        # Grid parameters for the strategy sweep; blocks unused there.
        ScenarioConfig(
            name="dominance",
            blocks=100,
            beta0=0.5,
            flow=FlowModel(arrival=4.0),
            **base,
        ),
        # A producer that refuses to share: waits out the schedule and
        # updates only when the rebate has decayed to zero.
        ScenarioConfig(
            name="monopolist",
            blocks=300,
            flow=FlowModel(arrival=1.0),
            producer=ProducerModel(update_policy="threshold", min_keep=1.0),
            **base,
        ),
    ]
    return {cfg.name: cfg.validate() for cfg in scenarios}
