"""Stochastic drivers and agent behavior: price process, user flow, producer.

Every function takes an explicit numpy Generator; the simulation hands each
agent its own named stream so runs are reproducible and adding draws to one
agent never perturbs another.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import Order, OrderSide
from .cfmm import Reserves
from .config import FlowModel, ProducerModel
from .rebate import RebateSchedule, apply_rebated_move


@dataclass(slots=True)
class PriceProcess:
    """Log-normal multiplicative walk; a martingale when drift is zero."""

    eps: float
    sigma: float
    drift: float = 0.0

    def step(self, rng: np.random.Generator) -> float:
        z = rng.standard_normal()
        self.eps *= math.exp(self.drift - 0.5 * self.sigma**2 + self.sigma * z)
        return self.eps

    def sample_factors(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n independent one-step multiplicative factors."""
        z = rng.standard_normal(n)
        return np.exp(self.drift - 0.5 * self.sigma**2 + self.sigma * z)


def gen_user_orders(
    rng: np.random.Generator,
    flow: FlowModel,
    eps: float,
    max_x: float,
    max_y: float,
    owner: str = "users",
) -> list[Order]:
    """Draw one block of user orders at external price ``eps``.

    Sides are value-symmetric: each order first draws a value in x units,
    then sells x (size = value) or y (size = value / eps) with equal
    probability, so the expected signed value imbalance is zero.
    """
    if flow.arrival <= 0:
        return []
    n = int(rng.poisson(flow.arrival))
    cap = flow.value_frac * min(max_x, max_y * eps)
    orders = []
    for _ in range(n):
        sells_x = rng.random() < 0.5
        value = cap * rng.random()
        if value <= 0.0:
            continue
        limit = None
        if flow.limit_prob > 0 and rng.random() < flow.limit_prob:
            limit = eps * (1.0 + flow.limit_width * rng.uniform(-1.0, 1.0))
        if sells_x:
            orders.append(Order(OrderSide.BUY_Y, value, limit, owner))
        else:
            orders.append(Order(OrderSide.SELL_Y, value / eps, limit, owner))
    return orders


def aggregate_market_flow(
    rng: np.random.Generator,
    flow: FlowModel,
    eps: float,
    max_x: float,
    max_y: float,
    trials: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-trial aggregate market flow (x sold, y sold).

    Matches the distribution of ``gen_user_orders`` with all-market flow;
    used by Monte Carlo utility estimates where order identity is
    irrelevant and only batch totals matter.
    """
    counts = rng.poisson(flow.arrival, size=trials)
    total = int(counts.sum())
    dx = np.zeros(trials)
    dy = np.zeros(trials)
    if total == 0:
        return dx, dy
    cap = flow.value_frac * min(max_x, max_y * eps)
    sells_x = rng.random(total) < 0.5
    values = cap * rng.random(total)
    trial = np.repeat(np.arange(trials), counts)
    np.add.at(dx, trial[sells_x], values[sells_x])
    np.add.at(dy, trial[~sells_x], values[~sells_x] / eps)
    return dx, dy


def producer_utility(
    curve,
    reserves: Reserves,
    eps: float,
    schedule: RebateSchedule,
    max_x: float,
    max_y: float,
    multiplier: float,
    alpha: float,
    flow_dx: np.ndarray | None = None,
    flow_dy: np.ndarray | None = None,
) -> float:
    """Expected per-block producer payoff for one strategy grid point.

    The producer updates at gap zero to ``multiplier * eps`` and optionally
    self-trades ``alpha`` of the per-order bound in its own batch (selling y
    when the target is above the external price, buying otherwise). The
    price-move leg is exact; the self-trade leg is averaged over the given
    per-trial user flow aggregates, which callers share across grid points
    so comparisons are paired. Fixed update costs are omitted: they are
    constant across the grid.
    """
    beta = schedule.value_at(0)
    move = apply_rebated_move(curve, reserves, multiplier * eps, beta)
    term1 = move.producer_payoff_at(eps)
    if alpha <= 0.0:
        return term1
    if flow_dx is None or flow_dy is None:
        raise ValueError("self-trade utility needs sampled flow aggregates")
    snap = move.new_reserves
    if multiplier >= 1.0:
        size = alpha * max_y
        p_e = (snap.x + flow_dx) / (snap.y + flow_dy + size)
        pnl = size * (p_e - eps)
    else:
        size = alpha * max_x
        p_e = (snap.x + flow_dx + size) / (snap.y + flow_dy)
        pnl = size * (eps / p_e - 1.0)
    return term1 + float(np.mean(pnl))


def choose_inserts(
    rng: np.random.Generator, pending_ids, censor_rate: float
) -> list[int]:
    """Which mempool commitments the producer writes into this block."""
    ids = sorted(pending_ids)
    if censor_rate <= 0.0 or not ids:
        return ids
    keep = rng.random(len(ids)) >= censor_rate
    return [i for i, k in zip(ids, keep) if k]


def price_target(producer: ProducerModel, eps: float, prev_eps: float) -> float:
    if producer.price_policy == "external":
        return eps
    if producer.price_policy == "offset":
        return eps * producer.price_offset
    return prev_eps


def decide_update(
    producer: ProducerModel,
    schedule: RebateSchedule,
    curve,
    reserves: Reserves,
    height: int,
    last_label: int,
    eps: float,
    prev_eps: float,
) -> tuple[int, float] | None:
    """Producer's update decision: ``(allocation_height, target_price)`` or None.

    ``always`` updates every block at gap zero. ``best_response`` models a
    producer facing per-block competition: any backdated allocation height
    would already have been claimed by a rival, so the only uncontested
    label is the current block, and it is taken whenever the kept fraction
    of the full arbitrage value covers the update cost. ``threshold`` is the
    uncontested monopolist: it backdates as far as the schedule rewards and
    only moves once the kept fraction reaches ``min_keep`` (at 1.0, it waits
    out the rebate entirely and updates at the schedule horizon).
    """
    if producer.update_policy == "never":
        return None
    target = price_target(producer, eps, prev_eps)
    if producer.update_policy == "always":
        return height, target
    if producer.update_policy == "best_response":
        label = height
    else:
        label = max(last_label + 1, height - schedule.z_max)
    keep = 1.0 - schedule.value_at(height - label)
    if producer.update_policy == "threshold" and keep < producer.min_keep:
        return None
    k = curve.invariant(reserves)
    full = curve.reserves_at_price(k, target)
    value = (reserves.x - full.x) + (reserves.y - full.y) * eps
    if keep * value < producer.update_cost:
        return None
    return label, target
