"""LVR-rebate price moves and the pool-owned vault.

When a block producer moves the pool price, only a fraction ``1 - beta`` of
the full reserve swap goes through the producer; the pool then sheds enough
of its rich-side token into a side vault to land the price exactly on the
producer's target. The producer's arbitrage take is therefore capped at
``(1 - beta)`` of the full LVR opportunity, with equality when the target is
the external market price.

Vault holdings periodically re-enter the pool: the imbalance is converted at
the external price (an idealized arbitrageur takes the other side) and the
proceeds are deposited in a price-preserving ratio, so the pool constant
weakly increases at every re-entry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cfmm import Price, Reserves
from .errors import DomainError


@dataclass(frozen=True, slots=True)
class RebateSchedule:
    """Rebate fraction as a function of the update gap ``z = H - H_a``.

    v1 ships the linear shape: ``beta(z) = beta0 * (1 - z / z_max)`` for
    ``z < z_max`` and zero from ``z_max`` on. ``z_max = 0`` disables rebates
    entirely (``beta == 0`` everywhere), which reduces the protocol to a
    plain CFMM.
    """

    z_max: int
    beta0: float
    shape: str = "linear"

    def __post_init__(self):
        if self.shape != "linear":
            raise DomainError(f"unsupported rebate schedule shape {self.shape!r}")
        if not isinstance(self.z_max, int) or self.z_max < 0:
            raise DomainError(f"z_max must be a non-negative integer, got {self.z_max!r}")
        if not (0.0 <= self.beta0 < 1.0):
            raise DomainError(f"beta0 must lie in [0, 1), got {self.beta0!r}")
        if self.z_max > 0 and self.beta0 == 0.0:
            raise DomainError("beta0 must be > 0 when z_max > 0 (schedule must decrease)")

    def value_at(self, gap: int) -> float:
        if gap < 0:
            raise DomainError(f"update gap must be >= 0, got {gap!r}")
        if gap >= self.z_max:
            return 0.0
        return self.beta0 * (1.0 - gap / self.z_max)


#: Schedule that pays no rebate anywhere; the plain-CFMM fallback.
ZERO_REBATE = RebateSchedule(z_max=0, beta0=0.0)


def beta_at(schedule: RebateSchedule, gap: int) -> float:
    """Rebate fraction paid for an update with gap ``z = H - H_a``."""
    return schedule.value_at(gap)


@dataclass(slots=True)
class Vault:
    """Side account holding tokens shed by rebated moves.

    It only grows through ``apply_rebated_move`` deposits and only shrinks
    when ``vault_reenter`` folds it back into the pool.
    """

    x: float = 0.0
    y: float = 0.0

    def deposit(self, dx: float, dy: float):
        if dx < 0 or dy < 0:
            raise DomainError("vault deposits must be non-negative")
        self.x += dx
        self.y += dy

    @property
    def is_empty(self) -> bool:
        return self.x == 0.0 and self.y == 0.0

    def value_at(self, eps: float) -> float:
        return self.x + self.y * float(eps)


@dataclass(frozen=True, slots=True)
class RebatedMoveResult:
    """Outcome of one rebated price move.

    ``producer_flow`` is signed from the producer's point of view (positive
    components are received by the producer, negative are paid in).
    ``vault_deposit`` is the non-negative amount shed to the vault.
    """

    new_reserves: Reserves
    full_target: Reserves
    vault_deposit: tuple[float, float]
    producer_flow: tuple[float, float]
    rebate: float

    def producer_payoff_at(self, eps: float) -> float:
        fx, fy = self.producer_flow
        return fx + fy * float(eps)


def apply_rebated_move(curve, reserves: Reserves, target_price, rebate: float) -> RebatedMoveResult:
    """Move the pool price to ``target_price`` paying rebate fraction ``rebate``.

    The producer trades ``(1 - rebate)`` of the full reserve swap that would
    land the pool on ``target_price``; the price gap left by the partial move
    is closed by removing tokens from the rich side into the vault, so the
    post-move pool prices at exactly ``target_price``. The pool constant
    weakly drops (strictly, whenever the move is real and ``rebate > 0``).
    """
    tp = Price(target_price)
    if not (0.0 <= rebate < 1.0):
        raise DomainError(f"rebate fraction must lie in [0, 1), got {rebate!r}")
    p0 = curve.price(reserves)
    if tp == p0:
        return RebatedMoveResult(
            new_reserves=reserves,
            full_target=reserves,
            vault_deposit=(0.0, 0.0),
            producer_flow=(0.0, 0.0),
            rebate=rebate,
        )
    k = curve.invariant(reserves)
    full = curve.reserves_at_price(k, tp)
    dx = full.x - reserves.x
    dy = full.y - reserves.y
    keep = 1.0 - rebate
    mid_x = reserves.x + keep * dx
    mid_y = reserves.y + keep * dy
    if rebate == 0.0:
        new = Reserves(mid_x, mid_y)
        deposit = (0.0, 0.0)
    elif tp > p0:
        # Price rose: the partial move undershoots, y is the rich side.
        # The shed amount is mathematically non-negative; the max() guards
        # against one-ulp roundoff when the rebate is vanishingly small.
        new_y = curve.y_matching_price(tp, mid_x)
        deposit = (0.0, max(0.0, mid_y - new_y))
        new = Reserves(mid_x, new_y)
    else:
        new_x = curve.x_matching_price(tp, mid_y)
        deposit = (max(0.0, mid_x - new_x), 0.0)
        new = Reserves(new_x, mid_y)
    return RebatedMoveResult(
        new_reserves=new,
        full_target=full,
        vault_deposit=deposit,
        producer_flow=(-keep * dx, -keep * dy),
        rebate=rebate,
    )


def producer_arb_payoff(result: RebatedMoveResult, eps: float) -> float:
    """The producer's move payoff marked at external price ``eps``."""
    return result.producer_payoff_at(eps)


@dataclass(frozen=True, slots=True)
class ReentryResult:
    """Outcome of folding the vault back into the pool at price ``eps``.

    ``added`` is what lands in the pool; ``converter_flow`` is what the agent
    performing the conversion receives (signed, value zero at ``eps``).
    """

    new_reserves: Reserves
    added: tuple[float, float]
    converter_flow: tuple[float, float]


def vault_reenter(curve, reserves: Reserves, vault: Vault, eps: float) -> ReentryResult:
    """Convert the vault at ``eps`` and deposit it in an ``eps``-ratio split.

    The vault's total value ``v`` (at ``eps``) is split into equal-value
    halves ``(v/2, v/(2*eps))``, the shape of a price-preserving deposit for
    a pool sitting at price ``eps``. The conversion trades the imbalance at
    exactly ``eps``, so the converting agent's flow has zero value; the pool
    constant weakly increases. The vault is not mutated here — callers drain
    it when they route the token movements.
    """
    e = Price(eps)
    if vault.x < 0 or vault.y < 0:
        raise DomainError("vault holdings must be non-negative")
    v = vault.x + vault.y * e
    if v == 0.0:
        return ReentryResult(reserves, (0.0, 0.0), (0.0, 0.0))
    add_x = v / 2.0
    add_y = v / (2.0 * e)
    new = Reserves(reserves.x + add_x, reserves.y + add_y)
    return ReentryResult(
        new_reserves=new,
        added=(add_x, add_y),
        converter_flow=(vault.x - add_x, vault.y - add_y),
    )
