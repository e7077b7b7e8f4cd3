"""Allocation pools and uniform-price batch settlement.

An allocation pool is the escrow a batch of committed orders executes
against. It is funded at creation with enough of both tokens to pay out the
worst case — ``count`` orders all selling the same side at their maximum
size — priced at the pool price ``p`` frozen when the batch was allocated:

    (count * max_y * p,  count * max_x / p)

The producer funds a ``producer_fraction`` share of that escrow and the pool
reserves back the remainder.

Settlement replicates what batch-executing the revealed orders directly
against the pool snapshot would do. For market orders on a constant-product
snapshot the clearing price has the closed form

    p_e = (R_x + delta_x) / (R_y + delta_y)

and the pool's net trade is the chord of the level curve at slope ``p_e``,
so applying the pool delta to the snapshot preserves the invariant exactly.
Limit orders generalize this to a uniform-price auction: executable demand
and supply at a candidate price come from orders whose limits admit it plus
the snapshot curve's chord liquidity, the clearing price is the unique point
balancing the two (marginal orders filled pro-rata), and that point is also
the volume maximizer since demand falls and supply rises in price.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .cfmm import Price, Reserves
from .errors import DomainError, FundingError

# Relative tolerance used when checking a proposed clearing price.
CLEARING_RTOL = 1e-9


class OrderSide(enum.Enum):
    """BUY_Y sells token x for y; SELL_Y sells token y for x."""

    BUY_Y = "buy_y"
    SELL_Y = "sell_y"


@dataclass(frozen=True, slots=True)
class Order:
    """A revealed order: side, size in the sold token, optional limit.

    The limit is a price in x per y. A BUY_Y order executes at clearing
    prices up to its limit, a SELL_Y order at prices down to its limit;
    ``limit=None`` is a market order.
    """

    side: OrderSide
    size: float
    limit: float | None = None
    owner: str | None = None

    def __post_init__(self):
        if not (math.isfinite(self.size) and self.size > 0.0):
            raise DomainError(f"order size must be finite and > 0, got {self.size!r}")
        if self.limit is not None:
            object.__setattr__(self, "limit", float(Price(self.limit)))

    @property
    def sells_token(self) -> str:
        return "x" if self.side is OrderSide.BUY_Y else "y"


@dataclass(frozen=True, slots=True)
class Fill:
    """Executed part of one order: what it sold and what it received."""

    index: int
    sold: float
    bought: float


@dataclass(frozen=True, slots=True)
class Settlement:
    """Uniform-price batch outcome against a pool snapshot.

    ``pool_delta`` is signed into the pool's residual position: applying it
    to the snapshot reserves lands back on the same level curve.
    ``volume_y`` counts executed order quantity in y units (both sides).
    """

    price: float
    pool_delta: tuple[float, float]
    fills: tuple[Fill, ...]
    volume_y: float


def allocation_bound(curve, reserves: Reserves, max_x: float, max_y: float) -> tuple[float, float]:
    """Worst-case per-batch outflow if orders executed directly on the curve.

    Returns ``(lambda_x, lambda_y)``: the x the pool pays against a max-size
    y sale and the y it pays against a max-size x sale. Serves as the
    solvency certificate for order bounds; escrow funding itself uses
    ``escrow_size``.
    """
    if not (max_x > 0.0 and max_y > 0.0):
        raise DomainError("order bounds must be > 0")
    k = curve.invariant(reserves)
    lam_y = reserves.y - curve.y_given_x(k, reserves.x + max_x)
    lam_x = reserves.x - curve.x_given_y(k, reserves.y + max_y)
    if lam_x >= reserves.x or lam_y >= reserves.y:
        raise DomainError("order bounds exhaust the pool reserves")
    return lam_x, lam_y


def escrow_size(count: int, price, max_x: float, max_y: float) -> tuple[float, float]:
    """Escrow that covers ``count`` one-sided max-size orders at price ``price``."""
    p = Price(price)
    if count < 0:
        raise DomainError("order count must be >= 0")
    if not (max_x > 0.0 and max_y > 0.0):
        raise DomainError("order bounds must be > 0")
    return count * max_y * p, count * max_x / p


@dataclass(slots=True)
class AllocationPool:
    """Escrow for one allocated batch.

    ``x``/``y`` track the bookkeeping reserves (initial escrow plus routed
    settlement flows); ``producer_x``/``producer_y`` is the producer-funded
    share physically held by the escrow, the remainder being an earmark
    against the pool reserves. ``snapshot`` is the pool reserve point the
    batch replicates against, frozen at allocation time.
    """

    label: int
    created_at: int
    price: float
    count: int
    producer_fraction: float
    snapshot: Reserves
    x: float
    y: float
    producer_x: float
    producer_y: float
    producer: str
    oct_ids: list[int] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return self.count == 0


def create_allocation_pool(
    count: int,
    price,
    max_x: float,
    max_y: float,
    producer_fraction: float,
    snapshot: Reserves,
    *,
    label: int,
    created_at: int,
    producer: str,
    pool_reserves: Reserves | None = None,
) -> AllocationPool:
    """Build and size the escrow for a batch of ``count`` orders.

    The producer funds ``producer_fraction`` of the escrow; the rest is
    backed by the pool. When ``pool_reserves`` is given, the pool-backed
    share is checked against it. ``count == 0`` yields an empty pool (the
    update was pure arbitrage).
    """
    if not (0.0 <= producer_fraction < 1.0):
        raise DomainError(f"producer fraction must lie in [0, 1), got {producer_fraction!r}")
    ex, ey = escrow_size(count, price, max_x, max_y)
    pool_share = 1.0 - producer_fraction
    if pool_reserves is not None and (
        pool_share * ex > pool_reserves.x or pool_share * ey > pool_reserves.y
    ):
        raise FundingError(
            f"pool reserves cannot back the escrow share ({pool_share * ex!r}, {pool_share * ey!r})"
        )
    return AllocationPool(
        label=label,
        created_at=created_at,
        price=float(Price(price)),
        count=count,
        producer_fraction=producer_fraction,
        snapshot=snapshot,
        x=ex,
        y=ey,
        producer_x=producer_fraction * ex,
        producer_y=producer_fraction * ey,
        producer=producer,
    )


def settle_market_batch(curve, snapshot: Reserves, delta_x: float, delta_y: float) -> Settlement:
    """Settle aggregate market flow (x sold, y sold) against the snapshot.

    Closed form for the constant-product snapshot; both imbalance directions
    reduce to the same expressions. Zero flow clears at the snapshot price
    with an untouched pool.
    """
    if delta_x < 0 or delta_y < 0:
        raise DomainError("aggregate sold amounts must be >= 0")
    if delta_x == 0.0 and delta_y == 0.0:
        return Settlement(
            price=float(curve.price(snapshot)), pool_delta=(0.0, 0.0), fills=(), volume_y=0.0
        )
    p_e = (snapshot.x + delta_x) / (snapshot.y + delta_y)
    pool_dx = delta_x - delta_y * p_e
    pool_dy = delta_y - delta_x / p_e
    return Settlement(
        price=p_e,
        pool_delta=(pool_dx, pool_dy),
        fills=(),
        volume_y=delta_x / p_e + delta_y,
    )


# --- uniform-price clearing with limit orders --------------------------------


def _classify(orders):
    """Split into (buys, sells) of (index, size, limit) with limit=None markets."""
    buys, sells = [], []
    for i, o in enumerate(orders):
        if o.side is OrderSide.BUY_Y:
            buys.append((i, o.size, o.limit))
        else:
            sells.append((i, o.size, o.limit))
    return buys, sells


def _fills_from_fractions(orders, frac, p):
    fills = []
    sold_x = sold_y = 0.0
    for i, o in enumerate(orders):
        f = frac[i]
        if f <= 0.0:
            continue
        amt = f * o.size
        if o.side is OrderSide.BUY_Y:
            fills.append(Fill(index=i, sold=amt, bought=amt / p))
            sold_x += amt
        else:
            fills.append(Fill(index=i, sold=amt, bought=amt * p))
            sold_y += amt
    return tuple(fills), sold_x, sold_y


def _settlement_at(curve, snapshot, orders, p, rtol=CLEARING_RTOL):
    """Try to clear the batch at uniform price ``p``.

    Infra-marginal orders (limits strictly admitting ``p``, and markets) must
    fill fully; orders with limit exactly ``p`` may fill pro-rata so that the
    pool's net trade is exactly the level-curve chord at ``p``. Returns the
    Settlement, or None when no fill fractions in [0, 1] balance the batch.
    """
    buys, sells = _classify(orders)
    in_x = sum(s for _, s, lim in buys if lim is None or lim > p)
    marg_b = [(i, s) for i, s, lim in buys if lim is not None and lim == p]
    in_y = sum(s for _, s, lim in sells if lim is None or lim < p)
    marg_s = [(i, s) for i, s, lim in sells if lim is not None and lim == p]
    mb = sum(s for _, s in marg_b)
    ms = sum(s for _, s in marg_s)
    chord = curve.chord_y(snapshot, p)
    scale = max(snapshot.y, abs(chord), (in_x + mb) / p, in_y + ms, 1e-30)
    tol = rtol * scale

    # Net y demand minus supply with all marginals included, versus the chord.
    gap = (in_x + mb) / p - (in_y + ms) - chord
    phi_b = phi_s = 1.0
    if abs(gap) <= tol:
        pass
    elif gap > 0.0:
        if mb <= 0.0:
            return None
        phi_b = (p * (in_y + ms + chord) - in_x) / mb
        if phi_b < -rtol or phi_b > 1.0 + rtol:
            return None
        phi_b = min(max(phi_b, 0.0), 1.0)
    else:
        if ms <= 0.0:
            return None
        phi_s = ((in_x + mb) / p - chord) - in_y
        phi_s /= ms
        if phi_s < -rtol or phi_s > 1.0 + rtol:
            return None
        phi_s = min(max(phi_s, 0.0), 1.0)

    frac = [0.0] * len(orders)
    for i, _, lim in buys:
        if lim is None or lim > p:
            frac[i] = 1.0
    for i, _ in marg_b:
        frac[i] = phi_b
    for i, _, lim in sells:
        if lim is None or lim < p:
            frac[i] = 1.0
    for i, _ in marg_s:
        frac[i] = phi_s
    fills, sold_x, sold_y = _fills_from_fractions(orders, frac, p)
    pool_dx = sold_x - sold_y * p
    pool_dy = sold_y - sold_x / p
    return Settlement(
        price=p,
        pool_delta=(pool_dx, pool_dy),
        fills=fills,
        volume_y=sold_x / p + sold_y,
    )


def clearing_price_with_limits(curve, snapshot: Reserves, orders) -> Settlement:
    """Uniform-price, volume-maximizing clearing against the snapshot curve.

    Net executable user demand falls in price, the snapshot chord liquidity
    rises, so their crossing is unique; between consecutive limit prices it
    has the same closed form as the all-market batch, and at a limit price
    the marginal orders' pro-rata fraction closes the gap. An empty batch
    clears at the snapshot price with zero volume.
    """
    orders = list(orders)
    p0 = float(curve.price(snapshot))
    buys, sells = _classify(orders)
    bounds = sorted({lim for _, _, lim in buys + sells if lim is not None})
    edges = [0.0] + bounds + [math.inf]
    for j in range(len(edges) - 1):
        lo, hi = edges[j], edges[j + 1]
        # Executable sets are constant strictly inside (lo, hi).
        x_in = sum(s for _, s, lim in buys if lim is None or lim >= hi)
        y_in = sum(s for _, s, lim in sells if lim is None or lim <= lo)
        p_star = (snapshot.x + x_in) / (snapshot.y + y_in)
        if lo < p_star < hi:
            settled = _settlement_at(curve, snapshot, orders, p_star)
            if settled is not None:
                return settled
        if math.isfinite(hi):
            settled = _settlement_at(curve, snapshot, orders, hi)
            if settled is not None:
                return settled
    # Unreachable for well-formed inputs: the crossing always exists.
    raise DomainError("no consistent uniform clearing price found")


def clearing_volume_at(curve, snapshot: Reserves, orders, p) -> float | None:
    """Executed order volume (y units) when clearing at ``p``, or None."""
    settled = _settlement_at(curve, snapshot, list(orders), float(Price(p)))
    return None if settled is None else settled.volume_y


def verify_clearing_price(curve, snapshot: Reserves, orders, proposed) -> bool:
    """Check a proposed uniform price without trusting the solver's search.

    True iff the batch can actually clear at ``proposed`` (limits respected,
    infra-marginal orders fully filled, pool trade on the level curve) and no
    candidate price — any order limit or any regime's market-balance price —
    achieves more executed volume.
    """
    orders = list(orders)
    try:
        p = float(Price(proposed))
    except DomainError:
        return False
    vol = clearing_volume_at(curve, snapshot, orders, p)
    if vol is None:
        return False
    buys, sells = _classify(orders)
    limits = sorted({lim for _, _, lim in buys + sells if lim is not None})
    candidates = set(limits)
    candidates.add(float(curve.price(snapshot)))
    edges = [0.0] + limits + [math.inf]
    for j in range(len(edges) - 1):
        lo, hi = edges[j], edges[j + 1]
        x_in = sum(s for _, s, lim in buys if lim is None or lim >= hi)
        y_in = sum(s for _, s, lim in sells if lim is None or lim <= lo)
        candidates.add((snapshot.x + x_in) / (snapshot.y + y_in))
    best = vol
    for c in candidates:
        if c <= 0.0 or not math.isfinite(c):
            continue
        v = clearing_volume_at(curve, snapshot, orders, c)
        if v is not None and v > best:
            best = v
    scale = max(vol, best, 1.0)
    return vol >= best - CLEARING_RTOL * scale


def redistribute(pool: AllocationPool) -> tuple[tuple[float, float], tuple[float, float]]:
    """Split the escrow remainder between the pool and the producer.

    Returns ``(to_pool, to_producer)`` in the ``1 - beta : beta`` ratio the
    escrow was funded with. Negative remainders mean the escrow was breached,
    which bounded orders make impossible.
    """
    if pool.x < 0 or pool.y < 0:
        raise DomainError("allocation pool reserves went negative")
    beta = pool.producer_fraction
    to_producer = (beta * pool.x, beta * pool.y)
    to_pool = ((1.0 - beta) * pool.x, (1.0 - beta) * pool.y)
    return to_pool, to_producer
