"""Block-by-block protocol state machine.

The chain state owns a token ledger covering every party that can hold
value: the pool reserves, the vault, the per-batch escrows, a collateral
account for committed orders, agent accounts, and a burn sink. Every token
movement goes through one transfer helper, so total supply is conserved by
construction and can be asserted cheaply at any point.

Escrow accounting: the producer's share of an allocation escrow is held
physically by the escrow party, while the pool-backed share stays inside the
pool reserves as an earmark (checked for sufficiency, never moved). The pool
therefore keeps pricing on its full reserves during open batch windows — the
reading under which a zero-rebate schedule reduces the protocol exactly to a
plain CFMM — and settlement flows are routed so each side ends up with its
``1 - beta : beta`` share of the escrow remainder.

Order commitments are modeled as salted digests with honest binding: the
engine computes the commitment at submission, keeps only commitment, side
and collateral, and checks the digest again at reveal.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

from .allocation import (
    AllocationPool,
    Order,
    Settlement,
    clearing_price_with_limits,
    create_allocation_pool,
    redistribute,
    verify_clearing_price,
    _settlement_at,
)
from .cfmm import Price, Reserves
from .errors import (
    DomainError,
    FundingError,
    InvalidTransition,
    InvariantViolation,
    VerificationError,
)
from .rebate import (
    RebateSchedule,
    RebatedMoveResult,
    ReentryResult,
    Vault,
    apply_rebated_move,
    vault_reenter,
)

POOL = "pool"
VAULT = "vault"
COLLATERAL = "collateral"
BURNED = "burned"

_NEG_TOL = 1e-9


class OctState(enum.Enum):
    PENDING = "pending"
    INSERTED = "inserted"
    ALLOCATED = "allocated"
    REVEALED = "revealed"
    EXECUTED = "executed"
    BURNED = "burned"


def commit_order(order: Order, salt: str) -> str:
    """Binding commitment to an order's side, size and limit."""
    payload = f"{order.side.value}|{order.size!r}|{order.limit!r}|{order.owner!r}|{salt}"
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(slots=True)
class Oct:
    """An order-commitment transaction as the chain sees it."""

    id: int
    owner: str
    commitment: str
    collateral_token: str  # "x" or "y", the token the hidden order sells
    collateral: float
    state: OctState = OctState.PENDING
    submitted_at: int = -1
    inserted_at: int = -1
    allocated_at: int = -1
    label: int = -1
    revealed: Order | None = None


@dataclass(frozen=True, slots=True)
class Event:
    height: int
    kind: str
    data: dict


@dataclass(frozen=True, slots=True)
class UpdateReceipt:
    height: int
    label: int
    gap: int
    beta: float
    price: float
    move: RebatedMoveResult
    count: int
    escrow: tuple[float, float]
    snapshot: Reserves
    producer: str


@dataclass(frozen=True, slots=True)
class ExecutionReceipt:
    height: int
    label: int
    created_at: int
    allocation_price: float
    settlement: Settlement
    orders: tuple[Order, ...]
    fill_owners: tuple[str, ...]
    burned: tuple[tuple[str, str, float], ...]  # (owner, token, amount)
    remaining: tuple[float, float]
    to_pool: tuple[float, float]
    to_producer: tuple[float, float]
    producer: str
    n_allocated: int
    n_revealed: int


@dataclass(frozen=True, slots=True)
class ReentryReceipt:
    height: int
    eps: float
    added: tuple[float, float]
    converter_flow: tuple[float, float]
    converter: str


@dataclass(frozen=True, slots=True)
class BlockReceipt:
    height: int
    executions: tuple[ExecutionReceipt, ...]
    reentry: ReentryReceipt | None


class ChainState:
    """Mutable protocol state advanced one block at a time.

    The per-block call order a driver is expected to follow mirrors the
    protocol: submit OCTs, insert a subset, optionally apply one update
    transaction, apply reveals, then ``advance_block`` — which executes due
    batches, periodically folds the vault back into the pool, and increments
    the height.
    """

    def __init__(
        self,
        curve,
        reserves: Reserves,
        schedule: RebateSchedule,
        *,
        max_x: float,
        max_y: float,
        reveal_window: int = 2,
        conversion_frequency: int = 1,
        balances: dict[str, tuple[float, float]] | None = None,
        record_events: bool = False,
    ):
        if max_x <= 0 or max_y <= 0:
            raise DomainError("order bounds must be > 0")
        if reveal_window < 0:
            raise DomainError("reveal window must be >= 0")
        if conversion_frequency < 0:
            raise DomainError("conversion frequency must be >= 0")
        self.curve = curve
        self.schedule = schedule
        self.max_x = float(max_x)
        self.max_y = float(max_y)
        self.reveal_window = int(reveal_window)
        self.conversion_frequency = int(conversion_frequency)
        self.height = 0
        self.last_alloc_label = -1
        self.last_update_block = -1
        self.octs: dict[int, Oct] = {}
        self.mempool: dict[int, Oct] = {}
        self.inserted_by_height: dict[int, list[int]] = {}
        self.open_allocations: dict[int, AllocationPool] = {}
        self.vault = Vault()
        self.earmark = [0.0, 0.0]  # pool-backed escrow share outstanding
        self.balances: dict[str, list[float]] = {POOL: [reserves.x, reserves.y]}
        for party, (bx, by) in (balances or {}).items():
            self.balances[party] = [float(bx), float(by)]
        self.balances.setdefault(VAULT, [0.0, 0.0])
        self.balances.setdefault(COLLATERAL, [0.0, 0.0])
        self.balances.setdefault(BURNED, [0.0, 0.0])
        self._next_oct_id = 0
        self.events: list[Event] | None = [] if record_events else None
        self._supply0 = self.total_supply()

    # ------------------------------------------------------------------ ledger

    def _account(self, party: str) -> list[float]:
        acct = self.balances.get(party)
        if acct is None:
            acct = self.balances[party] = [0.0, 0.0]
        return acct

    def _transfer(self, src: str, dst: str, dx: float, dy: float, *, guard: bool = True):
        """Move (dx, dy) from src to dst; negative components flip direction."""
        if dx == 0.0 and dy == 0.0:
            return
        s, d = self._account(src), self._account(dst)
        s[0] -= dx
        s[1] -= dy
        d[0] += dx
        d[1] += dy
        if guard:
            scale = abs(dx) + abs(dy) + 1.0
            if s[0] < -_NEG_TOL * scale or s[1] < -_NEG_TOL * scale:
                raise FundingError(
                    f"{src} overdrawn moving ({dx!r}, {dy!r}) to {dst}: {s!r}"
                )

    def _emit(self, kind: str, **data):
        if self.events is not None:
            self.events.append(Event(height=self.height, kind=kind, data=data))

    def total_supply(self) -> tuple[float, float]:
        tx = ty = 0.0
        for bx, by in self.balances.values():
            tx += bx
            ty += by
        return tx, ty

    def conservation_error(self) -> float:
        tx, ty = self.total_supply()
        return max(abs(tx - self._supply0[0]), abs(ty - self._supply0[1]))

    # ------------------------------------------------------------------- views

    def pool_reserves(self) -> Reserves:
        bx, by = self.balances[POOL]
        return Reserves(bx, by)

    def pool_price(self) -> float:
        return float(self.curve.price(self.pool_reserves()))

    def pool_constant(self) -> float:
        return self.curve.invariant(self.pool_reserves())

    # ----------------------------------------------------------------- actions

    def submit_oct(self, owner: str, order: Order) -> Oct:
        """Commit an order to the mempool, posting max-bound collateral.

        The engine computes the binding commitment and immediately forgets
        the order body; only the commitment, the sold token and the
        collateral stay visible until reveal.
        """
        token = order.sells_token
        bound = self.max_x if token == "x" else self.max_y
        if order.size > bound:
            raise DomainError(f"order size {order.size!r} exceeds the {token} bound {bound!r}")
        oct_id = self._next_oct_id
        self._next_oct_id += 1
        oct = Oct(
            id=oct_id,
            owner=owner,
            commitment=commit_order(order, salt=str(oct_id)),
            collateral_token=token,
            collateral=bound,
            submitted_at=self.height,
        )
        self._transfer(owner, COLLATERAL, bound if token == "x" else 0.0, bound if token == "y" else 0.0)
        self.octs[oct_id] = oct
        self.mempool[oct_id] = oct
        self._emit("oct_submitted", id=oct_id, owner=owner, token=token, collateral=bound)
        return oct

    def insert_octs(self, producer: str, oct_ids) -> list[int]:
        """Producer writes a subset of the mempool into the current block."""
        ids = list(oct_ids)
        seen = set()
        for oct_id in ids:
            oct = self.octs.get(oct_id)
            if oct is None or oct_id not in self.mempool or oct_id in seen:
                raise InvalidTransition(f"oct {oct_id!r} is not in the mempool")
            if oct.state is not OctState.PENDING:
                raise InvalidTransition(f"oct {oct_id!r} already inserted")
            seen.add(oct_id)
        block = self.inserted_by_height.setdefault(self.height, [])
        for oct_id in ids:
            oct = self.mempool.pop(oct_id)
            oct.state = OctState.INSERTED
            oct.inserted_at = self.height
            block.append(oct_id)
        if ids:
            self._emit("octs_inserted", ids=ids, producer=producer)
        return ids

    def apply_update_tx(self, producer: str, alloc_label: int, price) -> UpdateReceipt:
        """One per block: move the pool price and allocate inserted OCTs.

        ``alloc_label`` is the allocation height H_a; OCTs inserted at
        heights up to it (and after the previous label) become the batch.
        The rebate fraction follows the schedule at gap ``H - H_a``.
        """
        h = self.height
        if self.last_update_block == h:
            raise InvalidTransition(f"block {h} already carries an update transaction")
        if not (self.last_alloc_label < alloc_label <= h):
            raise InvalidTransition(
                f"allocation height {alloc_label} outside ({self.last_alloc_label}, {h}]"
            )
        p = Price(price)
        gap = h - alloc_label
        beta = self.schedule.value_at(gap)

        move = apply_rebated_move(self.curve, self.pool_reserves(), p, beta)
        self._transfer(POOL, producer, *move.producer_flow)
        self._transfer(POOL, VAULT, *move.vault_deposit)
        self.vault.deposit(*move.vault_deposit)

        batch: list[int] = []
        for height in range(self.last_alloc_label + 1, alloc_label + 1):
            batch.extend(self.inserted_by_height.get(height, ()))
        snapshot = self.pool_reserves()
        count = len(batch)
        receipt_escrow = (0.0, 0.0)
        if count:
            pool = create_allocation_pool(
                count,
                p,
                self.max_x,
                self.max_y,
                beta,
                snapshot,
                label=alloc_label,
                created_at=h,
                producer=producer,
                pool_reserves=None,
            )
            pool_share = 1.0 - beta
            need_x = self.earmark[0] + pool_share * pool.x
            need_y = self.earmark[1] + pool_share * pool.y
            if need_x > snapshot.x or need_y > snapshot.y:
                raise FundingError(
                    f"pool reserves cannot back escrow earmarks ({need_x!r}, {need_y!r})"
                )
            self.earmark[0] = need_x
            self.earmark[1] = need_y
            self._transfer(producer, self._escrow_party(alloc_label), pool.producer_x, pool.producer_y)
            pool.oct_ids = batch
            for oct_id in batch:
                oct = self.octs[oct_id]
                oct.state = OctState.ALLOCATED
                oct.allocated_at = h
                oct.label = alloc_label
            self.open_allocations[alloc_label] = pool
            receipt_escrow = (pool.x, pool.y)

        self.last_alloc_label = alloc_label
        self.last_update_block = h
        receipt = UpdateReceipt(
            height=h,
            label=alloc_label,
            gap=gap,
            beta=beta,
            price=float(p),
            move=move,
            count=count,
            escrow=receipt_escrow,
            snapshot=snapshot,
            producer=producer,
        )
        self._emit(
            "update_applied",
            label=alloc_label,
            gap=gap,
            beta=beta,
            price=float(p),
            producer_flow=move.producer_flow,
            vault_deposit=move.vault_deposit,
            count=count,
            escrow=receipt_escrow,
            producer=producer,
        )
        return receipt

    def _escrow_party(self, label: int) -> str:
        return f"alloc:{label}"

    def reveal_order(self, oct_id: int, order: Order):
        """Reveal the order behind an allocated OCT within the window."""
        oct = self.octs.get(oct_id)
        if oct is None:
            raise InvalidTransition(f"unknown oct {oct_id!r}")
        if oct.state is not OctState.ALLOCATED:
            raise InvalidTransition(f"oct {oct_id} is {oct.state.value}, not allocated")
        if self.height > oct.allocated_at + self.reveal_window:
            raise InvalidTransition(f"reveal window for oct {oct_id} closed")
        if commit_order(order, salt=str(oct_id)) != oct.commitment:
            raise InvalidTransition(f"order does not match the commitment of oct {oct_id}")
        if order.sells_token != oct.collateral_token or order.size > oct.collateral:
            raise InvalidTransition(f"order breaches the collateral of oct {oct_id}")
        oct.revealed = order
        oct.state = OctState.REVEALED
        self._emit("oct_revealed", id=oct_id)

    def execute_batch(self, label: int, proposed_price=None) -> ExecutionReceipt:
        """Settle one allocated batch and redistribute its escrow.

        Unrevealed OCTs burn their collateral. With ``proposed_price`` the
        engine verifies the proposal instead of trusting it, rejecting prices
        that fail the volume-maximality check.
        """
        pool = self.open_allocations.get(label)
        if pool is None:
            raise InvalidTransition(f"no open allocation with label {label!r}")
        h = self.height
        octs = [self.octs[i] for i in pool.oct_ids]
        revealed = [o for o in octs if o.state is OctState.REVEALED]
        if h < pool.created_at + self.reveal_window and len(revealed) < len(octs):
            raise InvalidTransition(f"batch {label} is not due (reveals outstanding)")

        burned = []
        for oct in octs:
            if oct.state is OctState.ALLOCATED:
                amt_x = oct.collateral if oct.collateral_token == "x" else 0.0
                amt_y = oct.collateral if oct.collateral_token == "y" else 0.0
                self._transfer(COLLATERAL, BURNED, amt_x, amt_y)
                oct.state = OctState.BURNED
                burned.append((oct.owner, oct.collateral_token, oct.collateral))
                self._emit("oct_burned", id=oct.id, owner=oct.owner, amount=oct.collateral)

        orders = tuple(o.revealed for o in revealed)
        if proposed_price is not None:
            if not verify_clearing_price(self.curve, pool.snapshot, orders, proposed_price):
                raise VerificationError(
                    f"proposed clearing price {proposed_price!r} failed verification"
                )
            settlement = _settlement_at(self.curve, pool.snapshot, list(orders), float(proposed_price))
            if settlement is None:
                raise VerificationError(
                    f"proposed clearing price {proposed_price!r} cannot clear the batch"
                )
        else:
            settlement = clearing_price_with_limits(self.curve, pool.snapshot, orders)
            if not verify_clearing_price(self.curve, pool.snapshot, orders, settlement.price):
                raise InvariantViolation(
                    f"solver clearing price {settlement.price!r} failed self-verification"
                )

        escrow = self._escrow_party(label)
        filled_by_index = {f.index: f for f in settlement.fills}
        fill_owners = []
        p = settlement.price
        for idx, oct in enumerate(revealed):
            order = oct.revealed
            f = filled_by_index.get(idx)
            sold = f.sold if f is not None else 0.0
            bought = f.bought if f is not None else 0.0
            if sold > 0.0:
                fill_owners.append(oct.owner)
            if order.sells_token == "x":
                self._transfer(COLLATERAL, escrow, sold, 0.0, guard=False)
                self._transfer(escrow, oct.owner, 0.0, bought, guard=False)
                self._transfer(COLLATERAL, oct.owner, oct.collateral - sold, 0.0)
            else:
                self._transfer(COLLATERAL, escrow, 0.0, sold, guard=False)
                self._transfer(escrow, oct.owner, bought, 0.0, guard=False)
                self._transfer(COLLATERAL, oct.owner, 0.0, oct.collateral - sold)
            oct.state = OctState.EXECUTED

        dx, dy = settlement.pool_delta
        pool.x += dx
        pool.y += dy
        scale = abs(pool.x) + abs(pool.y) + abs(dx) + abs(dy) + 1.0
        if pool.x < -_NEG_TOL * scale or pool.y < -_NEG_TOL * scale:
            raise InvariantViolation(
                f"allocation escrow {label} breached: ({pool.x!r}, {pool.y!r})"
            )
        pool.x = max(pool.x, 0.0)
        pool.y = max(pool.y, 0.0)
        # Pool reserves take their share of the batch imbalance; the rest of
        # the physical flows stay with the escrow (the producer's share).
        pool_share = 1.0 - pool.producer_fraction
        self._transfer(escrow, POOL, pool_share * dx, pool_share * dy, guard=False)

        to_pool, to_producer = redistribute(pool)
        self._transfer(escrow, pool.producer, *to_producer, guard=False)
        acct = self._account(escrow)
        if abs(acct[0]) > _NEG_TOL * scale or abs(acct[1]) > _NEG_TOL * scale:
            raise InvariantViolation(f"escrow {escrow} not fully unwound: {acct!r}")
        self.earmark[0] -= pool_share * (pool.count * self.max_y * pool.price)
        self.earmark[1] -= pool_share * (pool.count * self.max_x / pool.price)
        del self.open_allocations[label]

        receipt = ExecutionReceipt(
            height=h,
            label=label,
            created_at=pool.created_at,
            allocation_price=pool.price,
            settlement=settlement,
            orders=orders,
            fill_owners=tuple(fill_owners),
            burned=tuple(burned),
            remaining=(pool.x, pool.y),
            to_pool=to_pool,
            to_producer=to_producer,
            producer=pool.producer,
            n_allocated=len(octs),
            n_revealed=len(revealed),
        )
        self._emit(
            "batch_executed",
            label=label,
            price=settlement.price,
            pool_delta=settlement.pool_delta,
            n_allocated=len(octs),
            n_revealed=len(revealed),
            n_burned=len(burned),
            to_pool=to_pool,
            to_producer=to_producer,
        )
        return receipt

    def advance_block(self, eps, converter: str | None = None) -> BlockReceipt:
        """Close the block: execute due batches, maybe re-enter the vault.

        A batch is due once all its OCTs revealed or its window elapsed.
        ``eps`` is the external price used for the vault conversion and
        ``converter`` the agent (normally the block producer) taking the
        value-neutral other side of it.
        """
        h = self.height
        executions = []
        for label in sorted(self.open_allocations):
            pool = self.open_allocations[label]
            octs = [self.octs[i] for i in pool.oct_ids]
            due = h >= pool.created_at + self.reveal_window or all(
                o.state is OctState.REVEALED for o in octs
            )
            if due:
                executions.append(self.execute_batch(label))

        reentry = None
        freq = self.conversion_frequency
        if freq > 0 and (h + 1) % freq == 0 and not self.vault.is_empty:
            who = converter if converter is not None else "converter"
            result = vault_reenter(self.curve, self.pool_reserves(), self.vault, eps)
            # The converter swaps the vault basket for the price-preserving
            # one; value-neutral at eps, so outside liquidity may go through
            # a transiently negative account.
            self._transfer(VAULT, who, self.vault.x, self.vault.y, guard=False)
            self._transfer(who, POOL, *result.added, guard=False)
            self.vault.x = 0.0
            self.vault.y = 0.0
            reentry = ReentryReceipt(
                height=h,
                eps=float(eps),
                added=result.added,
                converter_flow=result.converter_flow,
                converter=who,
            )
            self._emit(
                "vault_reentered",
                eps=float(eps),
                added=result.added,
                converter_flow=result.converter_flow,
                converter=who,
            )

        self._emit("block_end", pool=tuple(self.balances[POOL]), vault=(self.vault.x, self.vault.y))
        self.height = h + 1
        return BlockReceipt(height=h, executions=tuple(executions), reentry=reentry)
