"""Operation-based sequence CRDT over single characters.

## Core model

- Every insert gets a globally unique ``OpId`` ``(replica, seq)``; ``seq`` is a
  gapless per-replica counter starting at 1.
- Inserts are expressed as "insert after" an ``origin`` anchor: either ``HEAD``
  (start of the document) or the ``OpId`` of the element immediately to the
  left of the insertion point at generation time.
- Deletes are tombstones: the element stays in the sequence forever, invisible,
  so concurrent origins and cursor anchors remain resolvable.

## Determinism

Concurrent inserts after the same origin are ordered by the ``(lamport,
replica)`` key, greater key closer to the origin. Because a replica's Lamport
clock always exceeds everything it has integrated, a descendant's key is
strictly greater than its ancestor's; this is what makes the one-pass
integration scan below correct (skipping a greater-keyed element implicitly
skips its whole subtree).

## Out-of-order delivery

``integrate`` accepts ops in any order. An op is held in a pending buffer
until (a) its per-replica predecessor ``(replica, seq-1)`` has been
integrated, and (b) its origin (inserts) or target (deletes) is known. The
buffer is re-scanned after every successful integration, so delivery order
never affects the final state. Re-delivering an integrated op is a no-op.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Union


@dataclass(frozen=True, order=True)
class OpId:
    """Identity of an operation: (replica id, per-replica sequence number)."""

    replica: int
    seq: int


class _Head:
    """Sentinel anchor naming the position before the first element."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "HEAD"


HEAD = _Head()

# An anchor names the element to the left of a position: HEAD means "before
# everything". Anchors always name inserts, never deletes.
Anchor = Union[_Head, OpId]


@dataclass(frozen=True)
class InsertOp:
    id: OpId
    lamport: int
    origin: Anchor
    ch: str  # exactly one Unicode scalar value


@dataclass(frozen=True)
class DeleteOp:
    id: OpId
    target: OpId  # the insert being tombstoned


Op = Union[InsertOp, DeleteOp]


class IntegrationResult(Enum):
    APPLIED = "applied"
    BUFFERED = "buffered"
    DUPLICATE = "duplicate"


@dataclass
class _Element:
    op: InsertOp
    deleted: bool = False


class TextDoc:
    """One replica of a collaboratively edited text.

    ## Invariants (hold after every public method returns)

    - Visible text is the concatenation of non-deleted elements in list order.
    - Every element's origin precedes it in the list, or is ``HEAD``.
    - ``version()[r] == s`` implies ops ``(r, 1) .. (r, s)`` are all
      integrated; integration is FIFO per replica, so the version vector is
      exact, never an approximation.
    - The Lamport clock is >= the lamport of every integrated insert.
    """

    def __init__(self, replica: int):
        if replica < 0:
            raise ValueError("replica id must be non-negative")
        self.replica = replica
        self._elements: list[_Element] = []
        self._elem_by_id: dict[OpId, _Element] = {}
        self._op_log: dict[OpId, Op] = {}
        self._vv: dict[int, int] = {}
        self._lamport = 0
        self._pending: list[Op] = []

    # ------------------------------------------------------------------ local

    def insert(self, index: int, ch: str) -> InsertOp:
        """Insert ``ch`` at visible position ``index`` and return the op.

        The returned op is already integrated locally and ready to broadcast.
        """
        if len(ch) != 1:
            raise ValueError("insert takes exactly one character")
        if not 0 <= index <= self.visible_length():
            raise IndexError(f"insert index {index} out of range")
        origin = self.anchor_at(index)
        op = InsertOp(
            id=OpId(self.replica, self._next_seq()),
            lamport=self._lamport + 1,
            origin=origin,
            ch=ch,
        )
        result = self.integrate(op)
        assert result is IntegrationResult.APPLIED
        return op

    def delete(self, index: int) -> DeleteOp:
        """Tombstone the visible element at ``index`` and return the op."""
        if not 0 <= index < self.visible_length():
            raise IndexError(f"delete index {index} out of range")
        target = self._visible_element(index).op.id
        op = DeleteOp(id=OpId(self.replica, self._next_seq()), target=target)
        result = self.integrate(op)
        assert result is IntegrationResult.APPLIED
        return op

    def _next_seq(self) -> int:
        return self._vv.get(self.replica, 0) + 1

    # ----------------------------------------------------------------- remote

    def integrate(self, op: Op) -> IntegrationResult:
        """Integrate one op, buffering it if it is not yet causally ready."""
        result = self._try_integrate(op)
        if result is IntegrationResult.APPLIED:
            self._drain_pending()
        return result

    def _try_integrate(self, op: Op) -> IntegrationResult:
        if op.id.seq <= self._vv.get(op.id.replica, 0):
            return IntegrationResult.DUPLICATE
        if not self._ready(op):
            self._pending.append(op)
            return IntegrationResult.BUFFERED
        if isinstance(op, InsertOp):
            self._apply_insert(op)
        else:
            self._apply_delete(op)
        self._op_log[op.id] = op
        self._vv[op.id.replica] = op.id.seq
        return IntegrationResult.APPLIED

    def _ready(self, op: Op) -> bool:
        if op.id.seq != self._vv.get(op.id.replica, 0) + 1:
            return False
        if isinstance(op, InsertOp):
            return op.origin is HEAD or op.origin in self._elem_by_id
        return op.target in self._elem_by_id

    def _apply_insert(self, op: InsertOp) -> None:
        if op.origin is HEAD:
            i = 0
        else:
            i = self._elements.index(self._elem_by_id[op.origin]) + 1
        key = (op.lamport, op.id.replica)
        while i < len(self._elements):
            el = self._elements[i].op
            if (el.lamport, el.id.replica) < key:
                break
            i += 1
        element = _Element(op)
        self._elements.insert(i, element)
        self._elem_by_id[op.id] = element
        self._lamport = max(self._lamport, op.lamport)

    def _apply_delete(self, op: DeleteOp) -> None:
        self._elem_by_id[op.target].deleted = True

    def _drain_pending(self) -> None:
        progressed = True
        while progressed and self._pending:
            progressed = False
            still: list[Op] = []
            for op in self._pending:
                r = self._try_integrate_buffered(op)
                if r is IntegrationResult.BUFFERED:
                    still.append(op)
                else:
                    progressed = True
            self._pending = still

    def _try_integrate_buffered(self, op: Op) -> IntegrationResult:
        # Same as _try_integrate but must not re-append to the buffer.
        if op.id.seq <= self._vv.get(op.id.replica, 0):
            return IntegrationResult.DUPLICATE
        if not self._ready(op):
            return IntegrationResult.BUFFERED
        if isinstance(op, InsertOp):
            self._apply_insert(op)
        else:
            self._apply_delete(op)
        self._op_log[op.id] = op
        self._vv[op.id.replica] = op.id.seq
        return IntegrationResult.APPLIED

    # ------------------------------------------------------------------ reads

    @property
    def text(self) -> str:
        return "".join(el.op.ch for el in self._elements if not el.deleted)

    def visible_length(self) -> int:
        return sum(1 for el in self._elements if not el.deleted)

    def version(self) -> dict[int, int]:
        """Per-replica highest contiguous integrated seq (copy)."""
        return dict(self._vv)

    def pending_count(self) -> int:
        return len(self._pending)

    def knows_insert(self, op_id: OpId) -> bool:
        """True iff the insert with this id has been integrated."""
        return op_id in self._elem_by_id

    def ops_since(self, since: Mapping[int, int]) -> list[Op]:
        """Every integrated op newer than ``since``, per-replica seq order.

        Ordering across replicas is (replica, seq); any per-replica FIFO order
        is safe for a receiver because its pending buffer absorbs cross-replica
        gaps.
        """
        return [
            op
            for op_id, op in sorted(self._op_log.items())
            if op_id.seq > since.get(op_id.replica, 0)
        ]

    def all_ops(self) -> list[Op]:
        return self.ops_since({})

    # ---------------------------------------------------------------- cursors

    def anchor_at(self, index: int) -> Anchor:
        """Concurrency-stable anchor for cursor position ``index``.

        HEAD for position 0, else the id of the visible element at index-1.
        """
        if not 0 <= index <= self.visible_length():
            raise IndexError(f"anchor index {index} out of range")
        if index == 0:
            return HEAD
        return self._visible_element(index - 1).op.id

    def index_of(self, anchor: Anchor) -> int:
        """Resolve an anchor back to a cursor position.

        A tombstoned anchor resolves to the position after the nearest
        preceding visible element.
        """
        if anchor is HEAD:
            return 0
        if anchor not in self._elem_by_id:
            raise KeyError(f"unknown anchor {anchor}")
        n = 0
        for el in self._elements:
            if not el.deleted:
                n += 1
            if el.op.id == anchor:
                return n
        raise AssertionError("indexed element missing from sequence")

    def element_count(self) -> int:
        """Total elements including tombstones."""
        return len(self._elements)

    def _visible_element(self, index: int) -> _Element:
        n = -1
        for el in self._elements:
            if not el.deleted:
                n += 1
                if n == index:
                    return el
        raise IndexError(f"visible index {index} out of range")


def replay(replica: int, ops: Iterable[Op]) -> TextDoc:
    """Build a fresh replica by integrating ``ops`` in the given order."""
    doc = TextDoc(replica)
    for op in ops:
        doc.integrate(op)
    return doc
