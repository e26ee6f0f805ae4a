"""Client-side communication handler.

A session owns one local replica per subscribed doclet and speaks one of
three transport strategies:

- ``MUX``: one connection; every frame is tagged with its doclet id, so
  inbound traffic routes precisely and cursor sends are gated on "did my
  cursor or my active doclet actually change".
- ``PER_SOCKET``: one connection per doclet; the connection itself does the
  routing. Correct, but the connection count grows with the doclet count.
- ``NAIVE``: one connection and *no* doclet tag. Inbound frames can only be
  applied to whatever doclet is currently active, so a remote change the
  session cannot attribute perturbs its cursor state and triggers a cursor
  re-broadcast on the next tick. Two such clients re-arm each other through
  the relay, producing a sustained message loop whose rate is bounded only by
  the tick interval. That loop is the degraded baseline the tagged strategies
  are measured against.

Keepalives are inactivity-based: a transport that has sent nothing for
``keepalive_ms`` emits one KEEPALIVE frame (which the relay uses to refresh
presence liveness and does not rebroadcast).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Protocol

from .crdt import Anchor, DeleteOp, InsertOp, IntegrationResult, TextDoc
from .doclet import AwarenessEntry, Doclet
from .wire import (
    Awareness,
    Frame,
    FrameDecodeError,
    FrameKind,
    SyncRequest,
    Update,
    decode_frame,
    encode_frame,
)

# Replica ids are allocated per (user, doclet) so op ids stay globally unique
# across doclets: replica = user * REPLICA_STRIDE + doclet_index. User ids
# must stay below 2**33 so replicas fit comfortably in 53 bits (exact in
# IEEE doubles, which matters for non-Python peers). Replica 0 is reserved
# for relay-held documents, which never generate ops.
REPLICA_STRIDE = 2**20


def replica_for(user: int, doclet_index: int) -> int:
    if user < 1:
        raise ValueError("user ids start at 1; replica 0 is reserved")
    if not 0 <= doclet_index < REPLICA_STRIDE:
        raise ValueError("doclet index out of range")
    return user * REPLICA_STRIDE + doclet_index


def user_of_replica(replica: int) -> int:
    return replica // REPLICA_STRIDE


class Strategy(Enum):
    NAIVE = "naive"
    PER_SOCKET = "per-socket"
    MUX = "mux"


class Transport(Protocol):
    def send(self, data: bytes) -> None: ...

    def close(self) -> None: ...


TransportFactory = Callable[[Optional[str]], Transport]


@dataclass
class MetricsCounters:
    frames_sent: int = 0
    frames_received: int = 0
    connections_opened: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    routing_errors: int = 0
    decode_errors: int = 0
    per_second: dict[int, int] = field(default_factory=dict)

    def count_frame(self, now_ms: float) -> None:
        window = int(now_ms // 1000)
        self.per_second[window] = self.per_second.get(window, 0) + 1

    def windows(self) -> list[tuple[int, int]]:
        return sorted(self.per_second.items())

    def copy(self) -> "MetricsCounters":
        return MetricsCounters(
            frames_sent=self.frames_sent,
            frames_received=self.frames_received,
            connections_opened=self.connections_opened,
            bytes_sent=self.bytes_sent,
            bytes_received=self.bytes_received,
            routing_errors=self.routing_errors,
            decode_errors=self.decode_errors,
            per_second=dict(self.per_second),
        )


@dataclass
class TrackingRecord:
    doclet: Doclet
    transport: Transport
    previous_version: dict[int, int]
    previous_cursor: Optional[Anchor]  # None until the user places a cursor


def _real_now_ms() -> float:
    return time.monotonic() * 1000.0


class Session:
    def __init__(
        self,
        strategy: Strategy,
        user: int,
        doclet_ids: list[str],
        transport_factory: TransportFactory,
        *,
        now_ms: Callable[[], float] = _real_now_ms,
        keepalive_ms: float = 1000.0,
    ):
        if not doclet_ids:
            raise ValueError("a session needs at least one doclet")
        if len(set(doclet_ids)) != len(doclet_ids):
            raise ValueError("doclet ids must be unique")
        self.strategy = strategy
        self.user = user
        self._now_ms = now_ms
        self.keepalive_ms = keepalive_ms
        self.metrics = MetricsCounters()
        self.records: dict[str, TrackingRecord] = {}
        self.naive_resend_armed = False
        self._last_send: dict[int, float] = {}  # id(transport) -> last send ms

        shared: Optional[Transport] = None
        if strategy is not Strategy.PER_SOCKET:
            shared = transport_factory(None)
            self.metrics.connections_opened += 1
        for index, doclet_id in enumerate(doclet_ids):
            if strategy is Strategy.PER_SOCKET:
                transport = transport_factory(doclet_id)
                self.metrics.connections_opened += 1
            else:
                transport = shared  # type: ignore[assignment]
            doc = TextDoc(replica_for(user, index))
            self.records[doclet_id] = TrackingRecord(
                doclet=Doclet(doclet_id, doc),
                transport=transport,
                previous_version=doc.version(),
                previous_cursor=None,
            )
        self.active_doclet = doclet_ids[0]
        for doclet_id, record in self.records.items():
            self._send(record.transport, Frame(FrameKind.SUBSCRIBE, self._tag(doclet_id)))
            self._send(
                record.transport,
                Frame(
                    FrameKind.SYNC_REQ,
                    self._tag(doclet_id),
                    SyncRequest.from_version(record.doclet.doc.version()),
                ),
            )

    # -------------------------------------------------------------- plumbing

    def _tag(self, doclet_id: str) -> str:
        return "" if self.strategy is Strategy.NAIVE else doclet_id

    def _send(self, transport: Transport, frame: Frame) -> None:
        data = encode_frame(frame)
        transport.send(data)
        now = self._now_ms()
        self.metrics.frames_sent += 1
        self.metrics.bytes_sent += len(data)
        self.metrics.count_frame(now)
        self._last_send[id(transport)] = now

    def _record(self, doclet_id: str) -> TrackingRecord:
        try:
            return self.records[doclet_id]
        except KeyError:
            raise ValueError(f"not subscribed to doclet {doclet_id!r}") from None

    # ------------------------------------------------------------ local edits

    def local_insert(self, doclet_id: str, index: int, ch: str) -> int:
        """Apply a local insert and broadcast it. Returns frames sent."""
        return self._local_edit(doclet_id, lambda doc: doc.insert(index, ch))

    def local_delete(self, doclet_id: str, index: int) -> int:
        return self._local_edit(doclet_id, lambda doc: doc.delete(index))

    def _local_edit(self, doclet_id: str, edit: Callable[[TextDoc], InsertOp | DeleteOp]) -> int:
        record = self._record(doclet_id)
        if doclet_id != self.active_doclet:
            raise ValueError("edits are only accepted on the active doclet")
        doc = record.doclet.doc
        op = edit(doc)
        self._send(
            record.transport,
            Frame(FrameKind.UPDATE, self._tag(doclet_id), Update((op,))),
        )
        record.previous_version = doc.version()
        # The update itself carries the new cursor; no awareness frame.
        if isinstance(op, InsertOp):
            record.previous_cursor = op.id
        else:
            record.previous_cursor = doc.anchor_at(doc.index_of(op.target))
        return 1

    def on_local_cursor(self, doclet_id: str, index: int) -> int:
        """Handle a click / caret move. Returns frames sent (0 or 1)."""
        record = self._record(doclet_id)
        anchor = record.doclet.doc.anchor_at(index)
        was_active = doclet_id == self.active_doclet
        self.active_doclet = doclet_id
        if was_active and anchor == record.previous_cursor:
            return 0  # neither the cursor nor the active doclet changed
        record.previous_cursor = anchor
        self._send(
            record.transport,
            Frame(FrameKind.AWARENESS, self._tag(doclet_id), Awareness(self.user, anchor)),
        )
        return 1

    # --------------------------------------------------------------- inbound

    def on_frame(self, data: bytes, via: Optional[str] = None) -> None:
        """Process one inbound transport message.

        ``via`` names the doclet a per-socket transport is bound to; shared
        transports pass None and the frame tag (or the active doclet, for the
        untagged strategy) decides where the frame lands.
        """
        now = self._now_ms()
        self.metrics.frames_received += 1
        self.metrics.bytes_received += len(data)
        self.metrics.count_frame(now)
        try:
            frame = decode_frame(data)
        except FrameDecodeError:
            self.metrics.decode_errors += 1
            return

        if self.strategy is Strategy.NAIVE:
            record = self.records[self.active_doclet]
            self._apply_inbound(record, frame, now, naive=True)
            return

        target = via if (self.strategy is Strategy.PER_SOCKET and via is not None) else frame.doclet
        record = self.records.get(target)
        if record is None:
            self.metrics.routing_errors += 1
            return
        self._apply_inbound(record, frame, now, naive=False)

    def _apply_inbound(self, record: TrackingRecord, frame: Frame, now: float, naive: bool) -> None:
        doclet = record.doclet
        if frame.kind is FrameKind.UPDATE:
            assert isinstance(frame.payload, Update)
            for op in frame.payload.ops:
                result = doclet.doc.integrate(op)
                if result is IntegrationResult.BUFFERED and naive:
                    # Causally unready op: the observable form of a state
                    # mismatch the untagged mode cannot attribute.
                    self.naive_resend_armed = True
                elif result is IntegrationResult.APPLIED:
                    self._follow_author_cursor(doclet, op, now)
            record.previous_version = doclet.doc.version()
        elif frame.kind is FrameKind.AWARENESS:
            assert isinstance(frame.payload, Awareness)
            doclet.apply_awareness(
                AwarenessEntry(frame.payload.user, frame.payload.anchor, now)
            )
            if naive:
                # A cursor change it cannot attribute perturbs this session's
                # own cursor state: re-broadcast at the next tick.
                self.naive_resend_armed = True
            record.previous_version = doclet.doc.version()
        # SUBSCRIBE / SYNC_REQ / UNSUBSCRIBE / KEEPALIVE are server-bound;
        # a client receiving one ignores it.

    def _follow_author_cursor(self, doclet: Doclet, op: InsertOp | DeleteOp, now: float) -> None:
        # Receivers advance the author's cursor from the update itself; that
        # is why edits do not emit awareness frames. A tombstoned anchor
        # resolves to the nearest preceding visible position, so the delete
        # target works as-is.
        author = user_of_replica(op.id.replica)
        if author < 1 or author == self.user:
            return
        anchor: Anchor = op.id if isinstance(op, InsertOp) else op.target
        doclet.apply_awareness(AwarenessEntry(author, anchor, now))

    # ------------------------------------------------------------------ tick

    def tick(self, now_ms: Optional[float] = None) -> int:
        """Periodic housekeeping; call every tick interval. Returns frames sent."""
        now = self._now_ms() if now_ms is None else now_ms
        sent = 0
        if self.strategy is Strategy.PER_SOCKET:
            idle = [
                (doclet_id, rec.transport)
                for doclet_id, rec in self.records.items()
                if self._idle_for_keepalive(rec.transport, now)
            ]
        else:
            shared = self.records[self.active_doclet].transport
            tag = self.active_doclet if self.strategy is Strategy.MUX else ""
            idle = [(tag, shared)] if self._idle_for_keepalive(shared, now) else []
        for tag, transport in idle:
            self._send(transport, Frame(FrameKind.KEEPALIVE, tag))
            sent += 1
        if self.strategy is Strategy.NAIVE and self.naive_resend_armed:
            record = self.records[self.active_doclet]
            self._send(
                record.transport,
                Frame(FrameKind.AWARENESS, "", Awareness(self.user, record.previous_cursor)),
            )
            sent += 1
            self.naive_resend_armed = False
        return sent

    def _idle_for_keepalive(self, transport: Transport, now: float) -> bool:
        last = self._last_send.get(id(transport))
        return last is None or now - last >= self.keepalive_ms

    # --------------------------------------------------------------- queries

    def snapshot_metrics(self) -> MetricsCounters:
        return self.metrics.copy()

    def text_of(self, doclet_id: str) -> str:
        return self._record(doclet_id).doclet.doc.text

    def version_of(self, doclet_id: str) -> dict[int, int]:
        return self._record(doclet_id).doclet.doc.version()
