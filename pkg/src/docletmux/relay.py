"""Relay server: one connection per client, one hub per doclet.

The server keeps a full replica of every doclet (replica id 0, which never
generates ops) so that late joiners can be answered from the hub without
involving peers. Updates and awareness are rebroadcast verbatim — the exact
bytes received — to every subscriber except the sender.

Frames arriving with an *empty* doclet id (the untagged client mode) are
routed to a configured default doclet and rebroadcast untagged: the server
has no way to know which shared state they belong to, which is exactly the
defect the tagged mode removes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .crdt import DeleteOp, InsertOp, TextDoc
from .doclet import DEFAULT_AWARENESS_TTL_MS, AwarenessEntry, Doclet
from .wire import (
    Awareness,
    Frame,
    FrameDecodeError,
    FrameKind,
    SyncRequest,
    Update,
    decode_frame,
    decode_ops,
    decode_varint,
    encode_frame,
    encode_op,
    encode_varint,
)

SERVER_REPLICA = 0
SNAPSHOT_MAGIC = b"DSN1"


class SnapshotError(ValueError):
    pass


@dataclass
class DocletHub:
    doclet: Doclet
    subscribers: set[int] = field(default_factory=set)


@dataclass
class ConnectionRecord:
    conn_id: int
    send: Callable[[bytes], None]
    user: Optional[int] = None
    subscribed: set[str] = field(default_factory=set)


@dataclass
class HubMetrics:
    frames_in: int = 0
    frames_out: int = 0


def _real_now_ms() -> float:
    return time.monotonic() * 1000.0


class RelayServer:
    def __init__(
        self,
        *,
        default_doclet: Optional[str] = None,
        awareness_ttl_ms: float = DEFAULT_AWARENESS_TTL_MS,
        now_ms: Callable[[], float] = _real_now_ms,
    ):
        self.hubs: dict[str, DocletHub] = {}
        self.connections: dict[int, ConnectionRecord] = {}
        self.awareness_ttl_ms = awareness_ttl_ms
        self._configured_default = default_doclet
        self._first_hub: Optional[str] = None
        self._now_ms = now_ms
        self._next_conn_id = 1
        self.hub_metrics: dict[str, HubMetrics] = {}
        self.routing_errors = 0
        self.decode_errors = 0
        # First hub an op-producing replica was seen feeding; an op stream
        # that later shows up in a different hub is a cross-doclet leak.
        self.contamination = 0
        self._replica_home: dict[int, str] = {}

    # ------------------------------------------------------------ connections

    def handle_connect(self, send: Callable[[bytes], None], user: Optional[int] = None) -> int:
        conn_id = self._next_conn_id
        self._next_conn_id += 1
        self.connections[conn_id] = ConnectionRecord(conn_id, send, user)
        return conn_id

    def handle_disconnect(self, conn_id: int) -> None:
        record = self.connections.pop(conn_id, None)
        if record is None:
            return
        for doclet_id in record.subscribed:
            hub = self.hubs.get(doclet_id)
            if hub:
                hub.subscribers.discard(conn_id)

    # ----------------------------------------------------------------- frames

    def default_doclet(self) -> Optional[str]:
        return self._configured_default or self._first_hub

    def handle_frame(self, conn_id: int, data: bytes) -> list[tuple[int, bytes]]:
        """Process one inbound frame; returns the (conn, bytes) pairs sent."""
        conn = self.connections[conn_id]
        try:
            frame = decode_frame(data)
        except FrameDecodeError:
            self.decode_errors += 1
            return []

        doclet_id = frame.doclet or self.default_doclet()
        if not doclet_id:
            # Untagged frame and nothing to route it to yet.
            if frame.kind is FrameKind.KEEPALIVE:
                return []
            self.routing_errors += 1
            return []

        hub = self.hubs.get(doclet_id)
        if hub is None:
            if frame.kind is not FrameKind.SUBSCRIBE:
                self.routing_errors += 1
                return []
            hub = self._create_hub(doclet_id)
        self._metrics(doclet_id).frames_in += 1

        out: list[tuple[int, bytes]] = []
        if frame.kind is FrameKind.SUBSCRIBE:
            hub.subscribers.add(conn_id)
            conn.subscribed.add(doclet_id)
        elif frame.kind is FrameKind.SYNC_REQ:
            assert isinstance(frame.payload, SyncRequest)
            diff = hub.doclet.doc.ops_since(frame.payload.to_version())
            if diff:
                reply = encode_frame(
                    Frame(FrameKind.UPDATE, frame.doclet, Update(tuple(diff)))
                )
                out.append((conn_id, reply))
        elif frame.kind is FrameKind.UPDATE:
            assert isinstance(frame.payload, Update)
            for op in frame.payload.ops:
                home = self._replica_home.setdefault(op.id.replica, doclet_id)
                if home != doclet_id:
                    self.contamination += 1
                hub.doclet.doc.integrate(op)
            out.extend(self._rebroadcast(hub, conn_id, data))
        elif frame.kind is FrameKind.AWARENESS:
            assert isinstance(frame.payload, Awareness)
            if conn.user is None:
                conn.user = frame.payload.user
            hub.doclet.apply_awareness(
                AwarenessEntry(frame.payload.user, frame.payload.anchor, self._now_ms())
            )
            out.extend(self._rebroadcast(hub, conn_id, data))
        elif frame.kind is FrameKind.UNSUBSCRIBE:
            hub.subscribers.discard(conn_id)
            conn.subscribed.discard(doclet_id)
        elif frame.kind is FrameKind.KEEPALIVE:
            if conn.user is not None:
                hub.doclet.refresh_awareness(conn.user, self._now_ms())

        self._metrics(doclet_id).frames_out += len(out)
        self._deliver(out)
        return out

    def _rebroadcast(self, hub: DocletHub, sender: int, data: bytes) -> list[tuple[int, bytes]]:
        return [
            (conn_id, data)
            for conn_id in sorted(hub.subscribers)
            if conn_id != sender and conn_id in self.connections
        ]

    def _deliver(self, out: list[tuple[int, bytes]]) -> None:
        for conn_id, data in out:
            self.connections[conn_id].send(data)

    def _create_hub(self, doclet_id: str) -> DocletHub:
        hub = DocletHub(Doclet(doclet_id, TextDoc(SERVER_REPLICA)))
        self.hubs[doclet_id] = hub
        if self._first_hub is None:
            self._first_hub = doclet_id
        return hub

    def _metrics(self, doclet_id: str) -> HubMetrics:
        return self.hub_metrics.setdefault(doclet_id, HubMetrics())

    # ------------------------------------------------------------ maintenance

    def expire_awareness(self, now_ms: Optional[float] = None) -> dict[str, list[int]]:
        now = self._now_ms() if now_ms is None else now_ms
        removed = {}
        for doclet_id, hub in self.hubs.items():
            gone = hub.doclet.expire_awareness(now, self.awareness_ttl_ms)
            if gone:
                removed[doclet_id] = gone
        return removed

    def metrics_text(self) -> str:
        """Plain-text counter dump, one counter per line."""
        lines = [
            f"decode_errors {self.decode_errors}",
            f"routing_errors {self.routing_errors}",
            f"contamination {self.contamination}",
            f"connections {len(self.connections)}",
        ]
        for doclet_id in sorted(self.hub_metrics):
            m = self.hub_metrics[doclet_id]
            lines.append(f"frames_in{{doclet={doclet_id}}} {m.frames_in}")
            lines.append(f"frames_out{{doclet={doclet_id}}} {m.frames_out}")
        return "\n".join(lines) + "\n"

    # -------------------------------------------------------------- snapshots

    def snapshot(self, doclet_id: str) -> bytes:
        """Serialize a hub: magic, doclet id, then every integrated op.

        Inserts are written in ascending (lamport, replica, seq) order so each
        origin precedes its dependants; deletes carry no timestamp and are
        written last (the reader's pending buffer would absorb any order).
        """
        hub = self.hubs[doclet_id]
        ops = hub.doclet.doc.all_ops()
        inserts = sorted(
            (op for op in ops if isinstance(op, InsertOp)),
            key=lambda op: (op.lamport, op.id.replica, op.id.seq),
        )
        deletes = sorted(
            (op for op in ops if isinstance(op, DeleteOp)),
            key=lambda op: (op.id.replica, op.id.seq),
        )
        id_bytes = doclet_id.encode("utf-8")
        out = bytearray(SNAPSHOT_MAGIC)
        out += encode_varint(len(id_bytes))
        out += id_bytes
        out += encode_varint(len(inserts) + len(deletes))
        for op in inserts + deletes:
            out += encode_op(op)
        return bytes(out)

    @staticmethod
    def restore(data: bytes) -> DocletHub:
        if data[:4] != SNAPSHOT_MAGIC:
            raise SnapshotError("bad snapshot magic")
        try:
            body = data[4:]
            id_len, consumed = decode_varint(body)
            id_end = consumed + id_len
            if id_end > len(body):
                raise SnapshotError("truncated snapshot id")
            doclet_id = body[consumed:id_end].decode("utf-8")
            ops = decode_ops(body[id_end:])
        except (FrameDecodeError, UnicodeDecodeError) as exc:
            raise SnapshotError(f"corrupt snapshot: {exc}") from exc
        doc = TextDoc(SERVER_REPLICA)
        for op in ops:
            doc.integrate(op)
        if doc.pending_count():
            raise SnapshotError("snapshot contains causally incomplete ops")
        return DocletHub(Doclet(doclet_id, doc))

    def restore_hub(self, data: bytes) -> DocletHub:
        hub = RelayServer.restore(data)
        self.hubs[hub.doclet.id] = hub
        if self._first_hub is None:
            self._first_hub = hub.doclet.id
        return hub
