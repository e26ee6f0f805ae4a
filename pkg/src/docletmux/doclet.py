"""A doclet: one independently synchronized document plus per-user presence.

Presence (cursor) entries live beside the document, not inside the CRDT:
cursors are ephemeral, last-writer-wins per user, and never affect document
convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

from .crdt import Anchor, OpId, TextDoc

MAX_DOCLET_ID_BYTES = 255
DEFAULT_AWARENESS_TTL_MS = 30_000


def validate_doclet_id(doclet_id: str) -> str:
    """A doclet id is a non-empty UTF-8 string of at most 255 bytes."""
    if not doclet_id:
        raise ValueError("doclet id must be non-empty")
    if len(doclet_id.encode("utf-8")) > MAX_DOCLET_ID_BYTES:
        raise ValueError("doclet id exceeds 255 UTF-8 bytes")
    return doclet_id


@dataclass(frozen=True)
class AwarenessEntry:
    user: int
    anchor: Optional[Anchor]  # None: the user has no cursor in this doclet
    last_seen_ms: float


class AwarenessApplied(NamedTuple):
    changed: bool  # anchor differs from what was stored for this user
    coerced: bool  # anchor was unresolvable and stored as absent


class Doclet:
    def __init__(self, doclet_id: str, doc: TextDoc):
        self.id = validate_doclet_id(doclet_id)
        self.doc = doc
        self.awareness: dict[int, AwarenessEntry] = {}

    def apply_awareness(self, entry: AwarenessEntry) -> AwarenessApplied:
        """Upsert a presence entry; last_seen is refreshed unconditionally.

        An anchor naming an insert this replica has never integrated is stored
        as absent rather than rejected (the update carrying it may simply not
        have arrived yet).
        """
        anchor = entry.anchor
        coerced = False
        if isinstance(anchor, OpId) and not self.doc.knows_insert(anchor):
            anchor = None
            coerced = True
        stored = self.awareness.get(entry.user)
        changed = stored is None or stored.anchor != anchor
        self.awareness[entry.user] = replace(entry, anchor=anchor)
        return AwarenessApplied(changed=changed, coerced=coerced)

    def expire_awareness(self, now_ms: float, ttl_ms: float = DEFAULT_AWARENESS_TTL_MS) -> list[int]:
        """Drop entries idle for longer than ttl_ms; returns the users removed."""
        if ttl_ms <= 0:
            raise ValueError("ttl_ms must be positive")
        removed = [
            user
            for user, entry in self.awareness.items()
            if now_ms - entry.last_seen_ms > ttl_ms
        ]
        for user in removed:
            del self.awareness[user]
        return removed

    def refresh_awareness(self, user: int, now_ms: float) -> bool:
        """Bump last_seen for an existing entry (keepalive path)."""
        entry = self.awareness.get(user)
        if entry is None:
            return False
        self.awareness[user] = replace(entry, last_seen_ms=now_ms)
        return True
