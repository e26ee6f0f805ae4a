"""Binary frame codec. One frame per transport message.

Layout (all integers unsigned LEB128 unless noted):

    frame     = kind:u8  id_len:varint  doclet_id:utf8[id_len]  payload
    SUBSCRIBE / UNSUBSCRIBE / KEEPALIVE payloads are empty.
    SYNC_REQ  = count:varint  (replica:varint seq:varint)*count
    UPDATE    = count:varint  op*count
    op        = 0x00 insert | 0x01 delete
    insert    = replica seq lamport anchor codepoint     (all varint but anchor)
    delete    = replica seq target_replica target_seq
    anchor    = 0x00 (head) | 0x01 replica seq
    AWARENESS = user:varint  0x00 (absent) | 0x01 (head) | 0x02 replica seq

The doclet id may be empty on the wire: that is how the degraded
single-socket mode operates, and the whole point of tagging frames is that
the other modes never leave it empty. A message must decode completely;
trailing bytes are an error. Carriers that cannot preserve message
boundaries (plain TCP) add a 4-byte big-endian length prefix per frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

from .crdt import HEAD, Anchor, DeleteOp, InsertOp, Op, OpId
from .doclet import MAX_DOCLET_ID_BYTES

U64_MAX = 2**64 - 1
MAX_VARINT_BYTES = 10


class FrameDecodeError(ValueError):
    pass


class FrameKind(IntEnum):
    SUBSCRIBE = 0x01
    SYNC_REQ = 0x02
    UPDATE = 0x03
    AWARENESS = 0x04
    UNSUBSCRIBE = 0x05
    KEEPALIVE = 0x06


@dataclass(frozen=True)
class SyncRequest:
    """Version-vector entries, wire order preserved."""

    entries: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_version(cls, version: dict[int, int]) -> "SyncRequest":
        return cls(tuple(sorted(version.items())))

    def to_version(self) -> dict[int, int]:
        return dict(self.entries)


@dataclass(frozen=True)
class Update:
    ops: tuple[Op, ...] = ()


@dataclass(frozen=True)
class Awareness:
    user: int
    anchor: Optional[Anchor]  # None encodes "no cursor"


Payload = Union[SyncRequest, Update, Awareness, None]

_PAYLOAD_TYPES = {
    FrameKind.SUBSCRIBE: type(None),
    FrameKind.SYNC_REQ: SyncRequest,
    FrameKind.UPDATE: Update,
    FrameKind.AWARENESS: Awareness,
    FrameKind.UNSUBSCRIBE: type(None),
    FrameKind.KEEPALIVE: type(None),
}


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    doclet: str = ""
    payload: Payload = None


# --------------------------------------------------------------------- varint


def encode_varint(n: int) -> bytes:
    """Unsigned LEB128: 7 data bits per byte, low bits first."""
    if not 0 <= n <= U64_MAX:
        raise ValueError(f"varint out of range: {n}")
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Returns (value, bytes consumed from offset)."""
    result = 0
    shift = 0
    consumed = 0
    while True:
        if offset + consumed >= len(data):
            raise FrameDecodeError("truncated varint")
        if consumed >= MAX_VARINT_BYTES:
            raise FrameDecodeError("varint longer than 10 bytes")
        byte = data[offset + consumed]
        result |= (byte & 0x7F) << shift
        consumed += 1
        if not byte & 0x80:
            break
        shift += 7
    if result > U64_MAX:
        raise FrameDecodeError("varint overflows 64 bits")
    return result, consumed


class _Reader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def u8(self) -> int:
        if self._pos >= len(self._data):
            raise FrameDecodeError("truncated frame")
        b = self._data[self._pos]
        self._pos += 1
        return b

    def varint(self) -> int:
        value, consumed = decode_varint(self._data, self._pos)
        self._pos += consumed
        return value

    def raw(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise FrameDecodeError("truncated frame")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise FrameDecodeError(
                f"{len(self._data) - self._pos} trailing bytes after frame"
            )


# ---------------------------------------------------------------------- frame


def encode_frame(frame: Frame) -> bytes:
    kind = FrameKind(frame.kind)
    if not isinstance(frame.payload, _PAYLOAD_TYPES[kind]):
        raise ValueError(f"{kind.name} frame with {type(frame.payload).__name__} payload")
    id_bytes = frame.doclet.encode("utf-8")
    if len(id_bytes) > MAX_DOCLET_ID_BYTES:
        raise ValueError("doclet id exceeds 255 UTF-8 bytes")
    out = bytearray([kind])
    out += encode_varint(len(id_bytes))
    out += id_bytes
    if isinstance(frame.payload, SyncRequest):
        out += encode_varint(len(frame.payload.entries))
        for replica, seq in frame.payload.entries:
            out += encode_varint(replica)
            out += encode_varint(seq)
    elif isinstance(frame.payload, Update):
        out += encode_varint(len(frame.payload.ops))
        for op in frame.payload.ops:
            out += encode_op(op)
    elif isinstance(frame.payload, Awareness):
        out += encode_varint(frame.payload.user)
        anchor = frame.payload.anchor
        if anchor is None:
            out.append(0x00)
        elif anchor is HEAD:
            out.append(0x01)
        else:
            out.append(0x02)
            out += encode_varint(anchor.replica)
            out += encode_varint(anchor.seq)
    return bytes(out)


def decode_frame(data: bytes) -> Frame:
    r = _Reader(data)
    kind_byte = r.u8()
    try:
        kind = FrameKind(kind_byte)
    except ValueError:
        raise FrameDecodeError(f"unknown frame kind 0x{kind_byte:02x}") from None
    id_len = r.varint()
    if id_len > MAX_DOCLET_ID_BYTES:
        raise FrameDecodeError("doclet id exceeds 255 bytes")
    try:
        doclet = r.raw(id_len).decode("utf-8")
    except UnicodeDecodeError:
        raise FrameDecodeError("doclet id is not valid UTF-8") from None

    payload: Payload = None
    if kind is FrameKind.SYNC_REQ:
        count = r.varint()
        payload = SyncRequest(tuple((r.varint(), r.varint()) for _ in range(count)))
    elif kind is FrameKind.UPDATE:
        count = r.varint()
        payload = Update(tuple(decode_op(r) for _ in range(count)))
    elif kind is FrameKind.AWARENESS:
        user = r.varint()
        tag = r.u8()
        if tag == 0x00:
            anchor: Optional[Anchor] = None
        elif tag == 0x01:
            anchor = HEAD
        elif tag == 0x02:
            anchor = OpId(r.varint(), r.varint())
        else:
            raise FrameDecodeError(f"unknown awareness anchor tag 0x{tag:02x}")
        payload = Awareness(user, anchor)
    r.expect_end()
    return Frame(kind, doclet, payload)


# ------------------------------------------------------------------------ ops

_OP_INSERT = 0x00
_OP_DELETE = 0x01
_UNICODE_MAX = 0x10FFFF


def encode_op(op: Op) -> bytes:
    out = bytearray()
    if isinstance(op, InsertOp):
        out.append(_OP_INSERT)
        out += encode_varint(op.id.replica)
        out += encode_varint(op.id.seq)
        out += encode_varint(op.lamport)
        if op.origin is HEAD:
            out.append(0x00)
        else:
            out.append(0x01)
            out += encode_varint(op.origin.replica)
            out += encode_varint(op.origin.seq)
        out += encode_varint(ord(op.ch))
    elif isinstance(op, DeleteOp):
        out.append(_OP_DELETE)
        out += encode_varint(op.id.replica)
        out += encode_varint(op.id.seq)
        out += encode_varint(op.target.replica)
        out += encode_varint(op.target.seq)
    else:
        raise TypeError(f"not an op: {op!r}")
    return bytes(out)


def decode_op(r: _Reader) -> Op:
    op_kind = r.u8()
    if op_kind == _OP_INSERT:
        op_id = OpId(r.varint(), r.varint())
        lamport = r.varint()
        anchor_tag = r.u8()
        if anchor_tag == 0x00:
            origin: Anchor = HEAD
        elif anchor_tag == 0x01:
            origin = OpId(r.varint(), r.varint())
        else:
            raise FrameDecodeError(f"unknown anchor tag 0x{anchor_tag:02x}")
        codepoint = r.varint()
        if codepoint > _UNICODE_MAX or 0xD800 <= codepoint <= 0xDFFF:
            raise FrameDecodeError(f"invalid codepoint {codepoint}")
        return InsertOp(op_id, lamport, origin, chr(codepoint))
    if op_kind == _OP_DELETE:
        return DeleteOp(OpId(r.varint(), r.varint()), OpId(r.varint(), r.varint()))
    raise FrameDecodeError(f"unknown op kind 0x{op_kind:02x}")


def decode_ops(data: bytes) -> list[Op]:
    """Decode a bare op sequence (snapshot body)."""
    r = _Reader(data)
    count = r.varint()
    ops = [decode_op(r) for _ in range(count)]
    r.expect_end()
    return ops
