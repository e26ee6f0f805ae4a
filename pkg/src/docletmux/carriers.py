"""Network carriers for the relay: TCP with length-prefixed frames, and a
self-contained RFC 6455 WebSocket endpoint at /collab carrying one frame per
binary message.

Both carriers run on a single asyncio loop, so relay state is mutated from
one thread and frame handling stays totally ordered per hub.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import logging
import os
import struct
import urllib.parse
from pathlib import Path
from typing import Optional

from .relay import RelayServer

log = logging.getLogger("docletmux.relay")

LENGTH_PREFIX = struct.Struct(">I")
MAX_FRAME_BYTES = 16 * 1024 * 1024
WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
WS_PATH = "/collab"

_OP_CONT = 0x0
_OP_TEXT = 0x1
_OP_BINARY = 0x2
_OP_CLOSE = 0x8
_OP_PING = 0x9
_OP_PONG = 0xA


# ------------------------------------------------------------------------ tcp


async def serve_tcp(relay: RelayServer, host: str, port: int) -> asyncio.AbstractServer:
    async def handler(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        def send(data: bytes) -> None:
            writer.write(LENGTH_PREFIX.pack(len(data)) + data)

        conn_id = relay.handle_connect(send)
        log.info("tcp connection %d from %s", conn_id, writer.get_extra_info("peername"))
        try:
            while True:
                header = await reader.readexactly(LENGTH_PREFIX.size)
                (length,) = LENGTH_PREFIX.unpack(header)
                if length > MAX_FRAME_BYTES:
                    log.warning("conn %d: oversized frame (%d bytes)", conn_id, length)
                    break
                payload = await reader.readexactly(length)
                relay.handle_frame(conn_id, payload)
        except (asyncio.IncompleteReadError, ConnectionResetError):
            pass
        finally:
            relay.handle_disconnect(conn_id)
            writer.close()
            log.info("tcp connection %d closed", conn_id)

    return await asyncio.start_server(handler, host, port)


# ------------------------------------------------------------------- websocket


class WsProtocolError(Exception):
    pass


async def _read_ws_message(
    reader: asyncio.StreamReader, writer: asyncio.StreamWriter
) -> Optional[bytes]:
    """Read one complete (possibly fragmented) message; None on close.

    Control frames (ping/pong) are answered inline so they may interleave
    with a fragmented message without losing it.
    """
    message = bytearray()
    while True:
        b0, b1 = await reader.readexactly(2)
        fin = bool(b0 & 0x80)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", await reader.readexactly(2))
        elif length == 127:
            (length,) = struct.unpack(">Q", await reader.readexactly(8))
        if length > MAX_FRAME_BYTES:
            raise WsProtocolError("frame too large")
        if not masked:
            # Clients must mask; anything else is a protocol violation.
            raise WsProtocolError("unmasked client frame")
        mask = await reader.readexactly(4)
        payload = bytearray(await reader.readexactly(length))
        for i in range(length):
            payload[i] ^= mask[i % 4]

        if opcode == _OP_CLOSE:
            return None
        if opcode == _OP_PING:
            writer.write(ws_server_frame(_OP_PONG, bytes(payload)))
            continue
        if opcode == _OP_PONG:
            continue
        if opcode in (_OP_BINARY, _OP_TEXT, _OP_CONT):
            message += payload
            if fin:
                return bytes(message)
            continue
        raise WsProtocolError(f"unsupported opcode {opcode}")


def ws_server_frame(opcode: int, payload: bytes) -> bytes:
    header = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header.append(n)
    elif n < 2**16:
        header.append(126)
        header += struct.pack(">H", n)
    else:
        header.append(127)
        header += struct.pack(">Q", n)
    return bytes(header) + payload


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


async def _ws_handshake(
    reader: asyncio.StreamReader, writer: asyncio.StreamWriter
) -> Optional[int]:
    """Perform the HTTP upgrade; returns the user id from the query, if any."""
    request_line = (await reader.readline()).decode("latin-1").rstrip("\r\n")
    parts = request_line.split(" ")
    if len(parts) != 3 or parts[0] != "GET":
        raise WsProtocolError(f"bad request line: {request_line!r}")
    target = urllib.parse.urlsplit(parts[1])
    headers: dict[str, str] = {}
    while True:
        line = (await reader.readline()).decode("latin-1").rstrip("\r\n")
        if not line:
            break
        name, _, value = line.partition(":")
        headers[name.strip().lower()] = value.strip()

    if target.path != WS_PATH:
        writer.write(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n\r\n")
        raise WsProtocolError(f"unknown path {target.path!r}")
    key = headers.get("sec-websocket-key")
    if headers.get("upgrade", "").lower() != "websocket" or not key:
        writer.write(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n")
        raise WsProtocolError("not a websocket upgrade")

    writer.write(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {ws_accept_key(key)}\r\n"
            "\r\n"
        ).encode("ascii")
    )
    await writer.drain()
    params = urllib.parse.parse_qs(target.query)
    if "user" in params:
        try:
            return int(params["user"][0])
        except ValueError:
            pass
    return None


async def serve_ws(relay: RelayServer, host: str, port: int) -> asyncio.AbstractServer:
    async def handler(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn_id = None
        try:
            user = await _ws_handshake(reader, writer)

            def send(data: bytes) -> None:
                writer.write(ws_server_frame(_OP_BINARY, data))

            conn_id = relay.handle_connect(send, user=user)
            log.info("ws connection %d (user=%s)", conn_id, user)
            while True:
                message = await _read_ws_message(reader, writer)
                if message is None:
                    writer.write(ws_server_frame(_OP_CLOSE, b""))
                    break
                relay.handle_frame(conn_id, message)
        except (
            WsProtocolError,
            asyncio.IncompleteReadError,
            ConnectionResetError,
        ) as exc:
            log.debug("ws connection ended: %s", exc)
        finally:
            if conn_id is not None:
                relay.handle_disconnect(conn_id)
                log.info("ws connection %d closed", conn_id)
            writer.close()

    return await asyncio.start_server(handler, host, port)


# ------------------------------------------------------- snapshots and metrics


def snapshot_filename(doclet_id: str) -> str:
    return urllib.parse.quote(doclet_id, safe="") + ".dsn1"


def write_snapshots(relay: RelayServer, directory: Path) -> list[Path]:
    """Write one atomic snapshot file per hub."""
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for doclet_id in sorted(relay.hubs):
        data = relay.snapshot(doclet_id)
        path = directory / snapshot_filename(doclet_id)
        tmp = path.with_suffix(".dsn1.tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        written.append(path)
    return written


def load_snapshots(relay: RelayServer, directory: Path) -> list[str]:
    loaded = []
    if not directory.is_dir():
        return loaded
    for path in sorted(directory.glob("*.dsn1")):
        hub = relay.restore_hub(path.read_bytes())
        loaded.append(hub.doclet.id)
    return loaded


async def snapshot_loop(relay: RelayServer, directory: Path, interval_s: float) -> None:
    while True:
        await asyncio.sleep(interval_s)
        paths = write_snapshots(relay, directory)
        log.info("wrote %d snapshot(s)", len(paths))


async def awareness_expiry_loop(relay: RelayServer, interval_s: float = 5.0) -> None:
    while True:
        await asyncio.sleep(interval_s)
        removed = relay.expire_awareness()
        for doclet_id, users in removed.items():
            log.info("expired awareness for users %s in %s", users, doclet_id)


async def serve_metrics(relay: RelayServer, host: str, port: int) -> asyncio.AbstractServer:
    """Tiny HTTP responder: any request gets the plain-text counter dump."""

    async def handler(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            await reader.readline()
            body = relay.metrics_text().encode("utf-8")
            writer.write(
                b"HTTP/1.1 200 OK\r\nContent-Type: text/plain; charset=utf-8\r\n"
                + f"Content-Length: {len(body)}\r\n\r\n".encode("ascii")
                + body
            )
            await writer.drain()
        finally:
            writer.close()

    return await asyncio.start_server(handler, host, port)
