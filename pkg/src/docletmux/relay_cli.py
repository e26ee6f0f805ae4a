"""``relay`` command: run the sync server over a real carrier."""

from __future__ import annotations

import argparse
import asyncio
import logging
import signal
import sys
from pathlib import Path
from typing import Optional

from .carriers import (
    awareness_expiry_loop,
    load_snapshots,
    serve_metrics,
    serve_tcp,
    serve_ws,
    snapshot_loop,
)
from .relay import RelayServer

log = logging.getLogger("docletmux.relay")


def parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected addr:port, got {value!r}")
    return host, int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relay", description="Document sync relay server"
    )
    parser.add_argument("--listen", type=parse_listen, default=("127.0.0.1", 8765))
    parser.add_argument("--carrier", choices=("ws", "tcp"), default="ws")
    parser.add_argument("--default-doclet", default=None,
                        help="doclet that untagged frames are routed to")
    parser.add_argument("--snapshot-dir", type=Path, default=None)
    parser.add_argument("--snapshot-interval-s", type=float, default=30.0)
    parser.add_argument("--awareness-ttl-ms", type=float, default=30_000.0)
    parser.add_argument("--log-level", default="info",
                        choices=("debug", "info", "warning", "error"))
    parser.add_argument("--metrics-port", type=int, default=None)
    return parser


async def run(args: argparse.Namespace) -> None:
    relay = RelayServer(
        default_doclet=args.default_doclet,
        awareness_ttl_ms=args.awareness_ttl_ms,
    )
    if args.snapshot_dir:
        loaded = load_snapshots(relay, args.snapshot_dir)
        if loaded:
            log.info("restored %d doclet(s) from snapshots: %s", len(loaded), loaded)

    host, port = args.listen
    if args.carrier == "ws":
        server = await serve_ws(relay, host, port)
    else:
        server = await serve_tcp(relay, host, port)
    log.info("listening on %s:%d (%s), endpoint path /collab", host, port, args.carrier)

    tasks = [asyncio.create_task(awareness_expiry_loop(relay))]
    if args.snapshot_dir:
        tasks.append(
            asyncio.create_task(
                snapshot_loop(relay, args.snapshot_dir, args.snapshot_interval_s)
            )
        )
    metrics_server = None
    if args.metrics_port:
        metrics_server = await serve_metrics(relay, host, args.metrics_port)
        log.info("metrics on %s:%d", host, args.metrics_port)

    loop = asyncio.get_running_loop()
    if hasattr(signal, "SIGUSR1"):
        loop.add_signal_handler(
            signal.SIGUSR1, lambda: print(relay.metrics_text(), file=sys.stderr)
        )

    try:
        await server.serve_forever()
    finally:
        for task in tasks:
            task.cancel()
        if metrics_server:
            metrics_server.close()


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        asyncio.run(run(args))
    except KeyboardInterrupt:
        log.info("shutting down")
    return 0


if __name__ == "__main__":
    sys.exit(main())
