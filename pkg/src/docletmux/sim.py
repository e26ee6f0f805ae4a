"""Deterministic, virtual-clock benchmark of the three strategies.

One relay and U scripted clients run on a single event scheduler; nothing
sleeps and nothing depends on wall time, so a 5 second scenario executes in
milliseconds and a (config, seed) pair always produces bit-identical results.

Workloads:

- idle: every user places a cursor once in their active doclet, then only
  periodic housekeeping runs.
- typing: after a one second warm-up, the configured typists append
  characters to their active doclet at a fixed rate.

Client 0 is the measuring client; a reading is the number of frames it sent
plus received within one virtual second, taken after the warm-up second.
"""

from __future__ import annotations

import heapq
import random
import string
from dataclasses import dataclass, field
from typing import Callable, Optional

from .relay import RelayServer
from .report import ComparisonRow, ScenarioResult
from .session import Session, Strategy

WARMUP_S = 1


class VirtualClock:
    """Event-driven clock; ties are broken by scheduling order."""

    def __init__(self) -> None:
        self._now = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0

    def now_ms(self) -> float:
        return self._now

    def at(self, t_ms: float, fn: Callable[[], None]) -> None:
        if t_ms < self._now:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._heap, (t_ms, self._seq, fn))
        self._seq += 1

    def after(self, delay_ms: float, fn: Callable[[], None]) -> None:
        self.at(self._now + delay_ms, fn)

    def run_until(self, end_ms: float) -> None:
        """Process every event strictly before end_ms."""
        while self._heap and self._heap[0][0] < end_ms:
            t, _, fn = heapq.heappop(self._heap)
            self._now = t
            fn()
        self._now = end_ms


@dataclass
class ScenarioConfig:
    strategy: Strategy = Strategy.MUX
    editors: int = 1
    users: int = 2
    phase: str = "idle"  # "idle" | "typing"
    typing_chars_per_sec: float = 6.0
    typists: int = 1
    tick_ms: float = 10.0
    keepalive_ms: float = 1000.0
    duration_s: int = 5
    readings: int = 5
    latency_ms: float = 0.0
    seed: int = 42

    def validate(self) -> None:
        if self.phase not in ("idle", "typing"):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.editors < 1 or self.users < 1:
            raise ValueError("editors and users must be at least 1")
        if not 0 <= self.typists <= self.users:
            raise ValueError("typists must be between 0 and users")
        if self.typing_chars_per_sec <= 0 or self.tick_ms <= 0 or self.keepalive_ms <= 0:
            raise ValueError("rates must be positive")
        if self.duration_s < self.readings:
            raise ValueError("duration must cover the requested readings")
        if self.latency_ms < 0:
            raise ValueError("latency must be non-negative")

    @property
    def doclet_ids(self) -> list[str]:
        return [f"d{i}" for i in range(self.editors)]


class _SimTransport:
    def __init__(self, client: "_SimClient", via: Optional[str]):
        self._client = client
        self._via = via
        self.conn_id = client.relay.handle_connect(self._to_client, user=client.user)

    def send(self, data: bytes) -> None:
        client = self._client
        client.clock.after(
            client.latency_ms, lambda: client.relay.handle_frame(self.conn_id, data)
        )

    def close(self) -> None:
        self._client.relay.handle_disconnect(self.conn_id)

    def _to_client(self, data: bytes) -> None:
        client = self._client
        client.clock.after(client.latency_ms, lambda: client.deliver(data, self._via))


class _SimClient:
    def __init__(
        self,
        clock: VirtualClock,
        relay: RelayServer,
        cfg: ScenarioConfig,
        user: int,
    ):
        self.clock = clock
        self.relay = relay
        self.user = user
        self.latency_ms = cfg.latency_ms
        self.session: Optional[Session] = None
        self._pre_session: list[tuple[bytes, Optional[str]]] = []
        self.session = None
        session = Session(
            cfg.strategy,
            user,
            cfg.doclet_ids,
            lambda via: _SimTransport(self, via),
            now_ms=clock.now_ms,
            keepalive_ms=cfg.keepalive_ms,
        )
        self.session = session
        for data, via in self._pre_session:
            session.on_frame(data, via=via)
        self._pre_session.clear()

    def deliver(self, data: bytes, via: Optional[str]) -> None:
        if self.session is None:
            self._pre_session.append((data, via))
        else:
            self.session.on_frame(data, via=via)

    def type_char(self, doclet_id: str, ch: str) -> None:
        assert self.session is not None
        doc = self.session.records[doclet_id].doclet.doc
        self.session.local_insert(doclet_id, doc.visible_length(), ch)


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    cfg.validate()
    clock = VirtualClock()
    relay = RelayServer(default_doclet=cfg.doclet_ids[0], now_ms=clock.now_ms)
    clients = [_SimClient(clock, relay, cfg, user=u + 1) for u in range(cfg.users)]
    end_ms = (WARMUP_S + cfg.duration_s) * 1000.0
    rng = random.Random(cfg.seed)

    # Initial activation: user u works in editor (u mod E).
    for index, client in enumerate(clients):
        active = cfg.doclet_ids[index % cfg.editors]
        clock.at(0.0, lambda c=client, d=active: c.session.on_local_cursor(d, 0))

    if cfg.phase == "typing":
        period = 1000.0 / cfg.typing_chars_per_sec
        strokes = int(cfg.typing_chars_per_sec * cfg.duration_s)
        for index in range(cfg.typists):
            client = clients[index]
            active = cfg.doclet_ids[index % cfg.editors]
            for k in range(strokes):
                ch = rng.choice(string.ascii_lowercase)
                clock.at(
                    WARMUP_S * 1000.0 + k * period,
                    lambda c=client, d=active, ch=ch: c.type_char(d, ch),
                )

    for client in clients:
        t = 0.0
        while t < end_ms:
            clock.at(t, lambda c=client: c.session.tick())
            t += cfg.tick_ms

    clock.run_until(end_ms)

    metrics = clients[0].session.snapshot_metrics()
    readings = [metrics.per_second.get(WARMUP_S + i, 0) for i in range(cfg.readings)]
    return ScenarioResult.from_readings(
        readings,
        frames_sent=metrics.frames_sent,
        frames_received=metrics.frames_received,
        connections=metrics.connections_opened,
    )


@dataclass
class ConnectionReport:
    editors: int
    per_socket: int
    mux: int
    naive: int


@dataclass
class CompareOutput:
    rows: list[ComparisonRow] = field(default_factory=list)
    connections: list[ConnectionReport] = field(default_factory=list)


def run_compare(
    editors_list: list[int],
    phases: list[str],
    base: Optional[ScenarioConfig] = None,
) -> CompareOutput:
    """The full reduction matrix: untagged baseline vs multiplexed, per
    (phase, editor-count), plus a connection-count report per strategy."""
    base = base or ScenarioConfig()
    out = CompareOutput()
    for phase in phases:
        for editors in editors_list:
            results = {}
            for strategy in (Strategy.NAIVE, Strategy.MUX):
                cfg = ScenarioConfig(
                    strategy=strategy,
                    editors=editors,
                    users=base.users,
                    phase=phase,
                    typing_chars_per_sec=base.typing_chars_per_sec,
                    typists=base.typists,
                    tick_ms=base.tick_ms,
                    keepalive_ms=base.keepalive_ms,
                    duration_s=base.duration_s,
                    readings=base.readings,
                    latency_ms=base.latency_ms,
                    seed=base.seed,
                )
                results[strategy] = run_scenario(cfg)
            label = f"{phase}, {editors} editor{'s' if editors != 1 else ''}"
            out.rows.append(
                ComparisonRow(
                    label=label,
                    non_optimized=results[Strategy.NAIVE],
                    optimized=results[Strategy.MUX],
                )
            )
    for editors in editors_list:
        counts = {}
        for strategy in (Strategy.PER_SOCKET, Strategy.MUX, Strategy.NAIVE):
            cfg = ScenarioConfig(
                strategy=strategy,
                editors=editors,
                users=base.users,
                phase="idle",
                tick_ms=base.tick_ms,
                keepalive_ms=base.keepalive_ms,
                duration_s=base.duration_s,
                readings=base.readings,
                seed=base.seed,
            )
            counts[strategy] = run_scenario(cfg).connections
        out.connections.append(
            ConnectionReport(
                editors=editors,
                per_socket=counts[Strategy.PER_SOCKET],
                mux=counts[Strategy.MUX],
                naive=counts[Strategy.NAIVE],
            )
        )
    return out
