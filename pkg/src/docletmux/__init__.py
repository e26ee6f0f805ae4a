"""Collaborative document sync with many independent doclets per connection.

Layers, bottom up:

- ``crdt``: convergent sequence CRDT (character granularity, tombstones).
- ``doclet``: a synchronized document plus its presence table.
- ``wire``: binary frame codec; every frame carries a doclet id.
- ``session``: client handler implementing the naive, per-socket, and
  multiplexed strategies.
- ``relay``: server holding one authoritative hub per doclet.
- ``sim`` / ``report``: deterministic benchmark and its tables.
"""

from .crdt import (
    HEAD,
    Anchor,
    DeleteOp,
    InsertOp,
    IntegrationResult,
    Op,
    OpId,
    TextDoc,
)
from .doclet import AwarenessEntry, Doclet
from .relay import DocletHub, RelayServer
from .report import (
    ComparisonRow,
    ScenarioResult,
    average_per_second,
    emit_tables,
    extrapolate,
    percentage_decrease,
)
from .session import MetricsCounters, Session, Strategy
from .sim import ScenarioConfig, run_compare, run_scenario
from .wire import Frame, FrameKind, decode_frame, encode_frame

__version__ = "0.1.0"

__all__ = [
    "HEAD",
    "Anchor",
    "AwarenessEntry",
    "ComparisonRow",
    "DeleteOp",
    "Doclet",
    "DocletHub",
    "Frame",
    "FrameKind",
    "InsertOp",
    "IntegrationResult",
    "MetricsCounters",
    "Op",
    "OpId",
    "RelayServer",
    "ScenarioConfig",
    "ScenarioResult",
    "Session",
    "Strategy",
    "TextDoc",
    "average_per_second",
    "decode_frame",
    "emit_tables",
    "encode_frame",
    "extrapolate",
    "percentage_decrease",
    "run_compare",
    "run_scenario",
]
