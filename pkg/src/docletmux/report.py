"""Benchmark reporting: per-second readings, averaging, 5 s extrapolation,
percentage decrease, and table emission.

Percentage decrease is truncated (not rounded) to two decimals: that is the
convention every self-consistent reference figure follows, e.g.
(181 -> 5) = 97.23 and (210 -> 7) = 96.66.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


def average_per_second(readings: Sequence[float]) -> float:
    if not readings:
        raise ValueError("no readings to average")
    return sum(readings) / len(readings)


def extrapolate(mean: float, seconds: float = 5) -> float:
    if mean < 0:
        raise ValueError("mean must be non-negative")
    return mean * seconds


def percentage_decrease(before: float, after: float) -> float:
    if before <= 0:
        raise ValueError("baseline must be positive")
    frac = Fraction(before - after) / Fraction(before)
    return math.floor(frac * 10000) / 100.0


@dataclass(frozen=True)
class ScenarioResult:
    readings: tuple[int, ...]
    average: float
    extrapolated_5s: float
    frames_sent: int
    frames_received: int
    connections: int

    @classmethod
    def from_readings(
        cls, readings: Sequence[int], frames_sent: int, frames_received: int, connections: int
    ) -> "ScenarioResult":
        mean = average_per_second(readings)
        return cls(
            readings=tuple(readings),
            average=mean,
            extrapolated_5s=extrapolate(mean),
            frames_sent=frames_sent,
            frames_received=frames_received,
            connections=connections,
        )


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    non_optimized: ScenarioResult
    optimized: ScenarioResult

    @property
    def percentage_decrease(self) -> float:
        return percentage_decrease(
            self.non_optimized.extrapolated_5s, self.optimized.extrapolated_5s
        )


_COLUMNS = ("Per Second Measurement", "Non-Optimized Editor", "Optimized Editor")


def _num(value: float) -> str:
    return f"{value:g}"


def _table_lines(row: ComparisonRow) -> list[tuple[str, str, str]]:
    lines = [
        (f"Reading #{i + 1}", _num(non), _num(opt))
        for i, (non, opt) in enumerate(
            zip(row.non_optimized.readings, row.optimized.readings)
        )
    ]
    lines.append(
        (
            "Average Per Second Measurement",
            _num(row.non_optimized.average),
            _num(row.optimized.average),
        )
    )
    lines.append(
        (
            "Extrapolated to 5 seconds",
            _num(row.non_optimized.extrapolated_5s),
            _num(row.optimized.extrapolated_5s),
        )
    )
    lines.append(("Percentage Decrease", f"{row.percentage_decrease:.2f}%", ""))
    return lines


def emit_tables(rows: Sequence[ComparisonRow], format: str = "markdown") -> str:
    if format == "markdown":
        return _emit_markdown(rows)
    if format == "csv":
        return _emit_csv(rows)
    raise ValueError(f"unknown format {format!r}")


def _emit_markdown(rows: Sequence[ComparisonRow]) -> str:
    header = f"| {' | '.join(_COLUMNS)} |"
    separator = f"|{'|'.join(' --- ' for _ in _COLUMNS)}|"
    if not rows:
        return f"{header}\n{separator}\n"
    chunks = []
    for row in rows:
        body = "\n".join(f"| {a} | {b} | {c} |" for a, b, c in _table_lines(row))
        chunks.append(f"### {row.label}\n\n{header}\n{separator}\n{body}\n")
    return "\n".join(chunks)


def _emit_csv(rows: Sequence[ComparisonRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("scenario",) + _COLUMNS)
    for row in rows:
        for label, non, opt in _table_lines(row):
            writer.writerow((row.label, label, non, opt))
    return buf.getvalue()
