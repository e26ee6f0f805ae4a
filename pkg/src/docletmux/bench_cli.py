"""``bench`` command: run one scenario, or the full comparison matrix.

    bench --mode mux --editors 4 --phase typing
    bench compare --editors 1,2,4 --phases idle,typing
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .report import emit_tables
from .session import Strategy
from .sim import ScenarioConfig, run_compare, run_scenario

_MODES = {s.value: s for s in Strategy}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--users", type=int, default=2)
    parser.add_argument("--typing-rate", type=float, default=6.0,
                        help="characters per second per typist")
    parser.add_argument("--typists", type=int, default=1)
    parser.add_argument("--tick-ms", type=float, default=10.0)
    parser.add_argument("--keepalive-ms", type=float, default=1000.0)
    parser.add_argument("--duration-s", type=int, default=5)
    parser.add_argument("--readings", type=int, default=5)
    parser.add_argument("--latency-ms", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    parser.add_argument("--out", type=Path, default=None)


def build_run_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Strategy benchmark")
    parser.add_argument("--mode", choices=sorted(_MODES), default="mux")
    parser.add_argument("--editors", type=int, default=1)
    parser.add_argument("--phase", choices=("idle", "typing"), default="idle")
    _add_common(parser)
    return parser


def build_compare_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench compare", description="Full reduction matrix (naive vs mux)"
    )
    parser.add_argument("--editors", default="1,2,4",
                        help="comma-separated editor counts")
    parser.add_argument("--phases", default="idle,typing")
    _add_common(parser)
    return parser


def _config(args: argparse.Namespace, **overrides) -> ScenarioConfig:
    return ScenarioConfig(
        users=args.users,
        typing_chars_per_sec=args.typing_rate,
        typists=args.typists,
        tick_ms=args.tick_ms,
        keepalive_ms=args.keepalive_ms,
        duration_s=args.duration_s,
        readings=args.readings,
        latency_ms=args.latency_ms,
        seed=args.seed,
        **overrides,
    )


def _emit(text: str, out: Optional[Path]) -> None:
    if out:
        out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run_single(args: argparse.Namespace) -> int:
    cfg = _config(args, strategy=_MODES[args.mode], editors=args.editors, phase=args.phase)
    result = run_scenario(cfg)
    label = f"{args.mode}, {args.phase}, {args.editors} editor(s)"
    if args.format == "csv":
        lines = ["scenario,metric,value"]
        for i, reading in enumerate(result.readings):
            lines.append(f'"{label}",reading_{i + 1},{reading}')
        lines.append(f'"{label}",average,{result.average:g}')
        lines.append(f'"{label}",extrapolated_5s,{result.extrapolated_5s:g}')
        lines.append(f'"{label}",connections,{result.connections}')
        text = "\n".join(lines) + "\n"
    else:
        rows = "\n".join(
            f"| Reading #{i + 1} | {r} |" for i, r in enumerate(result.readings)
        )
        text = (
            f"### {label}\n\n"
            "| Per Second Measurement | Frames |\n| --- | --- |\n"
            f"{rows}\n"
            f"| Average Per Second Measurement | {result.average:g} |\n"
            f"| Extrapolated to 5 seconds | {result.extrapolated_5s:g} |\n"
            f"| Connections opened | {result.connections} |\n"
        )
    _emit(text, args.out)
    return 0


def run_comparison(args: argparse.Namespace) -> int:
    editors = [int(e) for e in args.editors.split(",") if e]
    phases = [p.strip() for p in args.phases.split(",") if p.strip()]
    base = _config(args, strategy=Strategy.MUX)
    out = run_compare(editors, phases, base)
    text = emit_tables(out.rows, args.format)
    if args.format == "csv":
        conn_lines = ["", "editors,per_socket_connections,mux_connections,naive_connections"]
        conn_lines += [
            f"{c.editors},{c.per_socket},{c.mux},{c.naive}" for c in out.connections
        ]
        text += "\n".join(conn_lines) + "\n"
    else:
        conn_rows = "\n".join(
            f"| {c.editors} | {c.per_socket} | {c.mux} | {c.naive} |"
            for c in out.connections
        )
        text += (
            "\n### Connections opened per client\n\n"
            "| Editors | per-socket | mux | naive |\n| --- | --- | --- | --- |\n"
            f"{conn_rows}\n"
        )
    _emit(text, args.out)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "compare":
        return run_comparison(build_compare_parser().parse_args(argv[1:]))
    return run_single(build_run_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
