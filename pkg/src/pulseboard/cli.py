"""Command line interface.

Exit codes: 0 success, 1 invariant violation, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ServerConfig, load_config
from .errors import (
    MalformedTraceError,
    NoFramesError,
    PulseboardError,
    ScenarioError,
)
from .signals import gen_bvp, gen_resp, gen_sc, write_trace_jsonl
from .sim import load_scenario, run_scenario
from .trace import check_trace, emit_display_csv, read_trace


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulseboard")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the live session server")
    p_serve.add_argument("--config", help="JSON config file")
    p_serve.add_argument("--port", type=int, help="raw-socket port override")
    p_serve.add_argument("--ws-port", type=int, help="websocket port override")
    p_serve.add_argument("--ui-dir", help="serve static UI files from this directory")
    p_serve.add_argument("--record", help="record a session trace to this file")

    p_sim = sub.add_parser("simulate", help="run a scripted scenario deterministically")
    p_sim.add_argument("--scenario", required=True, help="bundled scenario name or JSON path")
    p_sim.add_argument("--seed", type=int, help="seed override")
    p_sim.add_argument("--record", help="write the trace (with frame records) to this file")

    p_check = sub.add_parser("check", help="audit a recorded trace offline")
    p_check.add_argument("trace", help="trace file (JSON lines)")

    p_emit = sub.add_parser("emit-display", help="reconstruct ambient display values as CSV")
    p_emit.add_argument("trace", help="trace file (JSON lines)")
    p_emit.add_argument("--participant", required=True)
    p_emit.add_argument("--out", help="output CSV path (default: stdout)")

    p_gen = sub.add_parser("gen", help="generate a synthetic signal trace file")
    p_gen.add_argument("--channel", required=True, choices=["bvp", "resp", "sc"])
    p_gen.add_argument("--duration", type=float, default=60.0)
    p_gen.add_argument("--rate", type=float, help="sampling rate override (Hz)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--hr", type=float, default=60.0, help="bvp: heart rate (bpm)")
    p_gen.add_argument("--breaths", type=float, default=12.0, help="resp: breaths per minute")
    p_gen.add_argument("--tonic", type=float, default=2.0, help="sc: tonic level (uS)")
    p_gen.add_argument(
        "--scr-event",
        action="append",
        default=[],
        metavar="T:AMP",
        help="sc: phasic event, seconds:amplitude (repeatable)",
    )
    p_gen.add_argument("--out", required=True)
    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    import asyncio

    from .transport import serve_forever

    config = load_config(args.config) if args.config else ServerConfig()
    if args.port is not None:
        config.port = args.port
    if args.ws_port is not None:
        config.ws_port = args.ws_port
    try:
        asyncio.run(serve_forever(config, ui_dir=args.ui_dir, record_path=args.record))
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    result = run_scenario(scenario, record=bool(args.record), out_path=args.record)
    print(f"scenario {scenario.name!r} seed {scenario.seed}: phases {' -> '.join(['INTRO'] + result.phases_seen)}")
    session = result.hub.sessions.get(scenario.sid)
    if session is not None:
        print(f"sequenced messages: {session.seq}; errors observed: {len(result.errors_seen)}")
    if result.trace_path:
        print(f"trace written to {result.trace_path}")
    for line in result.report:
        print(f"VIOLATION {line}", file=sys.stderr)
    return result.exit_status


def _cmd_check(args: argparse.Namespace) -> int:
    trace = read_trace(args.trace)
    report = check_trace(trace)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def _cmd_emit_display(args: argparse.Namespace) -> int:
    trace = read_trace(args.trace)
    csv_text = emit_display_csv(trace, args.participant)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.channel == "bvp":
        rate = args.rate if args.rate is not None else 32.0
        trace = gen_bvp(args.hr, args.duration, rate, args.seed)
    elif args.channel == "resp":
        rate = args.rate if args.rate is not None else 8.0
        trace = gen_resp(args.breaths, args.duration, rate, args.seed)
    else:
        rate = args.rate if args.rate is not None else 4.0
        events = []
        for spec in args.scr_event:
            try:
                t_s, amp = spec.split(":")
                events.append((float(t_s), float(amp)))
            except ValueError:
                raise ScenarioError(f"bad --scr-event {spec!r}, expected T:AMP")
        trace = gen_sc(args.tonic, events, args.duration, rate, args.seed)
    write_trace_jsonl(trace, args.out)
    print(f"wrote {trace.n} samples to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "serve": _cmd_serve,
        "simulate": _cmd_simulate,
        "check": _cmd_check,
        "emit-display": _cmd_emit_display,
        "gen": _cmd_gen,
    }
    try:
        return handlers[args.command](args)
    except (MalformedTraceError, ScenarioError, NoFramesError) as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 2
    except PulseboardError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
