"""Command-line front end.

Exit codes: 0 everything holds / accepted / passed, 1 violations or failing
sweep points, 2 unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import behavior_model, conformance, time_model, uplink_sim
from .behavior_model import constraint_tag, constraint_to_dict
from .spec_io import (
    SpecFormatError,
    dumps_report,
    parse_spec,
    parse_trace,
    parse_uplink_config,
    read_json,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2

INPUT_ERRORS = (
    OSError,
    SpecFormatError,
    time_model.TimeModelError,
    behavior_model.BehaviorError,
    conformance.ConformanceError,
    uplink_sim.UplinkError,
    ValueError,
    TypeError,
)


def _error(exc: BaseException) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


def cmd_check(spec_path: str) -> int:
    try:
        spec = parse_spec(read_json(spec_path))
        time_report = time_model.check_time_invariants(spec.time)
        if not time_report.ok:
            # no closure exists for a broken time system; report what is wrong with it
            report = {"all_hold": False, "time": time_report.to_dict(), "intervals": {}, "constraints": []}
        else:
            behavior = spec.behavior()
            report = behavior_model.check_all(behavior).to_dict()
        if spec.graph is not None:
            report["graph_constraints"] = [
                {"type": constraint_tag(c), **constraint_to_dict(c)}
                for c in conformance.classify_graph(spec.graph, spec.kinds)
            ]
    except INPUT_ERRORS as exc:
        return _error(exc)
    sys.stdout.write(dumps_report(report))
    return EXIT_OK if report["all_hold"] else EXIT_VIOLATION


def cmd_trace(spec_path: str, trace_path: str) -> int:
    try:
        behavior = parse_spec(read_json(spec_path)).behavior()
        trace = parse_trace(read_json(trace_path))
        verdict = conformance.check_trace(behavior, trace)
    except INPUT_ERRORS as exc:
        return _error(exc)
    sys.stdout.write(dumps_report(verdict.to_dict()))
    return EXIT_OK if verdict.accepted else EXIT_VIOLATION


def cmd_uplink(config_path: str | None, report_path: str | None = None, dump_dir: str | None = None) -> int:
    try:
        cfg = parse_uplink_config(read_json(config_path)) if config_path else uplink_sim.UplinkConfig()
        report = uplink_sim.run_uplink_check(cfg)
        text = dumps_report(report.to_dict())
        if report_path:
            Path(report_path).write_text(text, encoding="utf-8")
        if dump_dir:
            uplink_sim.dump_waveforms(cfg, dump_dir)
    except INPUT_ERRORS as exc:
        return _error(exc)
    if not report_path:
        sys.stdout.write(text)
    for p in report.failing():
        print(f"FAIL {p.kind.value} {p.gain_db:g} dB: amp {p.amp_gain_db:.4f} dB, "
              f"adc {p.adc_gain_db:.4f} dB, clipped {p.clipped}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmodp-uplink", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="check a behavior spec's time model and constraints")
    c.add_argument("spec")

    t = sub.add_parser("trace", help="check an observed trace against a behavior spec")
    t.add_argument("spec")
    t.add_argument("trace")

    u = sub.add_parser("uplink", help="run the uplink gain sweep")
    u.add_argument("config", nargs="?", help="JSON config; defaults are used when omitted")
    u.add_argument("--report", metavar="PATH", help="write the JSON report here instead of stdout")
    u.add_argument("--dump-waveforms", metavar="DIR", help="write per-stage CSV waveforms into DIR")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        if args.command == "check":
            return cmd_check(args.spec)
        if args.command == "trace":
            return cmd_trace(args.spec, args.trace)
        return cmd_uplink(args.config, args.report, args.dump_waveforms)
    except Exception as exc:  # exit-code contract: anything unexpected is still a 2
        return _error(exc)


if __name__ == "__main__":
    raise SystemExit(main())
