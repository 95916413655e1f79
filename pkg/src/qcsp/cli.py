"""Command-line front end: ``qcsp solve|validate|convert|generate|bench``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

from . import decomp, formats, oracle
from .model import InstanceError, validate_schedule

EXIT_OK = 0
EXIT_TIME_LIMIT = 2
EXIT_INPUT = 3
EXIT_INVALID = 4

_STATUS_CODE = {
    decomp.Status.OPTIMAL: EXIT_OK,
    decomp.Status.TIME_LIMIT: EXIT_TIME_LIMIT,
    decomp.Status.INFEASIBLE_INPUT: EXIT_INPUT,
}


def _err(msg: str) -> None:
    print(f"qcsp: {msg}", file=sys.stderr)


def _default_time_limit():
    raw = os.environ.get("QCSP_TIME_LIMIT")
    if not raw:
        return None
    try:
        value = float(raw)
    except ValueError:
        raise SystemExit(f"qcsp: QCSP_TIME_LIMIT must be a number, got {raw!r}")
    return value if value > 0 else None


def _positive(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _load(path) -> formats.Instance:
    """Parse an instance file; ParseError and OSError propagate."""
    return formats.read_instance(path)


def _oracle_report(inst, limits: bool) -> decomp.SolveReport:
    t0 = time.perf_counter()
    report = decomp.SolveReport(decomp.Status.INFEASIBLE_INPUT)
    reason = decomp.check_input(inst, limits)
    if reason:
        report.message = reason
    else:
        res = oracle.brute_force(inst, limits)
        report.status = decomp.Status.OPTIMAL
        report.routing, report.schedule = res.routing, res.schedule
        report.lb = report.ub = res.makespan
    report.wall_time = time.perf_counter() - t0
    return report


def solve_instance(inst, algorithm: str, time_limit, limits: bool) -> decomp.SolveReport:
    if algorithm == "oracle":
        return _oracle_report(inst, limits)
    return decomp.run(inst, decomp.DriverConfig(time_limit=time_limit, limits=limits))


def cmd_solve(args) -> int:
    try:
        inst = _load(args.path)
    except formats.ParseError as exc:
        _err(f"{args.path}: {exc}")
        return EXIT_INPUT
    except (OSError, InstanceError) as exc:
        _err(f"{args.path}: {exc}")
        return EXIT_INPUT
    try:
        report = solve_instance(inst, args.algorithm, args.time_limit, not args.no_limits)
    except (oracle.OracleLimitError, InstanceError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    timing = not args.no_timing
    if args.emit == "structured":
        sys.stdout.write(json.dumps(decomp.report_dict(report, inst, timing), indent=2) + "\n")
    else:
        sys.stdout.write(decomp.format_report(report, inst, timing))
    return _STATUS_CODE[report.status]


def cmd_validate(args) -> int:
    try:
        inst = _load(args.instance)
        routing, schedule = formats.parse_solution(Path(args.schedule).read_text())
        violations = validate_schedule(inst, routing, schedule, not args.no_limits)
    except (formats.ParseError, InstanceError, OSError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    for v in violations:
        print(v)
    if violations:
        return EXIT_INVALID
    print("valid")
    return EXIT_OK


def cmd_convert(args) -> int:
    try:
        text = Path(args.path).read_text()
        inst = formats.convert(text, args.source)
    except (formats.ParseError, InstanceError, OSError, ValueError) as exc:
        _err(f"{args.path}: {exc}")
        return EXIT_INPUT
    sys.stdout.write(formats.format_instance(inst))
    return EXIT_OK


def cmd_generate(args) -> int:
    params = oracle.GenParams(
        n=args.n,
        q=args.q,
        bays=args.bays,
        safety=args.safety,
        travel_unit=args.travel,
        tasks_per_bay=args.tasks_per_bay,
        prec_density=args.prec_density,
        nsim_density=args.nsim_density,
        processing=tuple(args.processing),
        ready=tuple(args.ready),
        free_end=args.free_end,
        seed=args.seed,
    )
    try:
        inst = oracle.generate(params)
    except InstanceError as exc:
        _err(str(exc))
        return EXIT_INPUT
    sys.stdout.write(formats.format_instance(inst, comment=f"generated seed={args.seed}"))
    return EXIT_OK


BENCH_COLUMNS = ["name", "status", "W", "lb", "ub", "time_ms", "iterations", "cuts"]


def _bench_row(path: Path, args) -> list[str]:
    try:
        inst = _load(path)
        report = solve_instance(inst, args.algorithm, args.time_limit, not args.no_limits)
    except (formats.ParseError, InstanceError, OSError, oracle.OracleLimitError) as exc:
        return [path.name, "ERROR", "-", "-", "-", "-", "-", str(exc).replace("\t", " ")]

    def num(x):
        return "-" if x is None or x == math.inf else str(int(x))

    ms = "-" if args.no_timing else str(round(report.wall_time * 1000))
    return [
        path.name,
        report.status.value,
        num(report.W) if report.status is decomp.Status.OPTIMAL else "-",
        num(report.lb),
        num(report.ub),
        ms,
        str(report.iterations),
        str(sum(report.cuts_added.values())),
    ]


def cmd_bench(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        _err(f"{root}: not a directory")
        return EXIT_INPUT
    files = sorted((p for p in root.iterdir() if p.is_file() and not p.name.startswith(".")), key=lambda p: p.name)
    print("\t".join(BENCH_COLUMNS))
    for path in files:
        print("\t".join(_bench_row(path, args)), flush=True)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcsp", description="Exact quay crane scheduling with container groups.")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--time-limit", type=_positive, default=_default_time_limit(), help="seconds (default: $QCSP_TIME_LIMIT or none)")
        p.add_argument("--algorithm", choices=["decomp", "oracle"], default="decomp")
        p.add_argument("--no-limits", action="store_true", help="ignore crane bay ranges")
        p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("path")
    solver_flags(p)
    p.add_argument("--emit", choices=["text", "structured"], default="text")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check a schedule against an instance")
    p.add_argument("instance")
    p.add_argument("schedule")
    p.add_argument("--no-limits", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", help="rewrite an instance in the canonical format")
    p.add_argument("path")
    p.add_argument("--from", dest="source", choices=["canonical", "kim", "meisel"], default="canonical")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("generate", help="write a random instance")
    g = oracle.GenParams()
    p.add_argument("--n", type=int, default=g.n)
    p.add_argument("--q", type=int, default=g.q)
    p.add_argument("--bays", type=int, default=g.bays)
    p.add_argument("--safety", type=int, default=g.safety)
    p.add_argument("--travel", type=int, default=g.travel_unit)
    p.add_argument("--tasks-per-bay", type=float, default=g.tasks_per_bay)
    p.add_argument("--prec-density", type=float, default=g.prec_density)
    p.add_argument("--nsim-density", type=float, default=g.nsim_density)
    p.add_argument("--processing", type=int, nargs=2, default=list(g.processing), metavar=("MIN", "MAX"))
    p.add_argument("--ready", type=int, nargs=2, default=list(g.ready), metavar=("MIN", "MAX"))
    p.add_argument("--free-end", type=float, default=g.free_end)
    p.add_argument("--seed", type=int, default=g.seed)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="solve every instance file in a directory")
    p.add_argument("dir")
    solver_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
