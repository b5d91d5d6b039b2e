"""Command-line entry point: ``blockrar run | analyze | weights``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, parse_analysis_config, parse_config
from .engine import run_replications
from .report import DataError, analyze_file, format_analysis, format_report

log = logging.getLogger("blockrar")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blockrar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate every scenario in a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--reps", type=int, help="override reps of every scenario")
    run.add_argument("--seed", type=lambda s: int(s, 0), help="override the master seed")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--scenario", action="append", help="only run these scenario ids")
    run.add_argument("--out", help="report CSV path (default: stdout)")

    for name, helptext in (
        ("analyze", "analyse a patient-level dataset"),
        ("weights", "print weights and statistics only"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("dataset")
        p.add_argument("--config", required=True)
        p.add_argument("--design", help="analysis section id (default: the first one)")
        p.add_argument("--method", choices=("new", "matching", "naive"), default="new")
        p.add_argument("--alpha", type=float)
        p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run(args) -> None:
    scenarios = parse_config(args.config)
    if args.scenario:
        wanted = set(args.scenario)
        scenarios = [s for s in scenarios if s.name in wanted]
        if missing := wanted - {s.name for s in scenarios}:
            raise ConfigError(f"no scenario(s) named {', '.join(sorted(missing))}")
    overrides = {k: v for k, v in (("reps", args.reps), ("seed", args.seed)) if v is not None}
    try:
        scenarios = [dataclasses.replace(s, **overrides) for s in scenarios]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    reports = []
    for s in scenarios:
        report = run_replications(s, workers=args.workers)
        log.info("%s: %d reps in %.1fs", s.name, s.reps, report.wall_time)
        reports.append(report)
    _emit(format_report(reports), args.out)


def _analyze(args, decisions: bool) -> None:
    designs = parse_analysis_config(args.config)
    if args.design:
        designs = [d for d in designs if d.name == args.design]
    if not designs:
        raise ConfigError(f"{args.config}: no matching [analysis.<id>] section")
    if args.alpha is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must be in (0, 1)")
    method = "naive" if args.method == "naive" else "matching"
    analysis = analyze_file(args.dataset, designs[0], method, args.alpha)
    _emit(format_analysis(analysis, decisions), args.out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"blockrar: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            _run(args)
        else:
            _analyze(args, decisions=args.command == "analyze")
    except (UsageError, ConfigError) as exc:
        print(f"blockrar: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError, ValueError) as exc:
        print(f"blockrar: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
