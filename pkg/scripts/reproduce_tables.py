"""Run the shipped table configs and print estimates next to the published values.

    python scripts/reproduce_tables.py                 # all three tables, 10^5 reps each
    python scripts/reproduce_tables.py --reps 20000 table4_inflator.ini
"""
import argparse
import csv
import dataclasses
from pathlib import Path

from blockrar.config import parse_config
from blockrar.engine import run_replications
from blockrar.report import format_report

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TABLES = ("table3_bar.ini", "table4_inflator.ini", "tableB1_fixed.ini")


def load_targets():
    with open(CONFIGS / "targets.csv", newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return {(r["config"], r["scenario_id"], r["method"]): r for r in rows}


def cell(est, target):
    if est is None:
        return f"{'-':>13}"
    return f"{100 * est:5.1f} ({target:>4})"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", default=TABLES)
    ap.add_argument("--reps", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", help="also write the raw report here")
    args = ap.parse_args()

    targets = load_targets()
    reports = []
    for config in args.configs:
        print(f"\n{config}: estimate (published), error | power")
        for s in parse_config(CONFIGS / config):
            if args.reps:
                s = dataclasses.replace(s, reps=args.reps)
            report = run_replications(s, workers=args.workers)
            reports.append(report)
            deltas = ", ".join(f"{d:g}" for d in s.deltas)
            parts = []
            for r in report.rows:
                t = targets.get((config, s.name, r.method), {})
                parts.append(
                    f"{r.method:>12}: {cell(r.oc.fwer, t.get('error_pct', ''))} | {cell(r.oc.power, t.get('power_pct', ''))}"
                )
            print(f"{s.name} ({deltas})  [{report.wall_time:.1f}s]")
            for p in parts:
                print("   ", p)
    if args.csv:
        Path(args.csv).write_text(format_report(reports))


if __name__ == "__main__":
    main()
