#!/usr/bin/env python3
"""Run the full budget-ladder sweep on a generated pool and print the
per-strategy accuracy-versus-cost aggregates.

Usage:
    python scripts/make_pools.py --out runs/demo
    python scripts/run_ladder_sweep.py --config runs/demo/run.json --out runs/demo/report.csv
"""
import argparse
from collections import defaultdict
from pathlib import Path

from labelbudget.config import load_run_config
from labelbudget.costs import dollars_str
from labelbudget.sweep import run_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=Path, required=True)
    parser.add_argument("--out", type=Path, required=True)
    args = parser.parse_args()

    config = load_run_config(args.config)
    print(f"budgets: {[dollars_str(b, 2) for b in config.budgets()]}")
    report = run_sweep(config)
    report.write_csv(args.out)
    print(f"wrote {args.out} ({len(report.rows)} rows)\n")

    table = defaultdict(dict)
    for row in report.aggregate_rows():
        if row.metric.endswith("_max_mean"):
            table[row.budget][row.strategy] = row.value
    strategies = sorted({s for cells in table.values() for s in cells})
    header = "budget($)".ljust(12) + "".join(s.ljust(14) for s in strategies)
    print(header)
    for budget in sorted(table):
        cells = table[budget]
        line = dollars_str(budget, 2).ljust(12)
        for s in strategies:
            line += (f"{cells[s]:.4f}" if s in cells else "-").ljust(14)
        print(line)


if __name__ == "__main__":
    main()
