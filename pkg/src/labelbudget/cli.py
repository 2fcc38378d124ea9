"""Command-line driver.

Subcommands: costs, label, sweep, deciles, train, eval.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .config import load_run_config
from .costs import CostSchedule, dollars_str, usd
from .errors import InfeasiblePlan, LabelBudgetError
from .labelers import Source
from .learner import accuracy, load_model, save_model, train
from .metrics import decile_accuracy, spearman_rank_correlation
from .profiles import cost_table
from .reporting import EvaluationReport, ReportRow, decile_metric_name
from .strategies import Strategy, StrategyConfig
from .supervision import assemble, export_supervision, import_supervision
from .sweep import run_label_once, run_sweep


def _add_config_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, required=True, help="run config JSON")


def cmd_costs(args) -> int:
    schedule = CostSchedule()
    if args.config is not None:
        schedule = load_run_config(args.config).schedule
    sys.stdout.write(cost_table(schedule))
    return 0


def _default_ratio(strategy: Strategy) -> Fraction:
    if strategy is Strategy.HUMAN_ONLY:
        return Fraction(1)
    if strategy is Strategy.LLM_ONLY:
        return Fraction(0)
    return Fraction(1, 2)


def cmd_label(args) -> int:
    config = load_run_config(args.config)
    strategy = Strategy(args.strategy)
    ratio = Fraction(args.ratio) if args.ratio is not None else _default_ratio(strategy)
    shots = args.shots
    if shots is None:
        shots = 0 if strategy is Strategy.HUMAN_ONLY else config.strategy_grid.shots[0]
    strategy_config = StrategyConfig(
        strategy=strategy, human_ratio=ratio, shots=shots, seed=args.seed
    )
    pool = config.task.load_train_pool()
    budget = usd(args.budget)
    try:
        result = run_label_once(config, pool, strategy_config, budget)
    except (InfeasiblePlan, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    sset = assemble(result.records.values(), alpha=args.alpha)
    texts = None
    if args.inline_texts:
        texts = {i: pool.by_id(i).text for i in result.records}
    with open(args.out, "w", encoding="utf-8", newline="") as sink:
        export_supervision(sset, sink, texts=texts)

    counts = sset.counts_by_source()
    spend = result.spend_by_kind
    print(f"strategy        {strategy.value}")
    print(f"budget          ${dollars_str(budget)}")
    print(
        f"records         {len(result.records)} "
        f"(llm {counts[Source.LLM]}, human {counts[Source.HUMAN]})"
    )
    print(
        "spend           $"
        + dollars_str(sum(spend.values()))
        + f" (llm ${dollars_str(spend.get('llm', 0))},"
        + f" human ${dollars_str(spend.get('human', 0))} incl. demos)"
    )
    label_acc = result.label_accuracy(pool)
    if label_acc is not None:
        print(f"label_accuracy  {label_acc:.6f}")
    if result.failed_ids:
        print(f"failed          {len(result.failed_ids)}")
    print(f"wrote           {args.out}")
    return 0


def cmd_sweep(args) -> int:
    config = load_run_config(args.config)
    try:
        report = run_sweep(config, allow_live_spend=args.allow_live_spend,
                           workers=args.workers)
    except LabelBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report.write_csv(args.out)
    print(
        f"wrote {args.out}: {len(report.cell_rows())} cell rows, "
        f"{len(report.aggregate_rows())} aggregate rows"
    )
    return 0


def _gold_from_pool_file(path: Path) -> dict[str, str]:
    gold = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("gold_label") is not None:
                gold[record["id"]] = record["gold_label"]
    return gold


def cmd_deciles(args) -> int:
    with open(args.labeled, encoding="utf-8") as handle:
        sset, _ = import_supervision(handle)
    gold = _gold_from_pool_file(args.pool)
    records = [record for record, _ in sset.records]
    llm_records = [r for r in records if r.source is Source.LLM]
    missing = [r.id for r in llm_records if r.id not in gold]
    if missing:
        print(f"error: no gold label for {missing[0]!r} (and {len(missing) - 1} more)",
              file=sys.stderr)
        return 2
    try:
        deciles = decile_accuracy(records, gold)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("decile  accuracy")
    for k, value in enumerate(deciles, start=1):
        print(f"{k:<7d} {value:.6f}")
    correctness = [1.0 if r.label == gold[r.id] else 0.0 for r in llm_records]
    confidences = [r.confidence for r in llm_records]
    rho = spearman_rank_correlation(confidences, correctness)
    print(f"spearman(confidence, correct) = {rho:.6f}")
    if args.out is not None:
        spent = sum(r.cost for r in llm_records)
        report = EvaluationReport(
            rows=[
                ReportRow(strategy="", shots=None, human_ratio=None, alpha=None,
                          budget=spent, seed=None,
                          metric=decile_metric_name(k), value=value)
                for k, value in enumerate(deciles, start=1)
            ]
        )
        report.write_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    with open(args.labeled, encoding="utf-8") as handle:
        sset, inline_texts = import_supervision(handle)
    if inline_texts and len(inline_texts) == len(sset):
        texts = inline_texts
    else:
        pool = config.task.load_train_pool()
        texts = {record.id: pool.by_id(record.id).text for record, _ in sset.records}
    params = config.learner.grid[args.grid_index]
    model = train(
        sset,
        texts,
        config.learner.spec,
        params,
        seed=args.seed,
        label_vocabulary=config.task.label_vocabulary,
        dev_fraction=config.learner.dev_fraction,
    )
    save_model(model, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    config = load_run_config(args.config)
    eval_pool = config.task.load_eval_pool()
    value = accuracy(model, eval_pool)
    print(f"accuracy {value:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelbudget",
        description="Budget-constrained labeling: split a budget between "
        "human and LLM labelers, relabel low-confidence items, train a "
        "weighted downstream classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    costs = sub.add_parser("costs", help="print the per-dataset cost table")
    costs.add_argument("--config", type=Path, default=None)
    costs.set_defaults(fn=cmd_costs)

    label = sub.add_parser("label", help="run one labeling strategy at one budget")
    _add_config_argument(label)
    label.add_argument("--strategy", required=True,
                       choices=[s.value for s in Strategy])
    label.add_argument("--budget", required=True, help="budget in dollars")
    label.add_argument("--shots", type=int, default=None)
    label.add_argument("--ratio", default=None, help="human share of the budget")
    label.add_argument("--alpha", type=float, default=1.0)
    label.add_argument("--seed", type=int, default=0)
    label.add_argument("--out", type=Path, required=True)
    label.add_argument("--inline-texts", action="store_true",
                       help="copy example texts into the labeled-set file")
    label.set_defaults(fn=cmd_label)

    sweep = sub.add_parser("sweep", help="run the full strategy/budget grid")
    _add_config_argument(sweep)
    sweep.add_argument("--out", type=Path, required=True)
    sweep.add_argument("--allow-live-spend", action="store_true",
                       help="required before a sweep may touch a live backend")
    sweep.add_argument("--workers", type=int, default=1,
                       help="parallel cell jobs (report order is unchanged)")
    sweep.set_defaults(fn=cmd_sweep)

    deciles = sub.add_parser("deciles", help="confidence-decile accuracy table")
    deciles.add_argument("--labeled", type=Path, required=True)
    deciles.add_argument("--pool", type=Path, required=True,
                         help="pool file carrying gold labels")
    deciles.add_argument("--out", type=Path, default=None,
                         help="also write the decile table as a report CSV")
    deciles.set_defaults(fn=cmd_deciles)

    train_cmd = sub.add_parser("train", help="train the downstream classifier")
    _add_config_argument(train_cmd)
    train_cmd.add_argument("--labeled", type=Path, required=True)
    train_cmd.add_argument("--out", type=Path, required=True)
    train_cmd.add_argument("--grid-index", type=int, default=0)
    train_cmd.add_argument("--seed", type=int, default=0)
    train_cmd.set_defaults(fn=cmd_train)

    eval_cmd = sub.add_parser("eval", help="evaluate a checkpoint on the eval pool")
    _add_config_argument(eval_cmd)
    eval_cmd.add_argument("--model", type=Path, required=True)
    eval_cmd.set_defaults(fn=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
