#!/usr/bin/env python3
"""Compare active labeling against random mixing at an equal budget split.

For each seed, both strategies label the same simulated pool under the same
budget; the script reports per-seed label accuracy and downstream learner
accuracy, plus win counts. This is the experiment behind the active-vs-random
acceptance gate, exposed for exploration.

Usage:
    python scripts/run_active_vs_random.py [--budget 176] [--seeds 20]
"""
import argparse
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from make_pools import pool_lines

from labelbudget.costs import BudgetLedger, CostSchedule, TaskKind, usd
from labelbudget.labelers import HumanOracleLabeler, SimCalibration, SimulatedLlmLabeler
from labelbudget.learner import HashedFeatureSpec, TrainParams, accuracy, train
from labelbudget.pool import load_pool
from labelbudget.strategies import Strategy, StrategyConfig, plan, run_plan
from labelbudget.supervision import assemble

BINARY = ["Negative", "Positive"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--budget", default="176", help="dollars, split 50/50")
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--pool-size", type=int, default=2000)
    parser.add_argument("--floor", type=float, default=0.55)
    parser.add_argument("--ceiling", type=float, default=0.95)
    parser.add_argument("--shots", type=int, default=2)
    args = parser.parse_args()

    schedule = CostSchedule()
    train_pool = load_pool(
        pool_lines(args.pool_size, seed=100, prefix="ex"),
        TaskKind.CLASSIFICATION, BINARY, cap=max(args.pool_size, 5120),
    )
    eval_pool = load_pool(
        pool_lines(1000, seed=200, prefix="ev"),
        TaskKind.CLASSIFICATION, BINARY, cap=5120,
    )
    calibration = SimCalibration(args.floor, args.ceiling)
    spec = HashedFeatureSpec(dimension=2**14)
    params = TrainParams(learning_rate=0.5, epochs=8, batch_size=32)
    budget = usd(args.budget)

    print(f"pool {len(train_pool)}, budget ${args.budget}, "
          f"calibration [{args.floor}, {args.ceiling}], {args.seeds} seeds")
    print(f"{'seed':>4}  {'label acc (act/rnd)':>22}  {'learner acc (act/rnd)':>22}")
    label_wins = learner_wins = 0
    for seed in range(args.seeds):
        outcome = {}
        for strategy in (Strategy.ACTIVE, Strategy.RANDOM_MIX):
            config = StrategyConfig(strategy=strategy, human_ratio=Fraction(1, 2),
                                    shots=args.shots, seed=seed)
            human = HumanOracleLabeler(schedule, TaskKind.CLASSIFICATION)
            the_plan = plan(budget, train_pool, config, schedule, human)
            llm = SimulatedLlmLabeler(calibration, BINARY, seed, schedule,
                                      args.shots, train_pool.avg_tokens)
            result = run_plan(the_plan, train_pool, llm, human, BudgetLedger(budget))
            sset = assemble(result.records.values(), alpha=1.0)
            texts = {i: train_pool.by_id(i).text for i in result.records}
            model = train(sset, texts, spec, params, seed=seed, label_vocabulary=BINARY)
            outcome[strategy] = (result.label_accuracy(train_pool), accuracy(model, eval_pool))
        active, rnd = outcome[Strategy.ACTIVE], outcome[Strategy.RANDOM_MIX]
        label_wins += active[0] > rnd[0]
        learner_wins += active[1] > rnd[1]
        print(f"{seed:>4}  {active[0]:.4f} / {rnd[0]:.4f}        "
              f"{active[1]:.4f} / {rnd[1]:.4f}")
    print(f"\nactive wins on label accuracy:   {label_wins}/{args.seeds}")
    print(f"active wins on learner accuracy: {learner_wins}/{args.seeds}")


if __name__ == "__main__":
    main()
