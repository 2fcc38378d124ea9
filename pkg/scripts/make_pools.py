#!/usr/bin/env python3
"""Generate a synthetic binary-sentiment pool pair plus a ready-to-run config.

Usage:
    python scripts/make_pools.py --out runs/demo [--train-size 2000] [--eval-size 500]
"""
import argparse
import json
import random
from pathlib import Path

POSITIVE_WORDS = ["good", "great", "lovely", "fine", "warm", "bright", "superb", "calm"]
NEGATIVE_WORDS = ["bad", "awful", "poor", "grim", "cold", "dull", "bleak", "harsh"]
NEUTRAL_WORDS = ["the", "a", "movie", "plot", "scene", "actor", "story", "sound"]


def pool_lines(n: int, seed: int, prefix: str, length=8, signal=0.7):
    rng = random.Random(seed)
    lines = []
    for i in range(n):
        label = "Positive" if rng.random() < 0.5 else "Negative"
        lexicon = POSITIVE_WORDS if label == "Positive" else NEGATIVE_WORDS
        words = [
            rng.choice(lexicon) if rng.random() < signal else rng.choice(NEUTRAL_WORDS)
            for _ in range(length)
        ]
        record = {"id": f"{prefix}{i:05d}", "text": " ".join(words), "gold_label": label}
        lines.append(json.dumps(record))
    return lines


def write_pool(path: Path, n: int, seed: int, prefix: str, length=8, signal=0.7):
    with open(path, "w", encoding="utf-8") as sink:
        for line in pool_lines(n, seed, prefix, length, signal):
            sink.write(line + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs/demo"))
    parser.add_argument("--train-size", type=int, default=2000)
    parser.add_argument("--eval-size", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--signal", type=float, default=0.4,
                        help="probability a word is class-indicative; lower is harder "
                        "and separates the strategies more")
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    write_pool(args.out / "train.jsonl", args.train_size, args.seed, "ex", signal=args.signal)
    write_pool(args.out / "eval.jsonl", args.eval_size, args.seed + 1, "ev", signal=args.signal)

    config = {
        "task": {
            "name": "synthetic-sentiment",
            "kind": "classification",
            "train_pool": "train.jsonl",
            "eval_pool": "eval.jsonl",
            "label_vocabulary": ["Negative", "Positive"],
            "pool_cap": max(args.train_size, 5120),
        },
        "strategies": {
            "strategies": ["human_only", "llm_only", "random_mix", "active"],
            "shots": [2, 4, 8],
            "human_ratios": [0.25, 0.5, 0.75],
        },
        "budgets": {"ladder": True},
        "seeds": [0, 1, 2],
        "alphas": [1, 3],
        "learner": {
            "dimension": 16384,
            "grid": [
                {"learning_rate": 0.5, "epochs": 8, "batch_size": 32},
                {"learning_rate": 0.1, "epochs": 8, "batch_size": 32},
            ],
        },
        "backend": {"mode": "simulated", "calibration": {"floor": 0.55, "ceiling": 0.95}},
    }
    config_path = args.out / "run.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    print(f"wrote {args.out}/train.jsonl, eval.jsonl, run.json")
    print(f"try: labelbudget sweep --config {config_path} --out {args.out}/report.csv")


if __name__ == "__main__":
    main()
