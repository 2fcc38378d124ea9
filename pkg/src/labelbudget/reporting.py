"""Evaluation report rows and canonical CSV emission.

Column order is fixed (strategy,shots,human_ratio,alpha,budget_dollars,seed,
metric,value), endings are LF, and metric values print with six decimal
places, so identical runs emit byte-identical files. Aggregate rows (mean and
standard deviation over seeds of the per-seed grid maximum) leave the
grid-dimension columns empty.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .costs import dollars_str

CSV_COLUMNS = (
    "strategy",
    "shots",
    "human_ratio",
    "alpha",
    "budget_dollars",
    "seed",
    "metric",
    "value",
)

METRIC_ACCURACY = "accuracy"
METRIC_ROUGE_L = "rouge_l"
METRIC_LABEL_ACCURACY = "label_accuracy"
METRIC_FAILED = "failed"


def decile_metric_name(k: int) -> str:
    if not 1 <= k <= 10:
        raise ValueError("decile index must be in 1..10")
    return f"decile_accuracy_{k}"


@dataclass(frozen=True)
class ReportRow:
    strategy: str
    shots: Optional[int]
    human_ratio: Optional[Fraction]
    alpha: Optional[float]
    budget: int  # micro-dollars
    seed: Optional[int]
    metric: str
    value: float

    def as_csv_fields(self) -> tuple[str, ...]:
        return (
            self.strategy,
            "" if self.shots is None else str(self.shots),
            "" if self.human_ratio is None else f"{float(self.human_ratio):g}",
            "" if self.alpha is None else f"{self.alpha:g}",
            dollars_str(self.budget),
            "" if self.seed is None else str(self.seed),
            self.metric,
            f"{self.value:.6f}",
        )


@dataclass
class EvaluationReport:
    rows: list[ReportRow]

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        lines.extend(",".join(row.as_csv_fields()) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as sink:
            sink.write(self.to_csv())

    def cell_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.seed is not None]

    def aggregate_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.seed is None]
