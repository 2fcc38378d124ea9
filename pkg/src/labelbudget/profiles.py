"""Built-in per-dataset cost profiles and the reference cost table.

Each profile carries a benchmark's average token count and task kind so the
`costs` subcommand can print per-shot LLM prices next to the human price.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .costs import (
    CostSchedule,
    TaskKind,
    as_fraction,
    human_label_cost,
    llm_label_cost,
    sig2_str,
)

NLG_SHOTS = (1, 2, 3)
NLU_SHOTS = (2, 4, 8)


@dataclass(frozen=True)
class DatasetCostProfile:
    name: str
    avg_tokens: Fraction
    task_kind: TaskKind

    @property
    def shot_options(self) -> tuple[int, ...]:
        return NLG_SHOTS if self.task_kind is TaskKind.GENERATION else NLU_SHOTS


def _profile(name: str, avg_tokens, kind: TaskKind) -> DatasetCostProfile:
    return DatasetCostProfile(name=name, avg_tokens=as_fraction(avg_tokens), task_kind=kind)


BENCHMARK_PROFILES: tuple[DatasetCostProfile, ...] = (
    _profile("Gigaword", 31, TaskKind.GENERATION),
    _profile("SQuAD", 126, TaskKind.GENERATION),
    _profile("XSum", 382, TaskKind.GENERATION),
    _profile("SST-2", "19.3", TaskKind.CLASSIFICATION),
    _profile("CB", "62.7", TaskKind.CLASSIFICATION),
    _profile("TREC", "10.2", TaskKind.CLASSIFICATION),
    _profile("AGNews", "31.6", TaskKind.CLASSIFICATION),
    _profile("DBPedia", "47.3", TaskKind.CLASSIFICATION),
    _profile("RTE", "52.4", TaskKind.CLASSIFICATION),
)


def profile_costs(
    profile: DatasetCostProfile, schedule: CostSchedule
) -> tuple[list[int], int]:
    """Per-shot LLM costs and the human cost, in micro-dollars."""
    llm = [
        llm_label_cost(profile.avg_tokens, shots, schedule)
        for shots in profile.shot_options
    ]
    human = human_label_cost(profile.avg_tokens, profile.task_kind, schedule)
    return llm, human


def cost_table(
    schedule: CostSchedule = CostSchedule(),
    profiles: tuple[DatasetCostProfile, ...] = BENCHMARK_PROFILES,
) -> str:
    """Two-significant-figure cost table, one section per task kind."""
    sections = []
    for kind, title in (
        (TaskKind.GENERATION, "generation"),
        (TaskKind.CLASSIFICATION, "classification"),
    ):
        rows = [p for p in profiles if p.task_kind is kind]
        if not rows:
            continue
        shots = rows[0].shot_options
        header = ["dataset", "#tok"] + [f"{n}-shot" for n in shots] + ["human"]
        lines = [f"{title} tasks", "  ".join(f"{h:<9}" for h in header).rstrip()]
        for profile in rows:
            llm, human = profile_costs(profile, schedule)
            cells = [profile.name, f"{float(profile.avg_tokens):g}"]
            cells += [sig2_str(c) for c in llm]
            cells.append(sig2_str(human))
            lines.append("  ".join(f"{c:<9}" for c in cells).rstrip())
        sections.append("\n".join(lines))
    return "\n\n".join(sections) + "\n"
