"""Budget-split labeling strategies.

Four ways to turn a fixed budget into a labeled set: human-only, LLM-only,
a random mix over disjoint item sets, and active labeling (LLM-label first,
then spend the reserved human budget re-annotating the lowest-confidence
items). Planning is pure; run_plan executes a plan against labeler backends
under ledger control.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Protocol, Sequence

from .costs import (
    BudgetLedger,
    CostSchedule,
    TaskKind,
    affordable_count,
    as_fraction,
    llm_label_cost,
)
from .errors import (
    BudgetExhausted,
    InfeasiblePlan,
    MalformedResponse,
    TransportError,
    UnmappableLabel,
)
from .labelers import LabeledExample, Source
from .pool import Pool, UnlabeledExample, permutation


class Strategy(enum.Enum):
    HUMAN_ONLY = "human_only"
    LLM_ONLY = "llm_only"
    RANDOM_MIX = "random_mix"
    ACTIVE = "active"


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy
    human_ratio: Fraction
    shots: int
    seed: int

    def __post_init__(self) -> None:
        ratio = as_fraction(self.human_ratio)
        object.__setattr__(self, "human_ratio", ratio)
        if not 0 <= ratio <= 1:
            raise ValueError("human_ratio must lie in [0, 1]")
        if self.strategy is Strategy.HUMAN_ONLY and ratio != 1:
            raise ValueError("human-only implies human_ratio = 1")
        if self.strategy is Strategy.LLM_ONLY and ratio != 0:
            raise ValueError("llm-only implies human_ratio = 0")
        if self.uses_llm and self.shots < 1:
            raise ValueError("shots must be >= 1 whenever the LLM labels")

    @property
    def uses_llm(self) -> bool:
        return self.strategy is not Strategy.HUMAN_ONLY and self.human_ratio < 1


@dataclass(frozen=True)
class LabelingPlan:
    config: StrategyConfig
    total_budget: int
    llm_budget: int
    human_budget: int
    demo_overhead: int
    demo_ids: tuple[str, ...]
    llm_item_ids: tuple[str, ...]
    human_item_ids: tuple[str, ...]
    relabel_budget: int = 0
    relabel_quota: int = 0
    overflow_candidate_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.llm_budget + self.human_budget + self.demo_overhead > self.total_budget:
            raise ValueError("plan allocates more than the total budget")
        if set(self.llm_item_ids) & set(self.human_item_ids):
            raise ValueError("llm and human item sets must be disjoint")


class Labeler(Protocol):
    def unit_cost(self, example: UnlabeledExample) -> int: ...

    def label(self, example: UnlabeledExample) -> LabeledExample: ...


def _affordable_prefix(
    items: Sequence[UnlabeledExample], budget: int, cost_of
) -> tuple[list[UnlabeledExample], int]:
    """Longest prefix whose cumulative cost fits the budget."""
    chosen: list[UnlabeledExample] = []
    spent = 0
    for ex in items:
        unit = cost_of(ex)
        if spent + unit > budget:
            break
        spent += unit
        chosen.append(ex)
    return chosen, spent


def plan(
    budget: int,
    pool: Pool,
    config: StrategyConfig,
    schedule: CostSchedule,
    human_labeler: Labeler,
    llm_unit_cost: Optional[int] = None,
) -> LabelingPlan:
    """Allocate a budget to labelers and pick the items each will handle.

    Items come from the seeded shuffle of the pool; the first `shots` items
    become the prompt demonstrations when the LLM is used (their human-label
    cost is the demo overhead, charged once per run). Item counts are capped
    at pool size; leftover budget stays unspent.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if config.strategy is Strategy.ACTIVE and pool.task_kind is TaskKind.GENERATION:
        raise ValueError(
            "active labeling needs first-token confidences and is defined "
            "for classification tasks only"
        )
    order = permutation(pool, config.seed)
    uses_llm = config.uses_llm
    demo_items: list[UnlabeledExample] = []
    if uses_llm:
        if len(order) <= config.shots:
            raise InfeasiblePlan(
                f"pool of {len(order)} cannot spare {config.shots} demonstrations"
            )
        demo_items = order[: config.shots]
    universe = order[len(demo_items):]
    demo_overhead = sum(human_labeler.unit_cost(ex) for ex in demo_items)
    if llm_unit_cost is None:
        llm_unit_cost = llm_label_cost(pool.avg_tokens, max(config.shots, 1), schedule)

    if config.strategy is Strategy.HUMAN_ONLY:
        items, spent = _affordable_prefix(universe, budget, human_labeler.unit_cost)
        if not items:
            first = human_labeler.unit_cost(universe[0]) if universe else 0
            raise InfeasiblePlan(
                "budget does not cover one human label", shortfall=first - budget
            )
        return LabelingPlan(
            config=config,
            total_budget=budget,
            llm_budget=0,
            human_budget=spent,
            demo_overhead=0,
            demo_ids=(),
            llm_item_ids=(),
            human_item_ids=tuple(ex.id for ex in items),
        )

    human_share = math.floor(budget * config.human_ratio)

    if not uses_llm:  # mix/active degenerate at ratio 1: everything to humans
        items, spent = _affordable_prefix(universe, human_share, human_labeler.unit_cost)
        if config.strategy is Strategy.ACTIVE:
            return LabelingPlan(
                config=config,
                total_budget=budget,
                llm_budget=0,
                human_budget=human_share,
                demo_overhead=0,
                demo_ids=(),
                llm_item_ids=(),
                human_item_ids=(),
                relabel_budget=human_share,
                relabel_quota=len(items),
                overflow_candidate_ids=tuple(ex.id for ex in universe),
            )
        return LabelingPlan(
            config=config,
            total_budget=budget,
            llm_budget=0,
            human_budget=spent,
            demo_overhead=0,
            demo_ids=(),
            llm_item_ids=(),
            human_item_ids=tuple(ex.id for ex in items),
        )

    llm_budget = budget - human_share - demo_overhead
    if llm_budget < llm_unit_cost:
        raise InfeasiblePlan(
            f"after {config.shots} demonstrations the LLM share cannot buy one label",
            shortfall=llm_unit_cost - llm_budget,
        )

    if config.strategy is Strategy.LLM_ONLY:
        n_llm = min(affordable_count(llm_budget, llm_unit_cost), len(universe))
        return LabelingPlan(
            config=config,
            total_budget=budget,
            llm_budget=llm_budget,
            human_budget=0,
            demo_overhead=demo_overhead,
            demo_ids=tuple(ex.id for ex in demo_items),
            llm_item_ids=tuple(ex.id for ex in universe[:n_llm]),
            human_item_ids=(),
        )

    if config.strategy is Strategy.RANDOM_MIX:
        human_items, human_spent = _affordable_prefix(
            universe, human_share, human_labeler.unit_cost
        )
        remaining = universe[len(human_items):]
        n_llm = min(affordable_count(llm_budget, llm_unit_cost), len(remaining))
        return LabelingPlan(
            config=config,
            total_budget=budget,
            llm_budget=llm_budget,
            human_budget=human_spent,
            demo_overhead=demo_overhead,
            demo_ids=tuple(ex.id for ex in demo_items),
            llm_item_ids=tuple(ex.id for ex in remaining[:n_llm]),
            human_item_ids=tuple(ex.id for ex in human_items),
        )

    # active labeling: LLM first over its share, human share reserved for
    # re-annotating the lowest-confidence labels afterwards
    n_llm = min(affordable_count(llm_budget, llm_unit_cost), len(universe))
    llm_items = universe[:n_llm]
    human_unit = human_labeler.unit_cost(universe[0]) if universe else 0
    quota = affordable_count(human_share, human_unit) if human_unit > 0 else 0
    return LabelingPlan(
        config=config,
        total_budget=budget,
        llm_budget=llm_budget,
        human_budget=human_share,
        demo_overhead=demo_overhead,
        demo_ids=tuple(ex.id for ex in demo_items),
        llm_item_ids=tuple(ex.id for ex in llm_items),
        human_item_ids=(),
        relabel_budget=human_share,
        relabel_quota=quota,
        overflow_candidate_ids=tuple(ex.id for ex in universe[n_llm:]),
    )


@dataclass
class RunResult:
    plan: LabelingPlan
    records: dict[str, LabeledExample]
    failed_ids: tuple[str, ...]
    spend_by_kind: dict[str, int]
    overrun: int = 0

    @property
    def total_settled(self) -> int:
        return sum(self.spend_by_kind.values())

    def label_accuracy(self, pool: Pool) -> Optional[float]:
        """Exact-match accuracy of the labeled set against gold, when gold
        is available for every labeled item."""
        if not self.records:
            return None
        hits = 0
        for record in self.records.values():
            gold = pool.by_id(record.id).gold_label
            if gold is None:
                return None
            hits += record.label == gold
        return hits / len(self.records)


def _label_one(labeler: Labeler, example: UnlabeledExample):
    try:
        return labeler.label(example), None
    except (TransportError, MalformedResponse, UnmappableLabel) as exc:
        return None, exc


def _settle_record(
    ledger: BudgetLedger, reservation, record: LabeledExample, kind: str
) -> int:
    """Settle a labeled record, topping up when actual cost exceeded the
    reservation. Returns any overrun the ledger could not cover."""
    if record.cost <= reservation.amount:
        ledger.settle(reservation, record.cost, record.id, kind)
        return 0
    extra = record.cost - reservation.amount
    ledger.settle(reservation, reservation.amount, record.id, kind)
    top_up = ledger.reserve_up_to(extra)
    ledger.settle(top_up, top_up.amount, record.id, kind)
    return extra - top_up.amount


def run_plan(
    the_plan: LabelingPlan,
    pool: Pool,
    llm_labeler: Optional[Labeler],
    human_labeler: Labeler,
    ledger: BudgetLedger,
) -> RunResult:
    """Execute a plan: charge demo overhead, label the planned items, and for
    active labeling re-annotate the lowest-confidence LLM labels. The ledger
    can never be overspent; items whose labeling fails are reported, their
    reservations released."""
    records: dict[str, LabeledExample] = {}
    failed: list[str] = []
    overrun = 0

    for demo_id in the_plan.demo_ids:
        ex = pool.by_id(demo_id)
        reservation = ledger.reserve(human_labeler.unit_cost(ex))
        ledger.settle(reservation, reservation.amount, demo_id, Source.HUMAN.value)

    for item_id in the_plan.human_item_ids:
        ex = pool.by_id(item_id)
        try:
            reservation = ledger.reserve(human_labeler.unit_cost(ex))
        except BudgetExhausted:
            break
        record = human_labeler.label(ex)
        overrun += _settle_record(ledger, reservation, record, Source.HUMAN.value)
        records[item_id] = record

    if the_plan.llm_item_ids:
        if llm_labeler is None:
            raise ValueError("plan includes LLM items but no LLM labeler was given")
        in_flight = max(getattr(llm_labeler, "max_in_flight", 1), 1)
        items = [pool.by_id(i) for i in the_plan.llm_item_ids]
        index = 0
        exhausted = False
        while index < len(items) and not exhausted:
            # reserve one bounded wave at a time; settling cheap items frees
            # budget for the next wave
            wave: list[tuple[UnlabeledExample, object]] = []
            while index < len(items) and len(wave) < in_flight:
                ex = items[index]
                try:
                    reservation = ledger.reserve(llm_labeler.unit_cost(ex))
                except BudgetExhausted:
                    exhausted = True
                    break
                wave.append((ex, reservation))
                index += 1
            if not wave:
                break
            if in_flight > 1:
                with ThreadPoolExecutor(max_workers=in_flight) as executor:
                    outcomes = list(
                        executor.map(lambda pair: _label_one(llm_labeler, pair[0]), wave)
                    )
            else:
                outcomes = [_label_one(llm_labeler, ex) for ex, _ in wave]
            # commit each wave in ascending id order regardless of completion order
            for (ex, reservation), (record, _error) in sorted(
                zip(wave, outcomes), key=lambda pair: pair[0][0].id
            ):
                if record is None:
                    ledger.release(reservation)
                    failed.append(ex.id)
                    continue
                overrun += _settle_record(ledger, reservation, record, Source.LLM.value)
                records[ex.id] = record

    if the_plan.config.strategy is Strategy.ACTIVE:
        llm_records = {k: v for k, v in records.items() if v.source is Source.LLM}
        fresh = [pool.by_id(i) for i in the_plan.overflow_candidate_ids if i not in records]
        updated = active_relabel(
            llm_records,
            the_plan.relabel_budget,
            human_labeler,
            ledger,
            pool,
            fresh_candidates=fresh,
        )
        records.update(updated)

    ordered = {k: records[k] for k in sorted(records)}
    return RunResult(
        plan=the_plan,
        records=ordered,
        failed_ids=tuple(sorted(failed)),
        spend_by_kind=ledger.spend_by_kind(),
        overrun=overrun,
    )


def active_relabel(
    llm_labeled: Mapping[str, LabeledExample],
    human_budget: int,
    human_labeler: Labeler,
    ledger: BudgetLedger,
    pool: Pool,
    fresh_candidates: Sequence[UnlabeledExample] = (),
) -> dict[str, LabeledExample]:
    """Spend the reserved human budget re-annotating LLM labels from least to
    most confident (ties by ascending id). Replaced records become
    human-sourced; budget left after every LLM label is replaced buys fresh
    human labels from the given candidates."""
    updated = dict(llm_labeled)
    if human_budget <= 0:
        return updated
    remaining = human_budget
    ranked = sorted(llm_labeled.values(), key=lambda r: (r.confidence, r.id))
    targets = [pool.by_id(r.id) for r in ranked] + list(fresh_candidates)
    for ex in targets:
        unit = human_labeler.unit_cost(ex)
        if unit > remaining:
            break
        try:
            reservation = ledger.reserve(unit)
        except BudgetExhausted:
            break
        record = human_labeler.label(ex)
        ledger.settle(
            reservation, min(record.cost, reservation.amount), ex.id, Source.HUMAN.value
        )
        remaining -= min(record.cost, reservation.amount)
        updated[ex.id] = record
    return updated
