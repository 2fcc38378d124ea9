"""Sweep driver: plan -> label -> assemble -> train -> evaluate over the full
(strategy, shots, ratio, budget, seed, alpha, hyperparameters) grid.

Cells are enumerated in a fixed sorted order and all randomness is seeded, so
a simulated sweep is replayable byte-for-byte. A failed cell (for example an
infeasible plan at a tiny budget) is recorded with the `failed` marker metric
and the sweep continues. Aggregate rows report, per (strategy, budget), the
mean and standard deviation over seeds of the per-seed grid maximum, following
the max-then-average reporting convention.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .config import RunConfig
from .costs import BudgetLedger, TaskKind
from .errors import InfeasiblePlan, LabelBudgetError
from .labelers import (
    HttpCompletionBackend,
    HumanOracleLabeler,
    LiveLlmLabeler,
    PromptTemplate,
    SimCalibration,
    SimulatedLlmLabeler,
    demo_set_from_examples,
)
from .learner import TrainParams, accuracy, train
from .metrics import rouge_l_text
from .pool import Pool
from .reporting import (
    METRIC_ACCURACY,
    METRIC_FAILED,
    METRIC_LABEL_ACCURACY,
    METRIC_ROUGE_L,
    EvaluationReport,
    ReportRow,
)
from .strategies import RunResult, Strategy, StrategyConfig, plan, run_plan
from .supervision import assemble


@dataclass(frozen=True)
class SweepCell:
    strategy: Strategy
    shots: int
    human_ratio: Fraction
    budget: int
    seed: int
    alpha: float
    params_index: int


def enumerate_cells(config: RunConfig, budgets: list[int]) -> list[SweepCell]:
    """The full grid, reduced to the dimensions each strategy actually uses:
    pure strategies pin the ratio, single-source strategies pin alpha, and
    generation tasks skip the learner grid entirely."""
    is_generation = config.task.kind is TaskKind.GENERATION
    cells = []
    for strategy in sorted(config.strategy_grid.strategies, key=lambda s: s.value):
        if strategy is Strategy.HUMAN_ONLY:
            shot_options: tuple[int, ...] = (0,)
            ratio_options: tuple[Fraction, ...] = (Fraction(1),)
            alpha_options: tuple[float, ...] = (1.0,)
        elif strategy is Strategy.LLM_ONLY:
            shot_options = config.strategy_grid.shots
            ratio_options = (Fraction(0),)
            alpha_options = (1.0,)
        else:
            shot_options = config.strategy_grid.shots
            ratio_options = config.strategy_grid.human_ratios
            alpha_options = (1.0,) if is_generation else config.alphas
        params_options = (0,) if is_generation else tuple(range(len(config.learner.grid)))
        for budget in budgets:
            for seed in config.seeds:
                for shots in shot_options:
                    for ratio in sorted(ratio_options):
                        for alpha in alpha_options:
                            for params_index in params_options:
                                cells.append(
                                    SweepCell(
                                        strategy=strategy,
                                        shots=shots,
                                        human_ratio=ratio,
                                        budget=budget,
                                        seed=seed,
                                        alpha=alpha,
                                        params_index=params_index,
                                    )
                                )
    return cells


def build_labelers(
    config: RunConfig, pool: Pool, strategy_config: StrategyConfig, the_plan
):
    """Instantiate the human labeler and, when the plan labels by LLM, the
    simulated or live LLM labeler."""
    human = HumanOracleLabeler(config.schedule, config.task.kind)
    if not the_plan.llm_item_ids:
        return None, human
    if config.live is not None:
        live = config.live
        template = PromptTemplate(
            instruction=live.instruction,
            demo_format=live.demo_format,
            query_format=live.query_format,
            stop_sequence=live.stop_sequence,
            label_vocabulary=(
                frozenset(pool.label_vocabulary)
                if pool.label_vocabulary is not None
                else None
            ),
        )
        backend = HttpCompletionBackend(
            endpoint=live.endpoint,
            model=live.model,
            credential_env=live.credential_env,
        )
        demo_set = demo_set_from_examples([pool.by_id(i) for i in the_plan.demo_ids])
        llm = LiveLlmLabeler(
            backend=backend,
            template=template,
            demo_set=demo_set,
            schedule=config.schedule,
            task_kind=config.task.kind,
            avg_tokens=pool.avg_tokens,
            first_token=live.first_tokens,
            max_output_tokens=live.max_output_tokens,
            max_attempts=live.max_attempts,
            backoff_seconds=live.backoff_seconds,
            reserve_headroom=live.reserve_headroom,
            max_in_flight=live.max_in_flight,
        )
        return llm, human
    assert config.simulated is not None
    calibration = SimCalibration(
        floor_accuracy=config.simulated.floor_accuracy,
        ceiling_accuracy=config.simulated.ceiling_accuracy,
    )
    llm = SimulatedLlmLabeler(
        calibration=calibration,
        label_vocabulary=pool.label_vocabulary or (),
        seed=strategy_config.seed,
        schedule=config.schedule,
        shots=max(strategy_config.shots, 1),
        avg_tokens=pool.avg_tokens,
    )
    return llm, human


def run_label_once(
    config: RunConfig,
    pool: Pool,
    strategy_config: StrategyConfig,
    budget: int,
) -> RunResult:
    """One plan-and-execute pass; the building block for cmd_label and for
    every sweep cell."""
    human_probe = HumanOracleLabeler(config.schedule, config.task.kind)
    the_plan = plan(budget, pool, strategy_config, config.schedule, human_probe)
    llm, human = build_labelers(config, pool, strategy_config, the_plan)
    ledger = BudgetLedger(budget)
    return run_plan(the_plan, pool, llm, human, ledger)


def _cell_metric_rows(
    config: RunConfig,
    cell: SweepCell,
    result: RunResult,
    pool: Pool,
    eval_pool: Optional[Pool],
) -> list[ReportRow]:
    rows = []

    def row(metric: str, value: float) -> ReportRow:
        return ReportRow(
            strategy=cell.strategy.value,
            shots=cell.shots,
            human_ratio=cell.human_ratio,
            alpha=cell.alpha,
            budget=cell.budget,
            seed=cell.seed,
            metric=metric,
            value=value,
        )

    if config.task.kind is TaskKind.GENERATION:
        scores = []
        for record in result.records.values():
            gold = pool.by_id(record.id).gold_label
            if gold is None:
                continue
            scores.append(rouge_l_text(record.label, gold))
        if scores:
            rows.append(row(METRIC_ROUGE_L, sum(scores) / len(scores)))
        return rows

    label_acc = result.label_accuracy(pool)
    if label_acc is not None:
        rows.append(row(METRIC_LABEL_ACCURACY, label_acc))
    if eval_pool is not None:
        sset = assemble(result.records.values(), alpha=cell.alpha)
        texts = {record_id: pool.by_id(record_id).text for record_id in result.records}
        params: TrainParams = config.learner.grid[cell.params_index]
        model = train(
            sset,
            texts,
            config.learner.spec,
            params,
            seed=cell.seed,
            label_vocabulary=pool.label_vocabulary,
            dev_fraction=config.learner.dev_fraction,
        )
        rows.append(row(METRIC_ACCURACY, accuracy(model, eval_pool)))
    return rows


def _run_cell(
    config: RunConfig, cell: SweepCell, pool: Pool, eval_pool: Optional[Pool]
) -> list[ReportRow]:
    strategy_config = StrategyConfig(
        strategy=cell.strategy,
        human_ratio=cell.human_ratio,
        shots=cell.shots,
        seed=cell.seed,
    )
    try:
        result = run_label_once(config, pool, strategy_config, cell.budget)
        return _cell_metric_rows(config, cell, result, pool, eval_pool)
    except (InfeasiblePlan, LabelBudgetError, ValueError):
        return []


def run_sweep(
    config: RunConfig,
    allow_live_spend: bool = False,
    budgets: Optional[list[int]] = None,
    workers: int = 1,
) -> EvaluationReport:
    """Run every grid cell and append the per-(strategy, budget) aggregate
    rows. Cells are independent jobs; with workers > 1 they execute on a
    bounded pool while the report keeps its deterministic enumeration order.
    Live backends are refused without the explicit override, and the
    configured spend cap bounds the total budget handed to live cells."""
    if config.live is not None and not allow_live_spend:
        raise LabelBudgetError(
            "sweeping against a live backend spends real money; pass the "
            "explicit override to allow it"
        )
    pool = config.task.load_train_pool()
    eval_pool: Optional[Pool] = None
    if config.task.kind is TaskKind.CLASSIFICATION and config.task.eval_pool is not None:
        eval_pool = config.task.load_eval_pool()

    if budgets is None:
        budgets = config.budgets()
    cells = enumerate_cells(config, budgets)
    primary = (
        METRIC_ROUGE_L
        if config.task.kind is TaskKind.GENERATION
        else METRIC_ACCURACY
        if eval_pool is not None
        else METRIC_LABEL_ACCURACY
    )

    # the spend-cap cut is decided up front so it is independent of
    # completion order
    live_budgeted = 0
    runnable: list[bool] = []
    for cell in cells:
        ok = True
        if config.live is not None:
            ok = live_budgeted + cell.budget <= config.live.spend_cap
            if ok:
                live_budgeted += cell.budget
        runnable.append(ok)

    if workers > 1:
        if len(pool):
            pool.by_id(pool.examples[0].id)  # build the id index before fan-out
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(
                executor.map(
                    lambda pair: _run_cell(config, pair[0], pool, eval_pool)
                    if pair[1]
                    else [],
                    zip(cells, runnable),
                )
            )
    else:
        outcomes = [
            _run_cell(config, cell, pool, eval_pool) if ok else []
            for cell, ok in zip(cells, runnable)
        ]

    rows: list[ReportRow] = []
    best: dict[tuple[Strategy, int], dict[int, float]] = {}
    for cell, cell_rows in zip(cells, outcomes):
        if not cell_rows:
            rows.append(
                ReportRow(
                    strategy=cell.strategy.value,
                    shots=cell.shots,
                    human_ratio=cell.human_ratio,
                    alpha=cell.alpha,
                    budget=cell.budget,
                    seed=cell.seed,
                    metric=METRIC_FAILED,
                    value=1.0,
                )
            )
            continue
        rows.extend(cell_rows)
        for r in cell_rows:
            if r.metric == primary:
                group = best.setdefault((cell.strategy, cell.budget), {})
                group[cell.seed] = max(group.get(cell.seed, -math.inf), r.value)

    for (strategy, budget) in sorted(best, key=lambda k: (k[0].value, k[1])):
        per_seed = best[(strategy, budget)]
        values = [per_seed[s] for s in sorted(per_seed)]
        mean = sum(values) / len(values)
        variance = sum((v - mean) ** 2 for v in values) / len(values)
        for suffix, value in (("max_mean", mean), ("max_std", math.sqrt(variance))):
            rows.append(
                ReportRow(
                    strategy=strategy.value,
                    shots=None,
                    human_ratio=None,
                    alpha=None,
                    budget=budget,
                    seed=None,
                    metric=f"{primary}_{suffix}",
                    value=value,
                )
            )
    return EvaluationReport(rows=rows)
