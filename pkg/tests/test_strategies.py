"""Planning arithmetic, plan execution, and active relabeling."""
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelbudget.costs import BudgetLedger, CostSchedule, TaskKind, usd
from labelbudget.errors import InfeasiblePlan
from labelbudget.labelers import (
    HUMAN_CONFIDENCE,
    HumanOracleLabeler,
    LabeledExample,
    SimCalibration,
    SimulatedLlmLabeler,
    Source,
    demo_set_from_examples,
)
from labelbudget.pool import load_pool, permutation
from labelbudget.strategies import (
    LabelingPlan,
    Strategy,
    StrategyConfig,
    active_relabel,
    plan,
    run_plan,
)

VOCAB = ["Negative", "Positive"]
SCHEDULE = CostSchedule()


def make_pool(n, gold="Positive", avg_tokens=19.3, kind=TaskKind.CLASSIFICATION):
    lines = [
        json.dumps({"id": f"e{i:04d}", "text": f"sample text {i}", "gold_label": gold})
        for i in range(n)
    ]
    return load_pool(
        lines,
        kind,
        VOCAB if kind is TaskKind.CLASSIFICATION else None,
        avg_tokens_override=avg_tokens,
        cap=max(n, 5120),
    )


def human_labeler(kind=TaskKind.CLASSIFICATION):
    return HumanOracleLabeler(SCHEDULE, kind)


def sim_labeler(pool, config, calibration=SimCalibration(1.0, 1.0)):
    return SimulatedLlmLabeler(
        calibration=calibration,
        label_vocabulary=VOCAB,
        seed=config.seed,
        schedule=SCHEDULE,
        shots=max(config.shots, 1),
        avg_tokens=pool.avg_tokens,
    )


def cfg(strategy, ratio, shots=2, seed=0):
    return StrategyConfig(strategy=strategy, human_ratio=ratio, shots=shots, seed=seed)


class TestPlan:
    def test_human_only_buys_ten_at_1_10(self):
        pool = make_pool(100)
        p = plan(usd("1.1"), pool, cfg(Strategy.HUMAN_ONLY, 1, shots=0), SCHEDULE, human_labeler())
        assert len(p.human_item_ids) == 10
        assert p.human_budget == usd("1.1")
        assert not p.llm_item_ids and not p.demo_ids

    def test_llm_only_demo_overhead_then_379_items(self):
        # 1.1 budget, 2 shots: overhead 0.22, floor(0.88 / 0.002316) = 379
        pool = make_pool(1000)
        p = plan(usd("1.1"), pool, cfg(Strategy.LLM_ONLY, 0), SCHEDULE, human_labeler())
        assert p.demo_overhead == usd("0.22")
        assert len(p.demo_ids) == 2
        assert len(p.llm_item_ids) == 379
        assert usd("0.88") // usd("0.002316") == 379  # exact micro-dollar division

    def test_llm_only_pool_cap_leaves_budget_unspent(self):
        pool = make_pool(50)
        p = plan(usd("10"), pool, cfg(Strategy.LLM_ONLY, 0), SCHEDULE, human_labeler())
        # two demos consumed, 48 labelable items remain
        assert len(p.llm_item_ids) == 48

    def test_random_mix_disjoint_sets(self):
        pool = make_pool(1000)
        p = plan(usd("4.4"), pool, cfg(Strategy.RANDOM_MIX, 0.5), SCHEDULE, human_labeler())
        assert set(p.llm_item_ids).isdisjoint(p.human_item_ids)
        assert len(p.human_item_ids) == 20  # 2.2 / 0.11
        assert p.llm_budget == usd("4.4") - usd("2.2") - usd("0.22")

    def test_active_reserves_relabel_budget(self):
        pool = make_pool(1000)
        p = plan(usd("4.4"), pool, cfg(Strategy.ACTIVE, 0.5), SCHEDULE, human_labeler())
        assert p.relabel_budget == usd("2.2")
        assert p.relabel_quota == 20
        assert len(p.llm_item_ids) == usd("1.98") // usd("0.002316")
        assert p.human_item_ids == ()

    def test_active_rejected_on_generation(self):
        pool = make_pool(100, kind=TaskKind.GENERATION)
        with pytest.raises(ValueError, match="classification"):
            plan(usd("4.4"), pool, cfg(Strategy.ACTIVE, 0.5), SCHEDULE,
                 human_labeler(TaskKind.GENERATION))

    def test_infeasible_human_only(self):
        pool = make_pool(10)
        with pytest.raises(InfeasiblePlan) as err:
            plan(usd("0.10"), pool, cfg(Strategy.HUMAN_ONLY, 1, shots=0), SCHEDULE, human_labeler())
        assert err.value.shortfall == usd("0.01")

    def test_infeasible_llm_below_demo_overhead(self):
        pool = make_pool(100)
        with pytest.raises(InfeasiblePlan):
            plan(usd("0.22"), pool, cfg(Strategy.LLM_ONLY, 0), SCHEDULE, human_labeler())

    def test_plan_rejects_overallocation(self):
        config = cfg(Strategy.LLM_ONLY, 0)
        with pytest.raises(ValueError):
            LabelingPlan(
                config=config,
                total_budget=100,
                llm_budget=90,
                human_budget=0,
                demo_overhead=20,
                demo_ids=(),
                llm_item_ids=(),
                human_item_ids=(),
            )

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 50), ratio=st.sampled_from([0, 0.25, 0.5, 0.75, 1.0]))
    def test_budget_conservation(self, seed, ratio):
        pool = make_pool(300)
        strategy = Strategy.RANDOM_MIX
        config = cfg(strategy, ratio, seed=seed)
        budget = usd("2.2")
        try:
            p = plan(budget, pool, config, SCHEDULE, human_labeler())
        except InfeasiblePlan:
            return
        ledger = BudgetLedger(budget)
        result = run_plan(p, pool, sim_labeler(pool, config), human_labeler(), ledger)
        assert ledger.settled + ledger.reserved <= budget
        assert result.total_settled <= budget

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 20))
    def test_monotone_coverage_in_budget(self, seed):
        pool = make_pool(400)
        config = cfg(Strategy.RANDOM_MIX, 0.5, seed=seed)
        covered = []
        for budget in (usd("1.1"), usd("2.2"), usd("4.4")):
            p = plan(budget, pool, config, SCHEDULE, human_labeler())
            covered.append(set(p.human_item_ids) | set(p.llm_item_ids))
        assert covered[0] <= covered[1] <= covered[2]


class TestRunPlan:
    def test_human_only_all_human_records(self):
        pool = make_pool(50)
        config = cfg(Strategy.HUMAN_ONLY, 1, shots=0)
        p = plan(usd("1.1"), pool, config, SCHEDULE, human_labeler())
        ledger = BudgetLedger(usd("1.1"))
        result = run_plan(p, pool, None, human_labeler(), ledger)
        assert len(result.records) == 10
        assert all(r.source is Source.HUMAN for r in result.records.values())
        assert all(r.confidence == HUMAN_CONFIDENCE for r in result.records.values())
        assert ledger.settled == usd("1.1")
        assert result.label_accuracy(pool) == 1.0

    def test_llm_only_perfect_calibration_matches_gold(self):
        pool = make_pool(1000)
        config = cfg(Strategy.LLM_ONLY, 0)
        p = plan(usd("1.1"), pool, config, SCHEDULE, human_labeler())
        ledger = BudgetLedger(usd("1.1"))
        result = run_plan(p, pool, sim_labeler(pool, config), human_labeler(), ledger)
        assert len(result.records) == 379
        assert result.label_accuracy(pool) == 1.0
        # settled spend: demos + exactly count * unit cost
        assert ledger.settled == usd("0.22") + 379 * usd("0.002316")

    def test_random_mix_record_sources(self):
        pool = make_pool(200)
        config = cfg(Strategy.RANDOM_MIX, 0.5)
        budget = usd("2.2")
        p = plan(budget, pool, config, SCHEDULE, human_labeler())
        ledger = BudgetLedger(budget)
        result = run_plan(p, pool, sim_labeler(pool, config), human_labeler(), ledger)
        human_ids = {i for i, r in result.records.items() if r.source is Source.HUMAN}
        llm_ids = {i for i, r in result.records.items() if r.source is Source.LLM}
        assert human_ids == set(p.human_item_ids)
        assert llm_ids == set(p.llm_item_ids)

    def test_exactly_one_record_per_id(self):
        pool = make_pool(300)
        config = cfg(Strategy.ACTIVE, 0.5)
        budget = usd("2.2")
        p = plan(budget, pool, config, SCHEDULE, human_labeler())
        ledger = BudgetLedger(budget)
        result = run_plan(
            p, pool, sim_labeler(pool, config, SimCalibration(0.3, 0.9)), human_labeler(), ledger
        )
        assert sorted(result.records) == sorted(set(result.records))
        assert len(result.records) >= len(p.llm_item_ids)


class TestActiveRelabel:
    @staticmethod
    def record(id, confidence):
        return LabeledExample(
            id=id, label="Negative", source=Source.LLM, confidence=confidence,
            cost=usd("0.002316"), shots_used=2,
        )

    def test_lowest_confidence_first(self):
        pool = make_pool(3)
        ids = [ex.id for ex in pool]
        labeled = {
            ids[0]: self.record(ids[0], 0.9),
            ids[1]: self.record(ids[1], 0.2),
            ids[2]: self.record(ids[2], 0.5),
        }
        ledger = BudgetLedger(usd("0.11"))
        updated = active_relabel(labeled, usd("0.11"), human_labeler(), ledger, pool)
        assert updated[ids[1]].source is Source.HUMAN
        assert updated[ids[0]] == labeled[ids[0]]
        assert updated[ids[2]] == labeled[ids[2]]

    def test_overflow_buys_fresh_labels(self):
        pool = make_pool(10)
        order = permutation(pool, 0)
        labeled = {ex.id: self.record(ex.id, 0.1 * i) for i, ex in enumerate(order[:3])}
        fresh = order[3:]
        ledger = BudgetLedger(usd("0.55"))
        updated = active_relabel(
            labeled, usd("0.55"), human_labeler(), ledger, pool, fresh_candidates=fresh
        )
        relabeled = [r for r in updated.values() if r.source is Source.HUMAN]
        assert len(relabeled) == 5  # 3 replacements + 2 fresh
        assert {r.id for r in updated.values() if r.source is Source.HUMAN} >= set(labeled)
        assert ledger.settled == usd("0.55")

    def test_equal_confidence_ties_by_id(self):
        pool = make_pool(2)
        ids = sorted(ex.id for ex in pool)
        labeled = {i: self.record(i, 0.5) for i in ids}
        ledger = BudgetLedger(usd("0.11"))
        updated = active_relabel(labeled, usd("0.11"), human_labeler(), ledger, pool)
        assert updated[ids[0]].source is Source.HUMAN
        assert updated[ids[1]].source is Source.LLM

    def test_zero_budget_returns_input_unchanged(self):
        pool = make_pool(2)
        ids = [ex.id for ex in pool]
        labeled = {i: self.record(i, 0.5) for i in ids}
        ledger = BudgetLedger(usd("1"))
        assert active_relabel(labeled, 0, human_labeler(), ledger, pool) == labeled


def test_settle_record_tops_up_and_reports_overrun():
    from labelbudget.strategies import _settle_record

    record = LabeledExample(id="x", label="A", source=Source.LLM,
                            confidence=0.5, cost=15, shots_used=1)
    # enough budget for the top-up: full cost lands in the ledger
    ledger = BudgetLedger(30)
    token = ledger.reserve(10)
    assert _settle_record(ledger, token, record, "llm") == 0
    assert ledger.settled == 15
    # too little budget: the ledger keeps what it can, remainder is overrun
    tight = BudgetLedger(13)
    token = tight.reserve(10)
    assert _settle_record(tight, token, record, "llm") == 2
    assert tight.settled == 13


def test_run_plan_concurrent_live_labeling(mock_server):
    from conftest import completion_body
    from labelbudget.labelers import HttpCompletionBackend, LiveLlmLabeler, PromptTemplate

    pool = make_pool(40)
    config = cfg(Strategy.LLM_ONLY, 0)
    budget = usd("0.33")
    p = plan(budget, pool, config, SCHEDULE, human_labeler())
    assert len(p.llm_item_ids) > 3
    for _ in range(len(p.llm_item_ids)):
        mock_server.enqueue(
            completion_body(
                "Positive",
                first_token_top={"Positive": 0.9, "Negative": 0.1},
                prompt_tokens=25,
                completion_tokens=1,
            )
        )
    template = PromptTemplate(
        instruction="",
        demo_format="{input} -> {label}\n",
        query_format="{input} ->",
        label_vocabulary=frozenset(VOCAB),
    )
    demo_set = demo_set_from_examples([pool.by_id(i) for i in p.demo_ids])
    labeler = LiveLlmLabeler(
        backend=HttpCompletionBackend(mock_server.url, model="m"),
        template=template,
        demo_set=demo_set,
        schedule=SCHEDULE,
        task_kind=TaskKind.CLASSIFICATION,
        avg_tokens=pool.avg_tokens,
        max_in_flight=4,
    )
    ledger = BudgetLedger(budget)
    result = run_plan(p, pool, labeler, human_labeler(), ledger)
    assert sorted(result.records) == sorted(p.llm_item_ids)
    assert list(result.records) == sorted(result.records)  # committed in id order
    assert ledger.settled == usd("0.22") + len(p.llm_item_ids) * 26 * 40
    assert ledger.reserved == 0


def test_active_beats_random_label_accuracy():
    """The relabeling mechanism targets the least reliable labels, so at the
    same budget active labeling should produce a more accurate labeled set
    than a random split, for nearly every seed."""
    pool = make_pool(500)
    budget = usd("2.2")
    wins = 0
    seeds = range(10)
    for seed in seeds:
        accuracies = {}
        for strategy in (Strategy.ACTIVE, Strategy.RANDOM_MIX):
            config = cfg(strategy, 0.5, seed=seed)
            p = plan(budget, pool, config, SCHEDULE, human_labeler())
            ledger = BudgetLedger(budget)
            labeler = sim_labeler(pool, config, SimCalibration(0.5, 0.95))
            result = run_plan(p, pool, labeler, human_labeler(), ledger)
            accuracies[strategy] = result.label_accuracy(pool)
        wins += accuracies[Strategy.ACTIVE] > accuracies[Strategy.RANDOM_MIX]
    assert wins >= 9
