"""Run configuration: one JSON file describing the task, pricing, strategy
grid, budgets, seeds, learner, and labeling backend.

Monetary values in config are decimal dollars with up to six fractional
digits (strings or numbers). Credentials are named by environment variable,
never stored in the file.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .costs import (
    CostSchedule,
    HumanPricingMode,
    TaskKind,
    as_fraction,
    budget_ladder,
    human_label_cost,
    usd,
)
from .learner import HashedFeatureSpec, TrainParams
from .pool import DEFAULT_POOL_CAP, Pool, load_pool_file
from .strategies import Strategy


@dataclass(frozen=True)
class TaskConfig:
    name: str
    kind: TaskKind
    train_pool: Optional[Path] = None
    eval_pool: Optional[Path] = None
    label_vocabulary: Optional[tuple[str, ...]] = None
    avg_tokens: Optional[Fraction] = None
    tokenizer: str = "whitespace"
    pool_cap: int = DEFAULT_POOL_CAP

    def load_train_pool(self) -> Pool:
        if self.train_pool is None:
            raise ValueError("task config has no train_pool path")
        return load_pool_file(
            self.train_pool,
            task_kind=self.kind,
            label_vocabulary=self.label_vocabulary,
            avg_tokens_override=self.avg_tokens,
            tokenizer_mode=self.tokenizer,
            cap=self.pool_cap,
        )

    def load_eval_pool(self) -> Pool:
        if self.eval_pool is None:
            raise ValueError("task config has no eval_pool path")
        return load_pool_file(
            self.eval_pool,
            task_kind=self.kind,
            label_vocabulary=self.label_vocabulary,
            tokenizer_mode=self.tokenizer,
            cap=self.pool_cap,
        )


@dataclass(frozen=True)
class StrategyGridConfig:
    strategies: tuple[Strategy, ...] = (
        Strategy.HUMAN_ONLY,
        Strategy.LLM_ONLY,
        Strategy.RANDOM_MIX,
        Strategy.ACTIVE,
    )
    shots: tuple[int, ...] = (2, 4, 8)
    human_ratios: tuple[Fraction, ...] = (
        Fraction(1, 4),
        Fraction(1, 2),
        Fraction(3, 4),
    )

    def __post_init__(self) -> None:
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        if any(s < 1 for s in self.shots):
            raise ValueError("shot counts must be >= 1")
        if any(not 0 < r < 1 for r in self.human_ratios):
            raise ValueError(
                "mix ratios must be strictly between 0 and 1; the pure "
                "strategies cover the endpoints"
            )


@dataclass(frozen=True)
class LearnerConfig:
    spec: HashedFeatureSpec = HashedFeatureSpec()
    grid: tuple[TrainParams, ...] = (TrainParams(),)
    dev_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("learner grid must have at least one entry")
        if not 0.0 <= self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class SimulatedBackendConfig:
    floor_accuracy: float = 0.55
    ceiling_accuracy: float = 0.95


@dataclass(frozen=True)
class LiveBackendConfig:
    endpoint: str
    model: str
    credential_env: str
    spend_cap: int  # micro-dollars; hard ceiling on settled live spend
    instruction: str = ""
    demo_format: str = "{input}\n{label}\n\n"
    query_format: str = "{input}\n"
    stop_sequence: str = "\n"
    max_output_tokens: int = 64
    max_in_flight: int = 1
    max_attempts: int = 3
    backoff_seconds: float = 0.5
    reserve_headroom: float = 2.0
    first_tokens: Optional[dict[str, str]] = None

    def __post_init__(self) -> None:
        if not self.endpoint or not self.credential_env:
            raise ValueError("live backend needs an endpoint and a credential_env")
        if self.spend_cap <= 0:
            raise ValueError("live backend needs a positive spend_cap")


@dataclass(frozen=True)
class RunConfig:
    task: TaskConfig
    schedule: CostSchedule = CostSchedule()
    strategy_grid: StrategyGridConfig = StrategyGridConfig()
    explicit_budgets: Optional[tuple[int, ...]] = None  # micro-dollars
    use_ladder: bool = True
    seeds: tuple[int, ...] = (0, 1, 2)
    alphas: tuple[float, ...] = (1.0, 3.0)
    learner: LearnerConfig = LearnerConfig()
    simulated: Optional[SimulatedBackendConfig] = SimulatedBackendConfig()
    live: Optional[LiveBackendConfig] = None

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.alphas or any(a < 0 for a in self.alphas):
            raise ValueError("alphas must be non-negative and non-empty")
        if not self.use_ladder and not self.explicit_budgets:
            raise ValueError("either the ladder or explicit budgets must be set")
        if self.simulated is None and self.live is None:
            raise ValueError("a labeling backend must be configured")

    @property
    def backend_mode(self) -> str:
        return "live" if self.live is not None else "simulated"

    def human_unit_cost(self) -> int:
        """Per-label human price at the task's average length; the base of
        the budget ladder."""
        avg = self.task.avg_tokens if self.task.avg_tokens is not None else 0
        return human_label_cost(avg, self.task.kind, self.schedule)

    def budgets(self) -> list[int]:
        if self.explicit_budgets:
            return list(self.explicit_budgets)
        return budget_ladder(self.human_unit_cost())


def _require(mapping: dict, key: str, context: str):
    try:
        return mapping[key]
    except KeyError:
        raise ValueError(f"config is missing {context}.{key}") from None


def parse_run_config(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    task_data = _require(data, "task", "config")
    kind = TaskKind(_require(task_data, "kind", "task"))
    vocabulary = task_data.get("label_vocabulary")
    task = TaskConfig(
        name=task_data.get("name", "task"),
        kind=kind,
        train_pool=(base_dir / task_data["train_pool"]) if task_data.get("train_pool") else None,
        eval_pool=(base_dir / task_data["eval_pool"]) if task_data.get("eval_pool") else None,
        label_vocabulary=tuple(vocabulary) if vocabulary else None,
        avg_tokens=as_fraction(task_data["avg_tokens"]) if "avg_tokens" in task_data else None,
        tokenizer=task_data.get("tokenizer", "whitespace"),
        pool_cap=task_data.get("pool_cap", DEFAULT_POOL_CAP),
    )

    schedule = CostSchedule()
    if "costs" in data:
        c = data["costs"]
        mode = c.get("human_pricing_mode")
        schedule = CostSchedule.from_dollars(
            llm_price_per_token=c.get("llm_price_per_token", "0.00004"),
            human_unit_price=c.get("human_unit_price", "0.11"),
            human_unit_tokens=c.get("human_unit_tokens", 50),
            human_min_charge=c.get("human_min_charge", "0.11"),
            human_pricing_mode=HumanPricingMode(mode) if mode else None,
        )

    grid = StrategyGridConfig()
    if "strategies" in data:
        s = data["strategies"]
        grid = StrategyGridConfig(
            strategies=tuple(Strategy(name) for name in s.get("strategies", [x.value for x in grid.strategies])),
            shots=tuple(s.get("shots", grid.shots)),
            human_ratios=tuple(as_fraction(r) for r in s.get("human_ratios", grid.human_ratios)),
        )

    explicit = None
    use_ladder = True
    if "budgets" in data:
        b = data["budgets"]
        if "explicit" in b:
            explicit = tuple(usd(x) for x in b["explicit"])
            use_ladder = bool(b.get("ladder", False))
        else:
            use_ladder = bool(b.get("ladder", True))

    learner = LearnerConfig()
    if "learner" in data:
        l = data["learner"]
        spec = HashedFeatureSpec(
            dimension=l.get("dimension", 2**18),
            ngram_orders=tuple(l.get("ngram_orders", (1, 2))),
            hash_seed=l.get("hash_seed", 0),
        )
        grid_entries = tuple(
            TrainParams(
                learning_rate=entry.get("learning_rate", 0.5),
                epochs=entry.get("epochs", 10),
                batch_size=entry.get("batch_size", 32),
            )
            for entry in l.get("grid", [{}])
        )
        learner = LearnerConfig(
            spec=spec, grid=grid_entries, dev_fraction=l.get("dev_fraction", 0.0)
        )

    simulated: Optional[SimulatedBackendConfig] = SimulatedBackendConfig()
    live: Optional[LiveBackendConfig] = None
    if "backend" in data:
        backend = data["backend"]
        mode = backend.get("mode", "simulated")
        if mode == "simulated":
            calibration = backend.get("calibration", {})
            simulated = SimulatedBackendConfig(
                floor_accuracy=calibration.get("floor", 0.55),
                ceiling_accuracy=calibration.get("ceiling", 0.95),
            )
        elif mode == "live":
            simulated = None
            prompt = backend.get("prompt", {})
            live = LiveBackendConfig(
                endpoint=_require(backend, "endpoint", "backend"),
                model=backend.get("model", "default"),
                credential_env=_require(backend, "credential_env", "backend"),
                spend_cap=usd(_require(backend, "spend_cap", "backend")),
                instruction=prompt.get("instruction", ""),
                demo_format=prompt.get("demo_format", "{input}\n{label}\n\n"),
                query_format=prompt.get("query_format", "{input}\n"),
                stop_sequence=prompt.get("stop_sequence", "\n"),
                max_output_tokens=backend.get("max_output_tokens", 64),
                max_in_flight=backend.get("max_in_flight", 1),
                max_attempts=backend.get("max_attempts", 3),
                backoff_seconds=backend.get("backoff_seconds", 0.5),
                reserve_headroom=backend.get("reserve_headroom", 2.0),
                first_tokens=backend.get("first_tokens"),
            )
        else:
            raise ValueError(f"unknown backend mode {mode!r}")

    return RunConfig(
        task=task,
        schedule=schedule,
        strategy_grid=grid,
        explicit_budgets=explicit,
        use_ladder=use_ladder,
        seeds=tuple(data.get("seeds", (0, 1, 2))),
        alphas=tuple(float(a) for a in data.get("alphas", (1.0, 3.0))),
        learner=learner,
        simulated=simulated,
        live=live,
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    return parse_run_config(data, base_dir=path.parent)
