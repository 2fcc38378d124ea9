"""Budget-constrained labeling orchestration and simulation."""

from .config import RunConfig, load_run_config
from .costs import (
    BudgetLedger,
    CostSchedule,
    HumanPricingMode,
    TaskKind,
    affordable_count,
    budget_ladder,
    human_label_cost,
    llm_label_cost,
    usd,
)
from .errors import LabelBudgetError
from .labelers import (
    HUMAN_CONFIDENCE,
    DemoSet,
    HumanOracleLabeler,
    LabeledExample,
    PromptTemplate,
    SimCalibration,
    SimulatedLlmLabeler,
    Source,
    build_prompt,
    constrain_first_token,
)
from .learner import HashedFeatureSpec, LinearModel, TrainParams, accuracy, predict, train
from .metrics import decile_accuracy, rouge_l, rouge_l_text
from .pool import Pool, UnlabeledExample, load_pool, sample, token_count
from .reporting import EvaluationReport, ReportRow
from .strategies import LabelingPlan, Strategy, StrategyConfig, active_relabel, plan, run_plan
from .supervision import SupervisionSet, assemble, export_supervision, import_supervision
from .sweep import run_label_once, run_sweep

__all__ = [
    "RunConfig",
    "load_run_config",
    "BudgetLedger",
    "CostSchedule",
    "HumanPricingMode",
    "TaskKind",
    "affordable_count",
    "budget_ladder",
    "human_label_cost",
    "llm_label_cost",
    "usd",
    "LabelBudgetError",
    "HUMAN_CONFIDENCE",
    "DemoSet",
    "HumanOracleLabeler",
    "LabeledExample",
    "PromptTemplate",
    "SimCalibration",
    "SimulatedLlmLabeler",
    "Source",
    "build_prompt",
    "constrain_first_token",
    "HashedFeatureSpec",
    "LinearModel",
    "TrainParams",
    "accuracy",
    "predict",
    "train",
    "decile_accuracy",
    "rouge_l",
    "rouge_l_text",
    "Pool",
    "UnlabeledExample",
    "load_pool",
    "sample",
    "token_count",
    "EvaluationReport",
    "ReportRow",
    "LabelingPlan",
    "Strategy",
    "StrategyConfig",
    "active_relabel",
    "plan",
    "run_plan",
    "SupervisionSet",
    "assemble",
    "export_supervision",
    "import_supervision",
    "run_label_once",
    "run_sweep",
]

__version__ = "0.1.0"
