"""Exception types shared across the package."""
from __future__ import annotations


class LabelBudgetError(Exception):
    """Base class for all labelbudget errors."""


class BudgetExhausted(LabelBudgetError):
    """A reservation would push the ledger past its total budget.

    This is a flow-control signal: the caller should stop issuing new work,
    not abort the run.
    """

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(
            f"reservation of {requested} micro-dollars exceeds the "
            f"{available} micro-dollars still available"
        )


class InfeasiblePlan(LabelBudgetError):
    """The budget cannot buy the minimum work the strategy requires."""

    def __init__(self, message: str, shortfall: int = 0):
        self.shortfall = shortfall
        super().__init__(message)


class PoolFormatError(LabelBudgetError):
    """A pool record was rejected during load."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PromptTooLong(LabelBudgetError):
    """Rendered prompt exceeds the template's token limit."""

    def __init__(self, overflow: int, limit: int):
        self.overflow = overflow
        self.limit = limit
        super().__init__(f"prompt exceeds the {limit}-token limit by {overflow} tokens")


class UnmappableLabel(LabelBudgetError):
    """No vocabulary label could be mapped onto the returned token logits."""


class SimulationImpossible(LabelBudgetError):
    """A simulated labeler needs information the example does not carry."""


class TransportError(LabelBudgetError):
    """Retryable failure talking to the completion service."""


class MalformedResponse(LabelBudgetError):
    """Non-retryable: the completion service answered with an unusable payload."""


class SchemaError(LabelBudgetError):
    """A serialized record violates its file schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DivergenceError(LabelBudgetError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite loss at optimization step {step}")
