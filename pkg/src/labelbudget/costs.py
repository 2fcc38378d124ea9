"""Pricing rules and budget accounting.

All monetary amounts are integer micro-dollars (1e-6 $). Costs are computed
with exact rational arithmetic and quantized once, so ledgers reproduce
bit-for-bit across runs; rounding for display happens only at report emission.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Union

from .errors import BudgetExhausted

MICRO_PER_DOLLAR = 1_000_000

# Budget points are the human cost of labeling 10, 20, ... 5,120 items.
LADDER_MULTIPLIERS = (10, 20, 40, 80, 160, 320, 640, 1280, 2560, 5120)

Numeric = Union[int, float, str, Fraction]


def as_fraction(value: Numeric) -> Fraction:
    """Exact rational from a config-style number. Floats go through their
    shortest decimal repr, so 19.3 means 193/10, not the binary float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def usd(amount: Numeric) -> int:
    """Convert a decimal dollar amount to micro-dollars, exactly.

    Raises ValueError for amounts finer than micro-dollar resolution
    (config files carry at most 6 fractional digits).
    """
    scaled = as_fraction(amount) * MICRO_PER_DOLLAR
    if scaled.denominator != 1:
        raise ValueError(f"{amount!r} is finer than micro-dollar resolution")
    return scaled.numerator


def to_micro(amount: Fraction) -> int:
    """Quantize an exact dollar fraction to micro-dollars (half-even)."""
    return round(amount * MICRO_PER_DOLLAR)


def dollars_str(micro: int, places: int = 6) -> str:
    """Fixed-point dollar string, e.g. 110000 -> '0.110000'."""
    q = Decimal(1).scaleb(-places)
    return str((Decimal(micro) / MICRO_PER_DOLLAR).quantize(q))


def sig2_str(micro: int) -> str:
    """Two-significant-figure display used by cost tables.

    Values below $0.1 render in scientific notation ('2.3e-3'), larger
    values in plain decimal ('0.11'). Half-up rounding.
    """
    if micro == 0:
        return "0"
    d = Decimal(micro).scaleb(-6)
    q = d.quantize(Decimal(1).scaleb(d.adjusted() - 1), rounding=ROUND_HALF_UP)
    exp = q.adjusted()  # may have grown if the rounding carried (0.0996 -> 0.10)
    if exp >= -1:
        return f"{q:.{max(0, 1 - exp)}f}"
    mantissa = q.scaleb(-exp)
    return f"{mantissa:.1f}e{exp}"


class TaskKind(enum.Enum):
    CLASSIFICATION = "classification"
    GENERATION = "generation"


class HumanPricingMode(enum.Enum):
    FLAT_PER_LABEL = "flat_per_label"
    PROPORTIONAL_WITH_FLOOR = "proportional_with_floor"


@dataclass(frozen=True)
class CostSchedule:
    """Per-label pricing. Defaults: $4e-5 per LLM token; $0.11 per 50 human
    tokens with a $0.11 minimum (classification is flat per label).

    human_pricing_mode=None derives the mode from the task kind; setting it
    forces one rule for both kinds.
    """

    llm_price_per_token: int = 40  # micro-dollars
    human_unit_price: int = 110_000  # micro-dollars per human_unit_tokens
    human_unit_tokens: int = 50
    human_min_charge: int = 110_000  # micro-dollars
    human_pricing_mode: HumanPricingMode | None = None

    def __post_init__(self) -> None:
        if self.llm_price_per_token <= 0 or self.human_unit_price <= 0:
            raise ValueError("prices must be strictly positive")
        if self.human_min_charge < 0:
            raise ValueError("human_min_charge must be >= 0")
        if self.human_unit_tokens < 1:
            raise ValueError("human_unit_tokens must be >= 1")

    @classmethod
    def from_dollars(
        cls,
        llm_price_per_token: Numeric = "0.00004",
        human_unit_price: Numeric = "0.11",
        human_unit_tokens: int = 50,
        human_min_charge: Numeric = "0.11",
        human_pricing_mode: HumanPricingMode | None = None,
    ) -> "CostSchedule":
        return cls(
            llm_price_per_token=usd(llm_price_per_token),
            human_unit_price=usd(human_unit_price),
            human_unit_tokens=human_unit_tokens,
            human_min_charge=usd(human_min_charge),
            human_pricing_mode=human_pricing_mode,
        )


DEFAULT_SCHEDULE = CostSchedule()


def llm_label_cost(
    avg_tokens: Numeric, shots: int, schedule: CostSchedule = DEFAULT_SCHEDULE
) -> int:
    """Cost in micro-dollars of one n-shot LLM label.

    The prompt repeats the dataset's average length once per demonstration
    plus once for the query, so the charge is tokens * price * (shots + 1).
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    tokens = as_fraction(avg_tokens)
    if tokens < 0:
        raise ValueError("avg_tokens must be >= 0")
    cost = tokens * schedule.llm_price_per_token * (shots + 1)
    if cost.denominator != 1:
        return round(cost)
    return cost.numerator


def human_label_cost(
    tokens: Numeric, task_kind: TaskKind, schedule: CostSchedule = DEFAULT_SCHEDULE
) -> int:
    """Cost in micro-dollars of one human label.

    Classification is flat per label; generation is charged per
    human_unit_tokens with a minimum charge.
    """
    count = as_fraction(tokens)
    if count < 0:
        raise ValueError("tokens must be >= 0")
    mode = schedule.human_pricing_mode
    if mode is None:
        mode = (
            HumanPricingMode.FLAT_PER_LABEL
            if task_kind is TaskKind.CLASSIFICATION
            else HumanPricingMode.PROPORTIONAL_WITH_FLOOR
        )
    if mode is HumanPricingMode.FLAT_PER_LABEL:
        return schedule.human_unit_price
    proportional = count * schedule.human_unit_price / schedule.human_unit_tokens
    return max(schedule.human_min_charge, round(proportional))  # already micro-dollars


def affordable_count(budget: int, unit_cost: int) -> int:
    """How many units a budget buys: floor(budget / unit_cost)."""
    if unit_cost <= 0:
        raise ValueError(f"unit_cost must be > 0, got {unit_cost}")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    return budget // unit_cost


def budget_ladder(human_unit_cost: int) -> list[int]:
    """The ten doubling budget points, in micro-dollars."""
    if human_unit_cost <= 0:
        raise ValueError("human_unit_cost must be > 0")
    return [human_unit_cost * m for m in LADDER_MULTIPLIERS]


@dataclass(frozen=True)
class LedgerEntry:
    example_id: str
    labeler_kind: str
    amount: int  # micro-dollars


class Reservation:
    """Handle for budget held aside but not yet spent. One-shot: settle or
    release exactly once."""

    __slots__ = ("amount", "_open")

    def __init__(self, amount: int):
        self.amount = amount
        self._open = True


class BudgetLedger:
    """Reserve/settle accounting against a fixed total budget.

    Invariant: reserved + settled <= total at all times, under any
    interleaving. All mutating calls are serialized on an internal lock;
    this is the single writer for a run.
    """

    def __init__(self, total_budget: int):
        if total_budget < 0:
            raise ValueError("total_budget must be >= 0")
        self._total = total_budget
        self._reserved = 0
        self._settled = 0
        self._entries: list[LedgerEntry] = []
        self._lock = threading.Lock()

    @property
    def total(self) -> int:
        return self._total

    @property
    def reserved(self) -> int:
        with self._lock:
            return self._reserved

    @property
    def settled(self) -> int:
        with self._lock:
            return self._settled

    @property
    def available(self) -> int:
        with self._lock:
            return self._total - self._reserved - self._settled

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def spend_by_kind(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for entry in self.entries:
            totals[entry.labeler_kind] = totals.get(entry.labeler_kind, 0) + entry.amount
        return totals

    def reserve(self, amount: int) -> Reservation:
        if amount < 0:
            raise ValueError("reservation amount must be >= 0")
        with self._lock:
            available = self._total - self._reserved - self._settled
            if amount > available:
                raise BudgetExhausted(requested=amount, available=available)
            self._reserved += amount
            return Reservation(amount)

    def reserve_up_to(self, amount: int) -> Reservation:
        """Atomically reserve as much of amount as is still available,
        possibly zero. For settling actual spend that exceeded an estimate."""
        if amount < 0:
            raise ValueError("reservation amount must be >= 0")
        with self._lock:
            available = self._total - self._reserved - self._settled
            take = min(amount, max(available, 0))
            self._reserved += take
            return Reservation(take)

    def settle(
        self, reservation: Reservation, actual: int, example_id: str, labeler_kind: str
    ) -> None:
        """Convert a reservation into spend. actual may be less than the
        reserved amount; the difference returns to the available budget."""
        if actual < 0:
            raise ValueError("settled amount must be >= 0")
        if actual > reservation.amount:
            raise ValueError(
                f"settled amount {actual} exceeds reserved {reservation.amount}"
            )
        with self._lock:
            self._consume(reservation)
            self._reserved -= reservation.amount
            self._settled += actual
            if actual > 0:
                self._entries.append(LedgerEntry(example_id, labeler_kind, actual))

    def release(self, reservation: Reservation) -> None:
        """Return an unused reservation; the ledger is left as if the
        reserve never happened."""
        with self._lock:
            self._consume(reservation)
            self._reserved -= reservation.amount

    @staticmethod
    def _consume(reservation: Reservation) -> None:
        if not reservation._open:
            raise ValueError("reservation already settled or released")
        reservation._open = False

    def snapshot(self) -> tuple[int, int, tuple[LedgerEntry, ...]]:
        with self._lock:
            return (self._reserved, self._settled, tuple(self._entries))
