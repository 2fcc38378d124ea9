"""Label producers: n-shot prompting against a completion service, a
calibrated simulated LLM, and a gold-label human oracle.

Every labeler returns LabeledExample records carrying the label, a confidence
score, the incurred cost in micro-dollars, and the source. Human confidence is
a sentinel above anything an LLM can return.
"""
from __future__ import annotations

import enum
import hashlib
import math
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

import requests

from .costs import CostSchedule, TaskKind, human_label_cost, llm_label_cost
from .errors import (
    MalformedResponse,
    PromptTooLong,
    SimulationImpossible,
    TransportError,
    UnmappableLabel,
)
from .pool import UnlabeledExample, token_count

# Stands in for the +inf the oracle conceptually has; keeps records plain floats.
HUMAN_CONFIDENCE = sys.float_info.max


class Source(enum.Enum):
    LLM = "llm"
    HUMAN = "human"


@dataclass(frozen=True)
class LabeledExample:
    id: str
    label: str
    source: Source
    confidence: float
    cost: int  # micro-dollars
    shots_used: int = 0


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt layout: instruction, one block per demonstration, then the
    query with its label slot left open. Separators belong to the format
    strings themselves; rendering is plain concatenation."""

    instruction: str
    demo_format: str  # must contain {input} and {label} exactly once each
    query_format: str  # must contain {input} exactly once
    stop_sequence: str = "\n"
    label_vocabulary: Optional[frozenset[str]] = None
    max_prompt_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.demo_format.count("{input}") != 1 or self.demo_format.count("{label}") != 1:
            raise ValueError("demo_format needs {input} and {label} exactly once each")
        if self.query_format.count("{input}") != 1:
            raise ValueError("query_format needs {input} exactly once")
        if "{label}" in self.query_format:
            raise ValueError("query_format must leave the label slot open")
        if not self.stop_sequence:
            raise ValueError("stop_sequence must be non-empty")


@dataclass(frozen=True)
class DemoSet:
    """The fixed demonstrations prepended to every query in a run."""

    demos: tuple[tuple[str, str], ...]  # (input text, label text)

    def __post_init__(self) -> None:
        if len(self.demos) < 1:
            raise ValueError("a demo set needs at least one demonstration")

    @property
    def shots(self) -> int:
        return len(self.demos)


def build_prompt(
    template: PromptTemplate,
    demo_set: DemoSet,
    query: UnlabeledExample | str,
    tokenizer_mode: str = "whitespace",
) -> str:
    """Render the full prompt for one query. Raises PromptTooLong with the
    overflow amount if the rendering exceeds the template's token limit."""
    query_text = query if isinstance(query, str) else query.text
    parts = [template.instruction]
    for demo_input, demo_label in demo_set.demos:
        parts.append(template.demo_format.format(input=demo_input, label=demo_label))
    parts.append(template.query_format.format(input=query_text))
    prompt = "".join(parts)
    length = token_count(prompt, tokenizer_mode)
    if length > template.max_prompt_tokens:
        raise PromptTooLong(overflow=length - template.max_prompt_tokens,
                            limit=template.max_prompt_tokens)
    return prompt


def default_first_token(label: str) -> str:
    return label.split()[0] if label.split() else label


def constrain_first_token(
    token_logits: Mapping[str, float],
    label_vocabulary: Iterable[str],
    first_token: Callable[[str], str] | Mapping[str, str] | None = None,
) -> tuple[str, float]:
    """Map first-token logits back onto the label vocabulary.

    Returns the label whose first token carries the maximum logit among
    vocabulary-mapped tokens, ties broken by lexicographic label order.
    Raises UnmappableLabel when no vocabulary token is present.
    """
    if first_token is None:
        lookup: Callable[[str], str] = default_first_token
    elif isinstance(first_token, Mapping):
        lookup = first_token.__getitem__
    else:
        lookup = first_token
    best: tuple[float, str] | None = None
    for label in sorted(label_vocabulary):
        token = lookup(label)
        if token not in token_logits:
            continue
        logit = token_logits[token]
        if best is None or logit > best[0]:
            best = (logit, label)
    if best is None:
        raise UnmappableLabel(
            f"none of {sorted(token_logits)} maps onto the label vocabulary"
        )
    return best[1], best[0]


@dataclass(frozen=True)
class SimCalibration:
    """Monotone map from a uniform confidence draw to the probability the
    simulated label is correct. Default is affine between floor and ceiling;
    identity calibration is floor=0, ceiling=1."""

    floor_accuracy: float = 0.0
    ceiling_accuracy: float = 1.0
    curve: Optional[Callable[[float], float]] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.floor_accuracy <= self.ceiling_accuracy <= 1.0:
            raise ValueError("need 0 <= floor <= ceiling <= 1")

    def probability_correct(self, u: float) -> float:
        if self.curve is not None:
            return self.curve(u)
        return self.floor_accuracy + (self.ceiling_accuracy - self.floor_accuracy) * u


def _unit_draws(seed: int, example_id: str, n: int) -> list[float]:
    """n independent uniforms in [0, 1), a pure function of (seed, id).

    Keyed hashing keeps draws identical across call orders, so runs that
    share a seed see the same per-item randomness regardless of strategy.
    """
    digest = hashlib.blake2b(
        example_id.encode("utf-8"),
        key=seed.to_bytes(8, "big", signed=True),
        digest_size=8 * n,
    ).digest()
    return [
        int.from_bytes(digest[8 * i : 8 * (i + 1)], "big") / 2**64 for i in range(n)
    ]


class SimulatedLlmLabeler:
    """Offline classification labeler with a controllable confidence-accuracy
    relationship: draw u, answer correctly with probability g(u), report u as
    the confidence. Deterministic given (seed, example id)."""

    def __init__(
        self,
        calibration: SimCalibration,
        label_vocabulary: Iterable[str],
        seed: int,
        schedule: CostSchedule,
        shots: int,
        avg_tokens: Fraction | float | int,
    ):
        self.calibration = calibration
        self.vocabulary = tuple(sorted(label_vocabulary))
        if len(self.vocabulary) < 2:
            raise ValueError("simulation needs at least two labels")
        self.seed = seed
        self.schedule = schedule
        self.shots = shots
        self._cost = llm_label_cost(avg_tokens, shots, schedule)

    def unit_cost(self, example: UnlabeledExample) -> int:
        return self._cost

    def label(self, example: UnlabeledExample) -> LabeledExample:
        if example.gold_label is None:
            raise SimulationImpossible(f"example {example.id!r} has no gold label")
        u, v, w = _unit_draws(self.seed, example.id, 3)
        if v < self.calibration.probability_correct(u):
            label = example.gold_label
        else:
            wrong = [lab for lab in self.vocabulary if lab != example.gold_label]
            label = wrong[int(w * len(wrong))]
        return LabeledExample(
            id=example.id,
            label=label,
            source=Source.LLM,
            confidence=u,
            cost=self._cost,
            shots_used=self.shots,
        )


class HumanOracleLabeler:
    """Simulated crowd worker: copies the gold label at the human price."""

    def __init__(self, schedule: CostSchedule, task_kind: TaskKind):
        self.schedule = schedule
        self.task_kind = task_kind

    def unit_cost(self, example: UnlabeledExample) -> int:
        return human_label_cost(example.token_count, self.task_kind, self.schedule)

    def label(self, example: UnlabeledExample) -> LabeledExample:
        if example.gold_label is None:
            raise SimulationImpossible(f"example {example.id!r} has no gold label")
        return LabeledExample(
            id=example.id,
            label=example.gold_label,
            source=Source.HUMAN,
            confidence=HUMAN_CONFIDENCE,
            cost=self.unit_cost(example),
            shots_used=0,
        )


@dataclass
class CompletionResult:
    text: str
    tokens: list[str]
    token_logprobs: list[float]
    first_token_top_logprobs: dict[str, float]
    prompt_tokens: int
    completion_tokens: int


class HttpCompletionBackend:
    """Minimal client for a text-completion service.

    POSTs a JSON body with prompt, max_tokens, stop, temperature 0, an
    optional logit_bias map, and a request for per-token logprobs. The
    credential is read from an environment variable named in config, never
    stored in config itself.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        credential_env: Optional[str] = None,
        timeout: float = 30.0,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.credential_env = credential_env
        self.timeout = timeout
        self.session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.credential_env:
            credential = os.environ.get(self.credential_env)
            if not credential:
                raise TransportError(
                    f"credential variable {self.credential_env} is not set"
                )
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def complete(
        self,
        prompt: str,
        max_tokens: int,
        stop: str,
        logit_bias: Optional[Mapping[str, float]] = None,
        logprobs: int = 5,
    ) -> CompletionResult:
        body = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "stop": [stop],
            "temperature": 0,
            "logprobs": logprobs,
        }
        if logit_bias:
            body["logit_bias"] = dict(logit_bias)
        try:
            response = self.session.post(
                self.endpoint, json=body, headers=self._headers(), timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code >= 500:
            raise TransportError(f"server returned {response.status_code}")
        if response.status_code != 200:
            raise MalformedResponse(
                f"server returned {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
            choice = payload["choices"][0]
            lp = choice.get("logprobs") or {}
            top = lp.get("top_logprobs") or [{}]
            return CompletionResult(
                text=choice["text"],
                tokens=list(lp.get("tokens", [])),
                token_logprobs=[float(x) for x in lp.get("token_logprobs", [])],
                first_token_top_logprobs={str(k): float(v) for k, v in (top[0] or {}).items()},
                prompt_tokens=int(payload.get("usage", {}).get("prompt_tokens", 0)),
                completion_tokens=int(payload.get("usage", {}).get("completion_tokens", 0)),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"unusable completion payload: {exc}") from exc


def llm_label(
    backend: HttpCompletionBackend,
    template: PromptTemplate,
    demo_set: DemoSet,
    query: UnlabeledExample,
    schedule: CostSchedule,
    task_kind: TaskKind,
    first_token: Callable[[str], str] | Mapping[str, str] | None = None,
    max_output_tokens: int = 64,
    max_attempts: int = 3,
    backoff_seconds: float = 0.5,
) -> LabeledExample:
    """One LLM label over the live backend, with bounded retries.

    Classification constrains decoding to the vocabulary's first tokens and
    reports the winning first-token logit as confidence. Generation takes the
    whole completion up to the stop sequence; its confidence is the mean
    per-token logit and is advisory only.
    """
    prompt = build_prompt(template, demo_set, query)
    logit_bias = None
    if task_kind is TaskKind.CLASSIFICATION:
        if not template.label_vocabulary:
            raise ValueError("classification labeling needs a label vocabulary")
        lookup = first_token
        if lookup is None:
            lookup = default_first_token
        elif isinstance(lookup, Mapping):
            lookup = lookup.__getitem__
        logit_bias = {lookup(label): 100.0 for label in sorted(template.label_vocabulary)}
        max_output_tokens = 1
    attempt = 0
    while True:
        attempt += 1
        try:
            result = backend.complete(
                prompt,
                max_tokens=max_output_tokens,
                stop=template.stop_sequence,
                logit_bias=logit_bias,
                logprobs=max(5, len(logit_bias or {})),
            )
            break
        except TransportError:
            if attempt >= max_attempts:
                raise
            time.sleep(backoff_seconds * 2 ** (attempt - 1))
    billed_tokens = result.prompt_tokens + result.completion_tokens
    if billed_tokens > 0:
        cost = billed_tokens * schedule.llm_price_per_token
    else:  # service did not report usage; fall back to the planning formula
        cost = llm_label_cost(query.token_count, demo_set.shots, schedule)
    if task_kind is TaskKind.CLASSIFICATION:
        label, logit = constrain_first_token(
            result.first_token_top_logprobs, template.label_vocabulary, first_token
        )
        confidence = logit
    else:
        text = result.text
        if template.stop_sequence in text:
            text = text.split(template.stop_sequence, 1)[0]
        label = text.strip()
        confidence = (
            sum(result.token_logprobs) / len(result.token_logprobs)
            if result.token_logprobs
            else -math.inf
        )
    return LabeledExample(
        id=query.id,
        label=label,
        source=Source.LLM,
        confidence=confidence,
        cost=cost,
        shots_used=demo_set.shots,
    )


class LiveLlmLabeler:
    """Adapter giving the live path the same surface as the simulated one."""

    def __init__(
        self,
        backend: HttpCompletionBackend,
        template: PromptTemplate,
        demo_set: DemoSet,
        schedule: CostSchedule,
        task_kind: TaskKind,
        avg_tokens: Fraction | float | int,
        first_token: Callable[[str], str] | Mapping[str, str] | None = None,
        max_output_tokens: int = 64,
        max_attempts: int = 3,
        backoff_seconds: float = 0.5,
        reserve_headroom: float = 2.0,
        max_in_flight: int = 1,
    ):
        self.backend = backend
        self.template = template
        self.demo_set = demo_set
        self.schedule = schedule
        self.task_kind = task_kind
        self.first_token = first_token
        self.max_output_tokens = max_output_tokens
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self.shots = demo_set.shots
        self.max_in_flight = max_in_flight
        self._unit = llm_label_cost(avg_tokens, demo_set.shots, schedule)
        self._reserve = math.ceil(self._unit * reserve_headroom)

    def unit_cost(self, example: UnlabeledExample) -> int:
        # Reserve with headroom: the service bills actual usage, which can
        # exceed the average-length estimate.
        return self._reserve

    def label(self, example: UnlabeledExample) -> LabeledExample:
        return llm_label(
            self.backend,
            self.template,
            self.demo_set,
            example,
            schedule=self.schedule,
            task_kind=self.task_kind,
            first_token=self.first_token,
            max_output_tokens=self.max_output_tokens,
            max_attempts=self.max_attempts,
            backoff_seconds=self.backoff_seconds,
        )


def demo_set_from_examples(
    examples: Sequence[UnlabeledExample],
) -> DemoSet:
    """Build the fixed demo set from gold-labeled pool items."""
    demos = []
    for ex in examples:
        if ex.gold_label is None:
            raise SimulationImpossible(
                f"demo example {ex.id!r} has no gold label to show"
            )
        demos.append((ex.text, ex.gold_label))
    return DemoSet(demos=tuple(demos))
