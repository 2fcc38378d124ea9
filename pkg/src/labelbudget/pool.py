"""Unlabeled-pool ingestion, token counting, and deterministic sampling.

Pool files are line-delimited UTF-8: one flat JSON object per line with a
required "id" and "text", optional "gold_label" and "token_count". Canonical
export sorts keys lexicographically and uses LF endings, so a pool round-trips
byte-identically.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, IO, Iterable, Iterator, Optional

from .costs import TaskKind, as_fraction
from .errors import PoolFormatError

DEFAULT_POOL_CAP = 5120

Tokenizer = Callable[[str], list[str]]

_TOKENIZERS: dict[str, Tokenizer] = {}


def register_tokenizer(name: str, fn: Tokenizer) -> None:
    _TOKENIZERS[name] = fn


register_tokenizer("whitespace", str.split)


def token_count(text: str, tokenizer_mode: str = "whitespace") -> int:
    """Number of tokens under the named tokenizer (default: maximal
    non-whitespace runs)."""
    try:
        tokenizer = _TOKENIZERS[tokenizer_mode]
    except KeyError:
        raise ValueError(f"unknown tokenizer mode {tokenizer_mode!r}") from None
    return len(tokenizer(text))


@dataclass(frozen=True)
class UnlabeledExample:
    """One pool item. gold_label is the simulation oracle; labeling
    strategies never see it directly, only through the human labeler."""

    id: str
    text: str
    token_count: int
    gold_label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.token_count < 0:
            raise ValueError("token_count must be >= 0")


@dataclass(frozen=True)
class Pool:
    examples: tuple[UnlabeledExample, ...]
    task_kind: TaskKind
    label_vocabulary: Optional[frozenset[str]] = None
    avg_tokens: Fraction = field(default=Fraction(0))

    def __post_init__(self) -> None:
        if self.task_kind is TaskKind.CLASSIFICATION and not self.label_vocabulary:
            raise ValueError("classification pools must declare a label vocabulary")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[UnlabeledExample]:
        return iter(self.examples)

    def by_id(self, example_id: str) -> UnlabeledExample:
        return self._index[example_id]

    @property
    def _index(self) -> dict[str, UnlabeledExample]:
        index = self.__dict__.get("_index_cache")
        if index is None:
            index = {ex.id: ex for ex in self.examples}
            self.__dict__["_index_cache"] = index
        return index


def load_pool(
    record_stream: Iterable[str],
    task_kind: TaskKind,
    label_vocabulary: Optional[Iterable[str]] = None,
    avg_tokens_override: Optional[float | str | Fraction] = None,
    tokenizer_mode: str = "whitespace",
    cap: int = DEFAULT_POOL_CAP,
) -> Pool:
    """Parse and validate a pool from line-delimited records.

    avg_tokens is the mean per-example token count unless overridden (the
    override lets a pool reproduce a published per-dataset average exactly).
    """
    vocabulary = frozenset(label_vocabulary) if label_vocabulary is not None else None
    examples: list[UnlabeledExample] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(record_stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PoolFormatError(f"malformed record: {exc.msg}", line=lineno) from None
        if not isinstance(record, dict):
            raise PoolFormatError("record is not an object", line=lineno)
        try:
            example_id = record["id"]
            text = record["text"]
        except KeyError as exc:
            raise PoolFormatError(f"missing required key {exc.args[0]!r}", line=lineno) from None
        if not isinstance(example_id, str) or not isinstance(text, str):
            raise PoolFormatError("id and text must be strings", line=lineno)
        if example_id in seen:
            raise PoolFormatError(
                f"duplicate id {example_id!r} (first seen on line {seen[example_id]})",
                line=lineno,
            )
        seen[example_id] = lineno
        gold = record.get("gold_label")
        if gold is not None:
            if not isinstance(gold, str):
                raise PoolFormatError("gold_label must be a string", line=lineno)
            if vocabulary is not None and gold not in vocabulary:
                raise PoolFormatError(
                    f"gold_label {gold!r} not in the declared vocabulary", line=lineno
                )
        count = record.get("token_count")
        if count is None:
            count = token_count(text, tokenizer_mode)
        elif not isinstance(count, int) or count < 0:
            raise PoolFormatError("token_count must be a non-negative integer", line=lineno)
        examples.append(UnlabeledExample(example_id, text, count, gold))
    if len(examples) > cap:
        raise PoolFormatError(f"pool has {len(examples)} examples, cap is {cap}")
    if avg_tokens_override is not None:
        avg = as_fraction(avg_tokens_override)
    elif examples:
        avg = Fraction(sum(ex.token_count for ex in examples), len(examples))
    else:
        avg = Fraction(0)
    return Pool(
        examples=tuple(examples),
        task_kind=task_kind,
        label_vocabulary=vocabulary,
        avg_tokens=avg,
    )


def load_pool_file(path, **kwargs) -> Pool:
    with open(path, encoding="utf-8") as handle:
        return load_pool(handle, **kwargs)


def dump_pool(pool: Pool, sink: Optional[IO[str]] = None) -> Optional[str]:
    """Canonical serialization: sorted keys, compact separators, LF endings."""
    lines = []
    for ex in pool.examples:
        record = {"id": ex.id, "text": ex.text, "token_count": ex.token_count}
        if ex.gold_label is not None:
            record["gold_label"] = ex.gold_label
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    payload = "".join(line + "\n" for line in lines)
    if sink is None:
        return payload
    sink.write(payload)
    return None


def permutation(pool: Pool, seed: int) -> list[UnlabeledExample]:
    """The seeded shuffle of the whole pool. sample() takes prefixes of this,
    so disjoint index ranges of one permutation never overlap."""
    order = list(pool.examples)
    random.Random(seed).shuffle(order)
    return order


def sample(pool: Pool, n: int, seed: int) -> list[UnlabeledExample]:
    """First n items of the seeded shuffle; a prefix of any larger sample
    with the same seed."""
    if n < 0 or n > len(pool):
        raise ValueError(f"sample size {n} outside [0, {len(pool)}]")
    return permutation(pool, seed)[:n]
