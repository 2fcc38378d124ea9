"""Weighted dual-supervision training sets.

A supervision set is the union of LLM- and human-labeled records where every
LLM record carries weight 1 and every human record carries the configured
alpha. Serialization is line-delimited JSON with a header comment, canonical
(sorted ids, sorted keys), so identical sets export byte-identically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Optional

from .costs import dollars_str, usd
from .errors import SchemaError
from .labelers import LabeledExample, Source

HEADER_PREFIX = "# labelbudget supervision-set v1 alpha="


@dataclass(frozen=True)
class SupervisionSet:
    records: tuple[tuple[LabeledExample, float], ...]
    alpha: float

    def __len__(self) -> int:
        return len(self.records)

    @property
    def weight_sum(self) -> float:
        return sum(weight for _, weight in self.records)

    def counts_by_source(self) -> dict[Source, int]:
        counts = {Source.LLM: 0, Source.HUMAN: 0}
        for record, _ in self.records:
            counts[record.source] += 1
        return counts


def assemble(labeled: Iterable[LabeledExample], alpha: float) -> SupervisionSet:
    """Weight records by source (LLM -> 1, human -> alpha) and order them
    canonically by id."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    by_id: dict[str, LabeledExample] = {}
    for record in labeled:
        if record.id in by_id:
            raise ValueError(f"duplicate id {record.id!r} in labeled set")
        by_id[record.id] = record
    weighted = tuple(
        (by_id[i], 1.0 if by_id[i].source is Source.LLM else float(alpha))
        for i in sorted(by_id)
    )
    return SupervisionSet(records=weighted, alpha=float(alpha))


def export_supervision(
    sset: SupervisionSet,
    sink: IO[str],
    texts: Optional[Mapping[str, str]] = None,
) -> None:
    """Write the canonical line format. When texts is given, each record
    inlines its text; otherwise text_ref stays null and readers resolve the
    id against the pool file."""
    sink.write(f"{HEADER_PREFIX}{sset.alpha!r}\n")
    for record, weight in sset.records:
        payload = {
            "id": record.id,
            "text_ref": texts[record.id] if texts is not None else None,
            "label": record.label,
            "source": record.source.value,
            "confidence": record.confidence,
            "weight": weight,
            "cost": dollars_str(record.cost),
            "shots_used": record.shots_used,
        }
        sink.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def import_supervision(source: Iterable[str]) -> tuple[SupervisionSet, dict[str, str]]:
    """Inverse of export_supervision. Returns the set and any inlined texts.
    Raises SchemaError with the offending line number on violations."""
    lines = iter(enumerate(source, start=1))
    try:
        _, header = next(lines)
    except StopIteration:
        raise SchemaError("empty file, expected a header line") from None
    header = header.rstrip("\n")
    if not header.startswith(HEADER_PREFIX):
        raise SchemaError("missing supervision-set header", line=1)
    try:
        alpha = float(header[len(HEADER_PREFIX):])
    except ValueError:
        raise SchemaError("unreadable alpha in header", line=1) from None
    if alpha < 0:
        raise SchemaError("alpha must be >= 0", line=1)

    records: list[tuple[LabeledExample, float]] = []
    texts: dict[str, str] = {}
    seen: set[str] = set()
    for lineno, raw in lines:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed record: {exc.msg}", line=lineno) from None
        try:
            record_id = payload["id"]
            label = payload["label"]
            source_value = payload["source"]
            confidence = payload["confidence"]
            weight = payload["weight"]
            cost = payload["cost"]
        except KeyError as exc:
            raise SchemaError(f"missing key {exc.args[0]!r}", line=lineno) from None
        if record_id in seen:
            raise SchemaError(f"duplicate id {record_id!r}", line=lineno)
        seen.add(record_id)
        try:
            record_source = Source(source_value)
        except ValueError:
            raise SchemaError(f"unknown source {source_value!r}", line=lineno) from None
        if not isinstance(weight, (int, float)) or weight < 0:
            raise SchemaError("weight must be a non-negative number", line=lineno)
        expected = 1.0 if record_source is Source.LLM else alpha
        if float(weight) != expected:
            raise SchemaError(
                f"weight {weight} inconsistent with source and alpha={alpha}",
                line=lineno,
            )
        try:
            cost_micro = usd(cost)
        except (ValueError, TypeError):
            raise SchemaError(f"unreadable cost {cost!r}", line=lineno) from None
        record = LabeledExample(
            id=record_id,
            label=label,
            source=record_source,
            confidence=float(confidence),
            cost=cost_micro,
            shots_used=int(payload.get("shots_used", 0)),
        )
        records.append((record, float(weight)))
        if payload.get("text_ref") is not None:
            texts[record_id] = payload["text_ref"]

    ordered = sorted(records, key=lambda pair: pair[0].id)
    return SupervisionSet(records=tuple(ordered), alpha=alpha), texts
