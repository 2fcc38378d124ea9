"""Label-quality metrics: ROUGE-L, confidence-decile accuracy, rank
correlation."""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .labelers import LabeledExample, Source


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest common subsequence length, two-row dynamic program."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(candidate: Sequence, reference: Sequence) -> float:
    """LCS-based F1. Zero when either side is empty or nothing is shared."""
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2 * precision * recall / (precision + recall)


def rouge_l_text(candidate: str, reference: str) -> float:
    """ROUGE-L over lowercased whitespace tokens; no stemming, so scores are
    comparable only within this artifact."""
    return rouge_l(candidate.lower().split(), reference.lower().split())


def decile_accuracy(
    records: Iterable[LabeledExample], gold: Mapping[str, str]
) -> list[float]:
    """Exact-match accuracy per confidence decile, most confident first.

    Records are sorted by descending confidence (ties by id) and split into
    10 contiguous buckets; when the count is not divisible the extra items go
    to the highest-confidence buckets.
    """
    llm_records = [r for r in records if r.source is Source.LLM]
    if len(llm_records) < 10:
        raise ValueError(
            f"decile analysis needs at least 10 LLM-labeled records, got {len(llm_records)}"
        )
    ranked = sorted(llm_records, key=lambda r: (-r.confidence, r.id))
    n = len(ranked)
    base, remainder = divmod(n, 10)
    accuracies = []
    cursor = 0
    for bucket in range(10):
        size = base + (1 if bucket < remainder else 0)
        chunk = ranked[cursor : cursor + size]
        cursor += size
        hits = sum(r.label == gold[r.id] for r in chunk)
        accuracies.append(hits / size)
    return accuracies


def spearman_rank_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho with average ranks for ties; 0 when either side is
    constant."""
    if len(xs) != len(ys):
        raise ValueError("sequences must have equal length")
    n = len(xs)
    if n < 2:
        return 0.0

    def average_ranks(values):
        order = sorted(range(n), key=lambda i: values[i])
        ranks = [0.0] * n
        i = 0
        while i < n:
            j = i
            while j + 1 < n and values[order[j + 1]] == values[order[i]]:
                j += 1
            rank = (i + j) / 2 + 1
            for k in range(i, j + 1):
                ranks[order[k]] = rank
            i = j + 1
        return ranks

    rx = average_ranks(xs)
    ry = average_ranks(ys)
    mean = (n + 1) / 2
    cov = sum((a - mean) * (b - mean) for a, b in zip(rx, ry))
    var_x = sum((a - mean) ** 2 for a in rx)
    var_y = sum((b - mean) ** 2 for b in ry)
    if var_x == 0 or var_y == 0:
        return 0.0
    return cov / (var_x * var_y) ** 0.5
