"""ROUGE-N scoring on word tokens: clipped contiguous n-gram overlap.

Match counts are clipped to the reference multiplicity (Lin 2004
convention). No stemming, no stopword removal; tokenization is the
corpus module's lowercase word/punctuation split.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def ngram_set(tokens: Sequence[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram precision/recall/F1; degenerate inputs score 0."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    cand = ngram_counts(candidate, n)
    ref = ngram_counts(reference, n)
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    if cand_total == 0 or ref_total == 0:
        return RougeScore(0.0, 0.0, 0.0)
    matched = sum(min(count, ref[gram]) for gram, count in cand.items())
    precision = matched / cand_total
    recall = matched / ref_total
    return RougeScore(precision, recall, f1_score(precision, recall))
