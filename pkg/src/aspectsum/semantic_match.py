"""Extractive oracle construction by greedy per-reference-sentence matching.

The semantic scheme scores a candidate sentence against one reference
sentence by token-level greedy matching over embedding cosine similarity:
recall is the mean over reference tokens of the best cosine similarity to
any candidate token, precision the symmetric quantity, F1 their harmonic
mean. For each reference sentence in document order, the highest-recall
source sentence is selected; candidates below the recall threshold are
excluded, and a source sentence already selected for an earlier reference
sentence is removed from later candidate pools.

The lexical scheme keeps the same greedy structure but scores with the
mean of ROUGE-1 and ROUGE-2 recall (ROUGE-2 drops out when either side
has fewer than 2 tokens) and applies no threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, Document
from .rouge import f1_score, rouge_n

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class MatchScore:
    precision: float
    recall: float
    f1: float

    def __post_init__(self) -> None:
        for name in ("precision", "recall", "f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of range: {value}")


@dataclass(frozen=True)
class OraclePair:
    gold_index: int
    source_index: int
    score: MatchScore


@dataclass(frozen=True)
class OracleAlignment:
    doc_id: str
    pairs: tuple[OraclePair, ...]
    selected: tuple[int, ...]
    metric: str
    threshold: float | None = None
    provider: str | None = None

    def __post_init__(self) -> None:
        if set(self.selected) != {p.source_index for p in self.pairs}:
            raise ValueError("selected indices disagree with pair source indices")
        if tuple(sorted(self.selected)) != self.selected:
            raise ValueError("selected indices must be sorted")


def cosine_similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities; rows with zero norm score 0 everywhere."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a, axis=1)
    norm_b = np.linalg.norm(b, axis=1)
    safe_a = np.where(norm_a == 0.0, 1.0, norm_a)
    safe_b = np.where(norm_b == 0.0, 1.0, norm_b)
    sim = (a / safe_a[:, None]) @ (b / safe_b[:, None]).T
    sim[norm_a == 0.0, :] = 0.0
    sim[:, norm_b == 0.0] = 0.0
    return sim


def greedy_match_score(candidate: np.ndarray, reference: np.ndarray) -> MatchScore:
    """Token-level greedy matching between two token-embedding matrices."""
    candidate = np.asarray(candidate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if candidate.ndim != 2 or candidate.shape[0] == 0:
        raise ValueError("candidate embedding matrix is empty")
    if reference.ndim != 2 or reference.shape[0] == 0:
        raise ValueError("reference embedding matrix is empty")
    sim = cosine_similarity_matrix(candidate, reference)
    recall = float(np.clip(sim.max(axis=0).mean(), 0.0, 1.0))
    precision = float(np.clip(sim.max(axis=1).mean(), 0.0, 1.0))
    return MatchScore(precision, recall, f1_score(precision, recall))


def _greedy_align(
    doc: Document,
    n_gold: int,
    score_fn,
    threshold: float | None,
) -> tuple[tuple[OraclePair, ...], tuple[int, ...]]:
    """Shared greedy loop: per gold sentence, argmax score over unselected sources.

    Gold sentences are processed in document order; ties break toward the
    lower source index.
    """
    pairs: list[OraclePair] = []
    selected: set[int] = set()
    for g in range(n_gold):
        best_index = -1
        best_score: MatchScore | None = None
        for s in range(doc.n_sentences):
            if s in selected:
                continue
            score = score_fn(s, g)
            if threshold is not None and score.recall < threshold:
                continue
            if best_score is None or score.recall > best_score.recall:
                best_index = s
                best_score = score
        if best_score is not None:
            pairs.append(OraclePair(gold_index=g, source_index=best_index, score=best_score))
            selected.add(best_index)
    return tuple(pairs), tuple(sorted(selected))


def build_semantic_oracle(
    doc: Document,
    source_embeddings: Sequence[np.ndarray],
    gold_embeddings: Sequence[np.ndarray],
    threshold: float = DEFAULT_THRESHOLD,
    provider: str | None = None,
) -> OracleAlignment:
    """Greedy semantic-recall oracle over per-sentence token embeddings.

    ``source_embeddings`` and ``gold_embeddings`` hold one token-embedding
    matrix per source/gold sentence. Candidates whose recall against a
    gold sentence is strictly below ``threshold`` are excluded; a gold
    sentence with no surviving candidate contributes nothing.
    """
    if not doc.has_gold:
        raise ValueError(f"document {doc.id!r} has no gold summary")
    if len(source_embeddings) != doc.n_sentences:
        raise ValueError(
            f"document {doc.id!r}: {len(source_embeddings)} source embeddings for {doc.n_sentences} sentences"
        )
    if len(gold_embeddings) != len(doc.gold):
        raise ValueError(
            f"document {doc.id!r}: {len(gold_embeddings)} gold embeddings for {len(doc.gold)} gold sentences"
        )

    def score_fn(s: int, g: int) -> MatchScore:
        return greedy_match_score(source_embeddings[s], gold_embeddings[g])

    pairs, selected = _greedy_align(doc, len(doc.gold), score_fn, threshold)
    return OracleAlignment(
        doc_id=doc.id,
        pairs=pairs,
        selected=selected,
        metric="semantic",
        threshold=threshold,
        provider=provider,
    )


def lexical_sentence_score(candidate_tokens: Sequence[str], gold_tokens: Sequence[str]) -> MatchScore:
    """Mean of ROUGE-1/ROUGE-2 components; ROUGE-2 has zero weight below bigram length."""
    r1 = rouge_n(candidate_tokens, gold_tokens, 1)
    if len(candidate_tokens) < 2 or len(gold_tokens) < 2:
        precision, recall = r1.precision, r1.recall
    else:
        r2 = rouge_n(candidate_tokens, gold_tokens, 2)
        precision = (r1.precision + r2.precision) / 2.0
        recall = (r1.recall + r2.recall) / 2.0
    return MatchScore(precision, recall, f1_score(precision, recall))


def build_lexical_oracle(doc: Document) -> OracleAlignment:
    """Greedy lexical-recall oracle; same structure as the semantic one, no threshold."""
    if not doc.has_gold:
        raise ValueError(f"document {doc.id!r} has no gold summary")

    def score_fn(s: int, g: int) -> MatchScore:
        return lexical_sentence_score(doc.sentences[s].tokens, doc.gold[g].tokens)

    pairs, selected = _greedy_align(doc, len(doc.gold), score_fn, threshold=None)
    return OracleAlignment(doc_id=doc.id, pairs=pairs, selected=selected, metric="lexical")


def position_ratio_bins(positions: Sequence[tuple[int, int]], bins: int) -> np.ndarray:
    """Count (index, doc_length) picks into equal-width index/length ratio bins."""
    counts = np.zeros(bins, dtype=np.int64)
    for index, length in positions:
        if not 0 <= index < length:
            raise ValueError(f"index {index} out of range for document length {length}")
        counts[min(int(index / length * bins), bins - 1)] += 1
    return counts


def oracle_position_cdf(alignments: Sequence[OracleAlignment], corpus: Corpus, bins: int = 10) -> np.ndarray:
    """Cumulative distribution of selected-sentence position ratios.

    Bin b covers ratios [b/bins, (b+1)/bins); the returned vector is the
    cumulative fraction of all selected sentences, so the final entry is 1.
    """
    if not alignments:
        raise ValueError("no alignments given")
    lengths = {doc.id: doc.n_sentences for doc in corpus}
    positions = [(s, lengths[al.doc_id]) for al in alignments for s in al.selected]
    if not positions:
        raise ValueError("alignments contain no selected sentences")
    counts = position_ratio_bins(positions, bins)
    return np.cumsum(counts) / counts.sum()


def write_oracles(path: str, alignments: Sequence[OracleAlignment]) -> None:
    """JSONL artifact: one object per document with pairs and selected indices."""
    with open(path, "w", encoding="utf-8") as fh:
        for al in alignments:
            record = {
                "id": al.doc_id,
                "selected": list(al.selected),
                "pairs": [
                    [p.gold_index, p.source_index, p.score.precision, p.score.recall, p.score.f1]
                    for p in al.pairs
                ],
                "metric": al.metric,
                "provider": al.provider,
                "threshold": al.threshold,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_oracles(path: str) -> list[OracleAlignment]:
    alignments = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            pairs = tuple(
                OraclePair(gold_index=g, source_index=s, score=MatchScore(p, r, f))
                for g, s, p, r, f in rec["pairs"]
            )
            alignments.append(
                OracleAlignment(
                    doc_id=rec["id"],
                    pairs=pairs,
                    selected=tuple(rec["selected"]),
                    metric=rec["metric"],
                    threshold=rec.get("threshold"),
                    provider=rec.get("provider"),
                )
            )
    return alignments
