"""Sub-aspect sentence subsets and summary-level control codes.

Three per-document subsets characterize summary style:

* importance: the k sentences with the highest mean Pearson correlation
  to all other sentence vectors (N-Nearest),
* diversity: convex-hull vertices of the sentence vectors after centered
  PCA projection (semantic-volume maximizers),
* position: the first 4 sentences.

A summary maps to a 3-bit multi-hot control code in the order
[importance, diversity, position]: a bit is on when at least two selected
sentences fall in the subset, or at least one when the summary has at
most two sentences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

ASPECTS = ("importance", "diversity", "position")

DEFAULT_PROJECTION_DIM = 4
DEFAULT_FIXED_K = 4
POSITION_CUTOFF = 4

_RANK_TOL = 1e-9


@dataclass(frozen=True)
class ControlCode:
    """3-bit multi-hot code in the order [importance, diversity, position]."""

    bits: tuple[int, int, int]

    def __post_init__(self) -> None:
        if len(self.bits) != 3 or any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"control code must be three bits, got {self.bits!r}")

    @classmethod
    def from_string(cls, text: str) -> "ControlCode":
        if len(text) != 3 or any(c not in "01" for c in text):
            raise ValueError(f"control code string must be 3 chars of 0/1, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @property
    def importance(self) -> int:
        return self.bits[0]

    @property
    def diversity(self) -> int:
        return self.bits[1]

    @property
    def position(self) -> int:
        return self.bits[2]

    @property
    def is_unmapped(self) -> bool:
        return self.bits == (0, 0, 0)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


ALL_CODES = tuple(ControlCode((i, d, p)) for i in (0, 1) for d in (0, 1) for p in (0, 1))
NONZERO_CODES = tuple(c for c in ALL_CODES if not c.is_unmapped)


@dataclass(frozen=True)
class SubAspectSet:
    importance: frozenset[int]
    diversity: frozenset[int]
    position: frozenset[int]

    def get(self, aspect: str) -> frozenset[int]:
        if aspect not in ASPECTS:
            raise KeyError(aspect)
        return getattr(self, aspect)

    def labels_for(self, index: int) -> frozenset[str]:
        return frozenset(a for a in ASPECTS if index in self.get(a))


@dataclass(frozen=True)
class SentenceAspectLabel:
    doc_id: str
    index: int
    labels: frozenset[str]
    origin: str  # "direct" or "cluster-augmented"

    def __post_init__(self) -> None:
        if self.origin not in ("direct", "cluster-augmented"):
            raise ValueError(f"unknown origin {self.origin!r}")
        unknown = set(self.labels) - set(ASPECTS)
        if unknown:
            raise ValueError(f"unknown aspect labels {sorted(unknown)}")


def pearson_matrix(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise Pearson correlation over vector components.

    Returns (corr, constant_mask); correlations involving a zero-variance
    vector are set to 0 and flagged via the mask.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    centered = vectors - vectors.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    constant = norms == 0.0
    safe = np.where(constant, 1.0, norms)
    z = centered / safe[:, None]
    corr = z @ z.T
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    return np.clip(corr, -1.0, 1.0), constant


def importance_scores(sent_vecs: np.ndarray) -> np.ndarray:
    """Mean Pearson correlation of each sentence vector to all others.

    Zero-variance vectors cannot correlate and score -1.
    """
    vectors = np.asarray(sent_vecs, dtype=np.float64)
    n = vectors.shape[0]
    if n < 2:
        raise ValueError("importance scores need at least 2 sentences")
    corr, constant = pearson_matrix(vectors)
    # zero the diagonal instead of subtracting it: keeps exact ties exact
    np.fill_diagonal(corr, 0.0)
    scores = corr.sum(axis=1) / (n - 1)
    scores[constant] = -1.0
    return scores


def importance_subset(sent_vecs: np.ndarray, k: int) -> frozenset[int]:
    """Top-k sentences by mean pairwise Pearson correlation; ties to lower index."""
    vectors = np.asarray(sent_vecs, dtype=np.float64)
    n = vectors.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} sentences")
    scores = importance_scores(vectors)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    return frozenset(order[:k])


def pca_projection(vectors: np.ndarray, dim: int) -> tuple[np.ndarray, int]:
    """Centered PCA projection to ``dim`` components; returns (projected, rank)."""
    centered = vectors - vectors.mean(axis=0, keepdims=True)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    if singular.size and singular[0] > 0.0:
        rank = int(np.sum(singular > _RANK_TOL * singular[0]))
    else:
        rank = 0
    return centered @ vt[:dim].T, rank


def _axis_extremes(projected: np.ndarray) -> frozenset[int]:
    # np.argmin/argmax return the first (lowest) index on ties
    extremes: set[int] = set()
    for axis in range(projected.shape[1]):
        extremes.add(int(np.argmin(projected[:, axis])))
        extremes.add(int(np.argmax(projected[:, axis])))
    return frozenset(extremes)


def diversity_subset(sent_vecs: np.ndarray, projection_dim: int = DEFAULT_PROJECTION_DIM) -> frozenset[int]:
    """Convex-hull vertex sentences in the PCA-projected semantic space.

    Fewer than projection_dim + 2 sentences cannot form a nondegenerate
    hull, so all indices are returned. Affinely dependent point sets fall
    back to the extreme points along each principal axis.
    """
    vectors = np.asarray(sent_vecs, dtype=np.float64)
    n = vectors.shape[0]
    if n < 2:
        raise ValueError("diversity subset needs at least 2 sentences")
    if projection_dim < 1:
        raise ValueError(f"projection_dim must be >= 1, got {projection_dim}")
    if n < projection_dim + 2:
        return frozenset(range(n))
    dim = min(projection_dim, vectors.shape[1])
    projected, rank = pca_projection(vectors, dim)
    if rank < dim or dim < 2:
        # degenerate: extremes along the meaningful principal axes only
        return _axis_extremes(projected[:, : max(rank, 1)])
    try:
        hull = ConvexHull(projected)
    except QhullError:
        return _axis_extremes(projected[:, : max(rank, 1)])
    return frozenset(int(v) for v in hull.vertices)


def position_subset(n_sentences: int) -> frozenset[int]:
    """The first 4 sentences (fewer for short documents)."""
    if n_sentences < 1:
        raise ValueError("document has no sentences")
    return frozenset(range(min(POSITION_CUTOFF, n_sentences)))


def compute_subaspects(
    sent_vecs: np.ndarray,
    k: int | None,
    projection_dim: int = DEFAULT_PROJECTION_DIM,
) -> SubAspectSet:
    """All three subsets for one document's sentence vectors.

    ``k=None`` or documents too short for correlation/hull computation
    yield empty importance/diversity sets rather than errors; position is
    always defined.
    """
    vectors = np.asarray(sent_vecs, dtype=np.float64)
    n = vectors.shape[0]
    if n < 1:
        raise ValueError("document has no sentences")
    if k is not None and k > 0 and n >= 2:
        importance = importance_subset(vectors, min(k, n))
    else:
        importance = frozenset()
    diversity = diversity_subset(vectors, projection_dim) if n >= 2 else frozenset()
    return SubAspectSet(importance=importance, diversity=diversity, position=position_subset(n))


def map_summary(selected: Iterable[int], aspects: SubAspectSet) -> ControlCode:
    """Multi-hot mapping of a selected-index set onto the three aspects.

    Bit rule: on when >= 2 selected sentences are in the subset, or when
    the summary has <= 2 sentences and >= 1 of them is in the subset.
    All-zero means unmapped.
    """
    chosen = set(selected)
    if not chosen:
        raise ValueError("cannot map an empty selection")
    bits = []
    for aspect in ASPECTS:
        overlap = len(chosen & aspects.get(aspect))
        on = overlap >= 2 or (len(chosen) <= 2 and overlap >= 1)
        bits.append(1 if on else 0)
    return ControlCode(tuple(bits))


def corpus_coverage(codes: Sequence[ControlCode]) -> dict[str, float]:
    """Fraction of summaries per nonzero code pattern, plus the unmapped rest."""
    if not codes:
        raise ValueError("no codes given")
    total = len(codes)
    report = {str(code): 0.0 for code in NONZERO_CODES}
    report["unmapped"] = 0.0
    for code in codes:
        key = "unmapped" if code.is_unmapped else str(code)
        report[key] += 1.0 / total
    return report


def direct_sentence_labels(doc_id: str, n_sentences: int, aspects: SubAspectSet) -> list[SentenceAspectLabel]:
    """Per-sentence labels from subset membership (origin=direct for all)."""
    return [
        SentenceAspectLabel(doc_id=doc_id, index=i, labels=aspects.labels_for(i), origin="direct")
        for i in range(n_sentences)
    ]


def write_labels(path: str, records: Mapping[str, tuple[SubAspectSet, ControlCode]]) -> None:
    """JSONL artifact: per-document aspect subsets and summary code."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, (aspects, code) in records.items():
            record = {
                "id": doc_id,
                "importance": sorted(aspects.importance),
                "diversity": sorted(aspects.diversity),
                "position": sorted(aspects.position),
                "code": list(code.bits),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_labels(path: str) -> dict[str, tuple[SubAspectSet, ControlCode]]:
    records: dict[str, tuple[SubAspectSet, ControlCode]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            aspects = SubAspectSet(
                importance=frozenset(rec["importance"]),
                diversity=frozenset(rec["diversity"]),
                position=frozenset(rec["position"]),
            )
            records[rec["id"]] = (aspects, ControlCode(tuple(rec["code"])))
    return records
