"""Deterministic synthetic corpora for smoke tests and desk-scale runs.

Two generators live here:

* ``toy_corpus``: small text documents whose gold summaries are noisy
  copies of source sentences, so oracle construction, labeling, training,
  and evaluation all have signal end to end.
* ``conditioning_docs``: documents with planted geometric structure in
  their sentence vectors. Three sentences sit at triangle corners in the
  first two dimensions (the 2-D convex-hull vertices), three others share
  a strong common pattern in dimensions 4..7 (the mean-Pearson top-3),
  and the position rule picks the first three. Per-code targets are
  computed with the real sub-aspect functions, never assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document, Sentence
from .subaspects import ControlCode, diversity_subset, importance_subset
from .selector import TrainingExample

VOCABULARY = (
    "market", "council", "river", "storm", "deal", "police", "report", "season",
    "mayor", "budget", "school", "bridge", "festival", "strike", "court", "team",
    "energy", "housing", "airport", "museum", "election", "harbor", "farmers",
    "clinic", "railway", "forest", "voters", "traffic", "union", "garden",
    "approved", "rejected", "announced", "warned", "opened", "closed", "visited",
    "funded", "delayed", "expanded", "reviewed", "praised", "blamed", "planned",
    "yesterday", "today", "quietly", "officially", "again", "downtown", "nearby",
    "despite", "after", "before", "during", "against",
)


def _sentence_text(rng: np.random.Generator, n_words: int) -> str:
    words = rng.choice(len(VOCABULARY), size=n_words, replace=True)
    return " ".join(VOCABULARY[w] for w in words) + " ."


def toy_document(doc_id: str, rng: np.random.Generator, n_sentences: int = 8, n_gold: int = 2) -> Document:
    """One text document whose gold sentences are near-copies of sources."""
    texts = [_sentence_text(rng, int(rng.integers(6, 10))) for _ in range(n_sentences)]
    gold_sources = rng.choice(n_sentences, size=n_gold, replace=False)
    gold_texts = []
    for g, src in enumerate(sorted(int(s) for s in gold_sources)):
        words = texts[src].split()
        if g % 2 == 1 and len(words) > 4:
            # drop one interior word so matching is near-exact, not exact
            drop = 1 + int(rng.integers(0, len(words) - 2))
            words = words[:drop] + words[drop + 1 :]
        gold_texts.append(" ".join(words))
    sentences = tuple(Sentence.from_text(i, t) for i, t in enumerate(texts))
    gold = tuple(Sentence.from_text(i, t) for i, t in enumerate(gold_texts))
    return Document(id=doc_id, sentences=sentences, gold=gold)


def toy_corpus(split: str, n_docs: int = 20, seed: int = 0, n_sentences: int = 8, n_gold: int = 2) -> Corpus:
    rng = np.random.default_rng(seed)
    docs = tuple(toy_document(f"{split}-{i:04d}", rng, n_sentences, n_gold) for i in range(n_docs))
    return Corpus(documents=docs, split=split)


def bundled_corpus_path(split: str) -> str:
    """Filesystem path of the packaged toy corpus for a split."""
    from importlib.resources import files

    return str(files("aspectsum").joinpath(f"data/toy_{split}.jsonl"))


_MOTIF = np.array([0.5, -0.5, 0.5, -0.5])
_MOTIF_DIMS = slice(4, 8)

CONDITIONING_CODES = (ControlCode((0, 0, 1)), ControlCode((0, 1, 0)), ControlCode((1, 0, 0)))


@dataclass
class ConditionedDoc:
    """A synthetic document plus its planted vectors and per-code targets."""

    document: Document
    vectors: np.ndarray  # (n_sentences, dim)
    targets: dict[str, tuple[int, ...]]  # code string -> sorted target indices


def _planted_vectors(
    rng: np.random.Generator, n_sentences: int, dim: int
) -> tuple[np.ndarray, tuple[int, ...], tuple[int, ...]]:
    vectors = rng.normal(0.0, 0.25, size=(n_sentences, dim))
    slots = rng.choice(n_sentences, size=6, replace=False)
    corners = tuple(sorted(int(s) for s in slots[:3]))
    motif = tuple(sorted(int(s) for s in slots[3:]))
    for j, pos in enumerate(corners):
        angle = j * 2.0 * math.pi / 3.0 + rng.uniform(-0.25, 0.25)
        radius = 5.0 + rng.uniform(-0.5, 0.5)
        vectors[pos, 0] += radius * math.cos(angle)
        vectors[pos, 1] += radius * math.sin(angle)
    for pos in motif:
        scale = 2.5 + rng.uniform(0.0, 1.0)
        vectors[pos, _MOTIF_DIMS] += scale * _MOTIF
    return vectors, corners, motif


def conditioned_doc(
    doc_id: str,
    rng: np.random.Generator,
    n_sentences: int = 12,
    dim: int = 16,
    tokens_per_sentence: int = 6,
    max_attempts: int = 50,
) -> ConditionedDoc:
    """Generate one document whose planted structure the sub-aspect
    functions actually recover; resamples on the rare geometric miss."""
    for _ in range(max_attempts):
        vectors, corners, motif = _planted_vectors(rng, n_sentences, dim)
        hull = tuple(sorted(diversity_subset(vectors, projection_dim=2)))
        top_corr = tuple(sorted(importance_subset(vectors, k=3)))
        if hull == corners and top_corr == motif:
            break
    else:
        raise RuntimeError(f"could not plant recoverable structure for {doc_id!r}")
    texts = [
        " ".join(f"{doc_id}x{i}t{j}" for j in range(tokens_per_sentence)) for i in range(n_sentences)
    ]
    sentences = tuple(Sentence.from_text(i, t) for i, t in enumerate(texts))
    gold = tuple(Sentence.from_text(i, texts[i]) for i in range(3))
    document = Document(id=doc_id, sentences=sentences, gold=gold)
    targets = {"001": (0, 1, 2), "010": corners, "100": motif}
    return ConditionedDoc(document=document, vectors=vectors, targets=targets)


def conditioning_docs(
    prefix: str, n_docs: int, seed: int, n_sentences: int = 12, dim: int = 16
) -> list[ConditionedDoc]:
    rng = np.random.default_rng(seed)
    return [conditioned_doc(f"{prefix}{i:04d}", rng, n_sentences, dim) for i in range(n_docs)]


def conditioning_examples(docs: list[ConditionedDoc], codes=CONDITIONING_CODES) -> list[TrainingExample]:
    """One training example per (document, code) with code-appropriate targets."""
    examples = []
    for cdoc in docs:
        n = cdoc.document.n_sentences
        for code in codes:
            chosen = set(cdoc.targets[str(code)])
            targets = np.array([1.0 if i in chosen else 0.0 for i in range(n)])
            examples.append(
                TrainingExample(
                    doc_id=cdoc.document.id, sent_vecs=cdoc.vectors, code=code, targets=targets
                )
            )
    return examples


def token_vector_map(docs: list[ConditionedDoc]) -> dict[str, np.ndarray]:
    """Token-to-vector mapping under which mean pooling reproduces each
    planted sentence vector (every token of sentence i maps to vectors[i])."""
    mapping: dict[str, np.ndarray] = {}
    for cdoc in docs:
        for sent in cdoc.document.sentences:
            for token in sent.tokens:
                mapping[token] = cdoc.vectors[sent.index]
    return mapping
