"""Document corpus: loading, validation, tokenization, shuffling.

Interchange format is UTF-8 JSONL, one object per document:

    {"id": str, "sentences": [str, ...], "summary": [str, ...]}

``summary`` is optional; an empty list is treated as "no reference"
so inference-only corpora (e.g. meeting transcripts) load through the
same path. Sentences arrive pre-segmented, one string each; documents
are never truncated.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator

import numpy as np

SPLITS = ("train", "val", "test")

_SPLIT_ALIASES = {"train": "train", "val": "val", "validation": "val", "test": "test"}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class CorpusFormatError(ValueError):
    """Raised when a corpus file violates the JSONL schema."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word/punctuation tokens.

    Words are maximal ``\\w+`` runs; every other non-space character is
    its own token. Deterministic; empty input yields an empty list.
    """
    return _TOKEN_RE.findall(text.lower())


def normalize_split(split: str) -> str:
    try:
        return _SPLIT_ALIASES[split]
    except KeyError:
        raise ValueError(f"unknown split {split!r}; expected one of {sorted(set(_SPLIT_ALIASES))}")


@dataclass(frozen=True)
class Sentence:
    """One pre-segmented sentence with its 0-based document position."""

    index: int
    text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, index: int, text: str) -> "Sentence":
        return cls(index=index, text=text, tokens=tuple(tokenize(text)))


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]
    gold: tuple[Sentence, ...] | None = None

    def __post_init__(self) -> None:
        for i, sent in enumerate(self.sentences):
            if sent.index != i:
                raise ValueError(f"document {self.id!r}: sentence index {sent.index} at position {i}")
        if self.gold is not None:
            for i, sent in enumerate(self.gold):
                if sent.index != i:
                    raise ValueError(f"document {self.id!r}: gold index {sent.index} at position {i}")

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    @property
    def has_gold(self) -> bool:
        return self.gold is not None and len(self.gold) > 0


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    split: str

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)

    def ids(self) -> list[str]:
        return [doc.id for doc in self.documents]


def document_from_record(record: dict, *, context: str = "record") -> Document:
    """Build a validated Document from one decoded JSONL object."""
    if not isinstance(record, dict):
        raise CorpusFormatError(f"{context}: expected a JSON object, got {type(record).__name__}")
    doc_id = record.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusFormatError(f"{context}: field 'id' must be a non-empty string")
    if "sentences" not in record:
        raise CorpusFormatError(f"{context}: missing field 'sentences'")
    raw_sentences = record["sentences"]
    if not isinstance(raw_sentences, list) or not all(isinstance(s, str) for s in raw_sentences):
        raise CorpusFormatError(f"{context}: field 'sentences' must be a list of strings")
    sentences = tuple(Sentence.from_text(i, s) for i, s in enumerate(raw_sentences))

    gold: tuple[Sentence, ...] | None = None
    if "summary" in record and record["summary"] is not None:
        raw_summary = record["summary"]
        if not isinstance(raw_summary, list) or not all(isinstance(s, str) for s in raw_summary):
            raise CorpusFormatError(f"{context}: field 'summary' must be a list of strings")
        if raw_summary:
            gold = tuple(Sentence.from_text(i, s) for i, s in enumerate(raw_summary))
    return Document(id=doc_id, sentences=sentences, gold=gold)


def load_corpus(path: str, split: str) -> Corpus:
    """Load a JSONL corpus file; malformed lines are rejected, not skipped.

    Raises FileNotFoundError for a missing file and CorpusFormatError
    with the offending line number and field for schema violations or
    duplicate ids. Blank lines are ignored.
    """
    split = normalize_split(split)
    documents: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            doc = document_from_record(record, context=f"{path}:{lineno}")
            if doc.id in seen:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            documents.append(doc)
    return Corpus(documents=tuple(documents), split=split)


def save_corpus(corpus: Corpus, path: str) -> None:
    """Write the documented JSONL schema; inverse of load_corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            record: dict = {"id": doc.id, "sentences": [s.text for s in doc.sentences]}
            if doc.gold is not None:
                record["summary"] = [s.text for s in doc.gold]
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def shuffle_document(doc: Document, seed: int) -> Document:
    """Return a copy with sentences in a seeded pseudo-random order.

    The permutation comes from numpy's default PCG64 generator seeded
    with ``seed``; indices are re-assigned 0..n-1 and the gold summary
    is left untouched. Same seed, same permutation.
    """
    if doc.n_sentences < 1:
        raise ValueError(f"document {doc.id!r} is empty")
    perm = np.random.default_rng(seed).permutation(doc.n_sentences)
    shuffled = tuple(
        Sentence(index=new_i, text=doc.sentences[old_i].text, tokens=doc.sentences[old_i].tokens)
        for new_i, old_i in enumerate(perm)
    )
    return Document(id=doc.id, sentences=shuffled, gold=doc.gold)
