"""Token and sentence embeddings behind a pluggable provider interface.

Contextual embeddings are ingested, never computed in-process: either
from a vector file precomputed offline, or from a deterministic hash
provider used for tests and desk-scale runs. Sentence vectors are the
arithmetic mean of token vectors, document vectors the mean of sentence
vectors.

Vector-file format: a text header line ``dim=<d> count=<n>`` followed by
one record per token. Text variant: ``token <f0> <f1> ... <fd-1>`` per
line. Binary variant (same header line): each record is the UTF-8 token
terminated by a newline byte, then ``d`` little-endian 32-bit floats.
Out-of-vocabulary tokens map to the all-zeros fallback vector.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document

DEFAULT_DIMENSION = 768


class VectorFileError(ValueError):
    """Raised when a vector file is missing, truncated, or malformed."""


def _hash_seed(seed: int, token: str) -> int:
    digest = hashlib.blake2b(f"{seed}|{token}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class HashEmbeddingProvider:
    """Deterministic stand-in provider: one unit vector per token.

    Each token's vector is drawn once from a PCG64 generator seeded with
    blake2b(seed|token) and normalized to unit length, so cosine
    similarity reduces to the dot product and identical tokens always
    match with similarity 1.
    """

    dimension: int = 16
    seed: int = 0

    source = "deterministic-hash"

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError("provider dimension must be >= 2")

    @property
    def name(self) -> str:
        return f"hash-d{self.dimension}-s{self.seed}"

    def token_vector(self, token: str) -> np.ndarray:
        rng = np.random.default_rng(_hash_seed(self.seed, token))
        vec = rng.standard_normal(self.dimension)
        return vec / np.linalg.norm(vec)

    def embed(self, tokens: list[str] | tuple[str, ...]) -> np.ndarray:
        return np.stack([self.token_vector(t) for t in tokens])


class DictEmbeddingProvider:
    """In-memory variant of the vector-file provider.

    Same lookup semantics: out-of-vocabulary tokens map to the all-zeros
    fallback vector.
    """

    source = "vector-file"

    def __init__(self, vectors: dict, name: str = "dict"):
        dims = {len(v) for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")
        self.dimension = dims.pop()
        if self.dimension < 2:
            raise ValueError("provider dimension must be >= 2")
        self.name = name
        self._vectors = {t: np.asarray(v, dtype=np.float64) for t, v in vectors.items()}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._vectors.get(token)
        if vec is None:
            return np.zeros(self.dimension)
        return vec

    def embed(self, tokens: list[str] | tuple[str, ...]) -> np.ndarray:
        return np.stack([self.token_vector(t) for t in tokens])


@dataclass(frozen=True)
class VectorFileProvider:
    """Provider backed by a precomputed token-vector file."""

    path: str
    dimension: int = field(init=False)
    _vectors: dict = field(init=False, repr=False)

    source = "vector-file"

    def __post_init__(self) -> None:
        dim, vectors = load_vector_file(self.path)
        object.__setattr__(self, "dimension", dim)
        object.__setattr__(self, "_vectors", vectors)
        if dim < 2:
            raise VectorFileError(f"{self.path}: dimension must be >= 2, got {dim}")

    @property
    def name(self) -> str:
        return f"file-{os.path.basename(self.path)}"

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._vectors.get(token)
        if vec is None:
            # OOV fallback: zeros, scored as similarity 0 everywhere downstream
            return np.zeros(self.dimension)
        return vec

    def embed(self, tokens: list[str] | tuple[str, ...]) -> np.ndarray:
        return np.stack([self.token_vector(t) for t in tokens])


def _parse_vector_header(line: str, path: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2 or not parts[0].startswith("dim=") or not parts[1].startswith("count="):
        raise VectorFileError(f"{path}: bad header {line!r}; expected 'dim=<d> count=<n>'")
    try:
        return int(parts[0][4:]), int(parts[1][6:])
    except ValueError as exc:
        raise VectorFileError(f"{path}: non-integer header values in {line!r}") from exc


def load_vector_file(path: str) -> tuple[int, dict[str, np.ndarray]]:
    """Parse a token-vector file, auto-detecting text vs binary records."""
    if not os.path.exists(path):
        raise VectorFileError(f"vector file not found: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    newline = raw.find(b"\n")
    if newline < 0:
        raise VectorFileError(f"{path}: missing header line")
    try:
        header = raw[:newline].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise VectorFileError(f"{path}: undecodable header line") from exc
    dim, count = _parse_vector_header(header, path)
    body = raw[newline + 1 :]

    try:
        return dim, _parse_text_records(body.decode("utf-8"), dim, count, path)
    except (UnicodeDecodeError, VectorFileError):
        pass
    return dim, _parse_binary_records(body, dim, count, path)


def _parse_text_records(text: str, dim: int, count: int, path: str) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if len(lines) != count:
        raise VectorFileError(f"{path}: header count={count} but found {len(lines)} records")
    for lineno, line in enumerate(lines, start=2):
        parts = line.split()
        if len(parts) != dim + 1:
            raise VectorFileError(f"{path}:{lineno}: expected token plus {dim} floats")
        token = parts[0]
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise VectorFileError(f"{path}:{lineno}: non-numeric vector component") from exc
        if not np.all(np.isfinite(vec)):
            raise VectorFileError(f"{path}:{lineno}: non-finite vector component")
        vectors[token] = vec
    return vectors


def _parse_binary_records(body: bytes, dim: int, count: int, path: str) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    offset = 0
    rec_bytes = 4 * dim
    for _ in range(count):
        end = body.find(b"\n", offset)
        if end < 0:
            raise VectorFileError(f"{path}: truncated binary record (missing token terminator)")
        try:
            token = body[offset:end].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise VectorFileError(f"{path}: undecodable token in binary record") from exc
        offset = end + 1
        if offset + rec_bytes > len(body):
            raise VectorFileError(f"{path}: truncated binary record for token {token!r}")
        vec = np.frombuffer(body[offset : offset + rec_bytes], dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(vec)):
            raise VectorFileError(f"{path}: non-finite vector for token {token!r}")
        offset += rec_bytes
        vectors[token] = vec
    if body[offset:].strip():
        raise VectorFileError(f"{path}: trailing bytes after {count} binary records")
    return vectors


def save_vector_file(path: str, vectors: dict[str, np.ndarray], binary: bool = False) -> None:
    """Write the documented vector-file format (text or binary variant)."""
    dims = {len(v) for v in vectors.values()}
    if len(dims) != 1:
        raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")
    dim = dims.pop()
    header = f"dim={dim} count={len(vectors)}\n"
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("utf-8"))
            for token, vec in vectors.items():
                fh.write(token.encode("utf-8") + b"\n")
                fh.write(np.asarray(vec, dtype="<f4").tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header)
            for token, vec in vectors.items():
                comps = " ".join(repr(float(v)) for v in vec)
                fh.write(f"{token} {comps}\n")


class EmbeddingCache:
    """Content-addressed on-disk cache of token-embedding matrices.

    Layout: ``root/<provider name>/<namespace...>/<digest>.npy`` where the
    digest covers the provider identity and the exact token sequence, so a
    second call with identical (provider, tokens) returns bit-identical
    vectors.
    """

    def __init__(self, root: str, namespace: tuple[str, ...] = ()):
        self.root = root
        self.namespace = namespace

    def scoped(self, corpus_id: str, split: str) -> "EmbeddingCache":
        return EmbeddingCache(self.root, self.namespace + (corpus_id, split))

    def _path(self, provider, tokens: tuple[str, ...]) -> str:
        key = "\x00".join((provider.name, str(provider.dimension)) + tokens)
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=16).hexdigest()
        return os.path.join(self.root, provider.name, *self.namespace, f"{digest}.npy")

    def get(self, provider, tokens: tuple[str, ...]) -> np.ndarray | None:
        path = self._path(provider, tokens)
        if os.path.exists(path):
            return np.load(path)
        return None

    def put(self, provider, tokens: tuple[str, ...], matrix: np.ndarray) -> None:
        path = self._path(provider, tokens)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            np.save(fh, matrix)
        os.replace(tmp, path)


def embed_tokens(provider, tokens, cache: EmbeddingCache | None = None) -> np.ndarray:
    """One embedding row per token; errors on an empty token list."""
    tokens = tuple(tokens)
    if not tokens:
        raise ValueError("cannot embed an empty token list")
    if cache is not None:
        hit = cache.get(provider, tokens)
        if hit is not None:
            return hit
    matrix = provider.embed(tokens)
    if matrix.shape != (len(tokens), provider.dimension):
        raise ValueError(f"provider returned shape {matrix.shape}, expected ({len(tokens)}, {provider.dimension})")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("provider returned non-finite embedding values")
    if cache is not None:
        cache.put(provider, tokens, matrix)
    return matrix


def sentence_vector(tok_emb: np.ndarray) -> np.ndarray:
    """Arithmetic mean over token rows."""
    tok_emb = np.asarray(tok_emb)
    if tok_emb.ndim != 2 or tok_emb.shape[0] < 1:
        raise ValueError(f"expected a non-empty tokens x dim matrix, got shape {tok_emb.shape}")
    return tok_emb.mean(axis=0)


def document_vector(sent_vecs) -> np.ndarray:
    """Arithmetic mean of sentence vectors."""
    sent_vecs = np.asarray(sent_vecs)
    if sent_vecs.ndim != 2 or sent_vecs.shape[0] < 1:
        raise ValueError(f"expected a non-empty sentences x dim matrix, got shape {sent_vecs.shape}")
    return sent_vecs.mean(axis=0)


def document_token_embeddings(provider, doc: Document, cache: EmbeddingCache | None = None) -> list[np.ndarray]:
    """Token-embedding matrix per source sentence of a document."""
    return [embed_tokens(provider, sent.tokens, cache) for sent in doc.sentences]


def document_sentence_matrix(provider, doc: Document, cache: EmbeddingCache | None = None) -> np.ndarray:
    """n_sentences x dim matrix of mean-pooled sentence vectors."""
    return np.stack([sentence_vector(m) for m in document_token_embeddings(provider, doc, cache)])
