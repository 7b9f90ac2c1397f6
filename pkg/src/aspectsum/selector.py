"""Conditional extractive sentence selector.

A two-layer bidirectional LSTM reads each sentence vector concatenated
with the 3-bit control code and a linear+sigmoid head scores every
sentence with its probability of belonging to the summary. Training
minimizes binary cross entropy against oracle membership, summed over a
document's sentences and averaged over the documents in a batch.
Inference extracts the top-k sentences by probability with trigram
blocking against already-accepted sentences.

The code vector is concatenated at the first layer's input at every
step, for both directions. Documents are never truncated; batches pad to
the longest document and padded positions are masked out of the loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .checkpoints import load_checkpoint, save_checkpoint
from .corpus import Corpus, Document
from .latent_cluster import TrainingError
from .rouge import ngram_set
from .semantic_match import OracleAlignment
from .subaspects import ControlCode, SentenceAspectLabel, SubAspectSet, map_summary

CODE_DIM = 3
DEFAULT_HIDDEN_DIM = 384
DEFAULT_TOP_K = 3


@dataclass
class SelTrainConfig:
    lr: float = 3e-4
    weight_decay: float = 1e-4
    batch_size: int = 64
    dropout: float = 0.2
    epochs: int = 20
    seed: int = 0
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    num_layers: int = 2

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class ScoredSentence:
    index: int
    probability: float


@dataclass
class TrainingExample:
    doc_id: str
    sent_vecs: np.ndarray  # (n_sentences, dim)
    code: ControlCode
    targets: np.ndarray  # (n_sentences,) of 0/1 oracle membership

    def __post_init__(self) -> None:
        self.sent_vecs = np.asarray(self.sent_vecs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.sent_vecs.ndim != 2:
            raise ValueError(f"sent_vecs must be 2-D, got shape {self.sent_vecs.shape}")
        if self.targets.shape != (self.sent_vecs.shape[0],):
            raise ValueError(
                f"targets length {self.targets.shape} does not match {self.sent_vecs.shape[0]} sentences"
            )


class SentenceSelector(nn.Module):
    def __init__(
        self,
        input_dim: int,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        num_layers: int = 2,
        dropout: float = 0.2,
    ):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.lstm = nn.LSTM(
            input_dim + CODE_DIM,
            hidden_dim,
            num_layers=num_layers,
            bidirectional=True,
            batch_first=True,
            dropout=dropout if num_layers > 1 else 0.0,
        )
        self.drop = nn.Dropout(dropout)
        self.out = nn.Linear(2 * hidden_dim, 1)

    def forward(self, padded: torch.Tensor, codes: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Logits (batch, max_len); padded steps are garbage and must be masked."""
        batch, max_len, _ = padded.shape
        code_steps = codes.unsqueeze(1).expand(batch, max_len, CODE_DIM)
        x = torch.cat([padded, code_steps], dim=-1)
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
        hidden, _ = self.lstm(packed)
        unpacked, _ = pad_packed_sequence(hidden, batch_first=True, total_length=max_len)
        return self.out(self.drop(unpacked)).squeeze(-1)


def score_sentences(model: SentenceSelector, sent_vecs, code: ControlCode) -> list[ScoredSentence]:
    """Evaluation-mode per-sentence selection probabilities."""
    vectors = np.asarray(sent_vecs, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise ValueError(f"expected a non-empty (n, dim) matrix, got shape {vectors.shape}")
    if vectors.shape[1] != model.input_dim:
        raise ValueError(f"sentence dim {vectors.shape[1]} does not match model dim {model.input_dim}")
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            padded = torch.as_tensor(vectors, dtype=torch.float32).unsqueeze(0)
            codes = torch.as_tensor([code.bits], dtype=torch.float32)
            lengths = torch.as_tensor([vectors.shape[0]])
            probs = torch.sigmoid(model(padded, codes, lengths)).squeeze(0)
    finally:
        model.train(was_training)
    return [ScoredSentence(index=i, probability=float(p)) for i, p in enumerate(probs)]


def _batch_tensors(examples: Sequence[TrainingExample]):
    lengths = torch.as_tensor([ex.sent_vecs.shape[0] for ex in examples])
    max_len = int(lengths.max())
    dim = examples[0].sent_vecs.shape[1]
    padded = torch.zeros(len(examples), max_len, dim)
    targets = torch.zeros(len(examples), max_len)
    mask = torch.zeros(len(examples), max_len)
    codes = torch.as_tensor([ex.code.bits for ex in examples], dtype=torch.float32)
    for i, ex in enumerate(examples):
        n = ex.sent_vecs.shape[0]
        padded[i, :n] = torch.as_tensor(ex.sent_vecs, dtype=torch.float32)
        targets[i, :n] = torch.as_tensor(ex.targets, dtype=torch.float32)
        mask[i, :n] = 1.0
    return padded, codes, lengths, targets, mask


_bce_logits = nn.BCEWithLogitsLoss(reduction="none")


def selection_loss(logits: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """BCE summed over each document's sentences, averaged over documents."""
    per_step = _bce_logits(logits, targets) * mask
    return per_step.sum(dim=1).mean()


@dataclass
class SelectorTrainResult:
    model: SentenceSelector
    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int


def train_selector(
    dataset: Sequence[TrainingExample],
    cfg: SelTrainConfig,
    val_dataset: Sequence[TrainingExample],
) -> SelectorTrainResult:
    """Adam training with per-epoch validation; returns the lowest-val-loss epoch.

    Dropout is active between the LSTM layers and before the output layer
    during training only. Seeded initialization and batch shuffling make
    runs reproducible.
    """
    if not dataset:
        raise TrainingError("no training examples")
    if not val_dataset:
        raise TrainingError("no validation examples")
    dim = dataset[0].sent_vecs.shape[1]
    torch.manual_seed(cfg.seed)
    model = SentenceSelector(dim, cfg.hidden_dim, cfg.num_layers, cfg.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)

    train_history: list[float] = []
    val_history: list[float] = []
    best_state = None
    best_val = float("inf")
    best_epoch = -1

    for epoch in range(cfg.epochs):
        model.train()
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        for start in range(0, len(dataset), cfg.batch_size):
            batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
            padded, codes, lengths, targets, mask = _batch_tensors(batch)
            logits = model(padded, codes, lengths)
            loss = selection_loss(logits, targets, mask)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting at {start}")
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(batch)
        train_history.append(epoch_loss / len(dataset))

        val_loss = evaluate_loss(model, val_dataset, cfg.batch_size)
        val_history.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    model.load_state_dict(best_state)
    model.eval()
    return SelectorTrainResult(model=model, train_loss=train_history, val_loss=val_history, best_epoch=best_epoch)


def evaluate_loss(model: SentenceSelector, dataset: Sequence[TrainingExample], batch_size: int = 64) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            batch = list(dataset[start : start + batch_size])
            padded, codes, lengths, targets, mask = _batch_tensors(batch)
            loss = selection_loss(model(padded, codes, lengths), targets, mask)
            total += loss.item() * len(batch)
    return total / len(dataset)


def sentence_trigrams(doc: Document, index: int) -> set[tuple[str, ...]]:
    return ngram_set(doc.sentences[index].tokens, 3)


def extract_summary(
    scores: Sequence[ScoredSentence],
    doc: Document,
    top_k: int = DEFAULT_TOP_K,
    trigram_block: bool = True,
) -> list[int]:
    """Top-k extraction in descending probability with trigram blocking.

    A candidate sharing any word trigram with an already-accepted
    sentence is skipped. Returns accepted indices in document order.
    """
    if not scores:
        raise ValueError("no scores given")
    indices = sorted(s.index for s in scores)
    if indices != list(range(doc.n_sentences)):
        raise ValueError(f"scores do not cover document {doc.id!r} exactly")
    ranked = sorted(scores, key=lambda s: (-s.probability, s.index))
    accepted: list[int] = []
    seen_trigrams: set[tuple[str, ...]] = set()
    for cand in ranked:
        if len(accepted) >= top_k:
            break
        trigrams = sentence_trigrams(doc, cand.index)
        if trigram_block and trigrams & seen_trigrams:
            continue
        accepted.append(cand.index)
        seen_trigrams |= trigrams
    return sorted(accepted)


def effective_aspect_sets(
    aspects: SubAspectSet,
    doc_id: str,
    augmented_labels: Sequence[SentenceAspectLabel] | None,
) -> SubAspectSet:
    """Aspect sets with cluster-augmented sentence memberships folded in."""
    if not augmented_labels:
        return aspects
    extra: dict[str, set[int]] = {"importance": set(), "diversity": set(), "position": set()}
    for label in augmented_labels:
        if label.doc_id == doc_id and label.origin == "cluster-augmented":
            for aspect in label.labels:
                extra[aspect].add(label.index)
    if not any(extra.values()):
        return aspects
    return SubAspectSet(
        importance=aspects.importance | frozenset(extra["importance"]),
        diversity=aspects.diversity | frozenset(extra["diversity"]),
        position=aspects.position | frozenset(extra["position"]),
    )


def label_training_pairs(
    corpus: Corpus,
    alignments: Mapping[str, OracleAlignment],
    aspect_sets: Mapping[str, SubAspectSet],
    augmented_labels: Sequence[SentenceAspectLabel] | None = None,
    *,
    sentence_vectors: Mapping[str, np.ndarray],
) -> list[TrainingExample]:
    """Training examples with control codes recomputed after augmentation.

    Targets mark oracle membership; documents whose oracle maps to no
    aspect keep code [0,0,0] and stay in the dataset.
    """
    examples: list[TrainingExample] = []
    for doc in corpus:
        if doc.id not in alignments:
            raise ValueError(f"missing oracle alignment for document {doc.id!r}")
        if doc.id not in aspect_sets:
            raise ValueError(f"missing aspect sets for document {doc.id!r}")
        if doc.id not in sentence_vectors:
            raise ValueError(f"missing sentence vectors for document {doc.id!r}")
        alignment = alignments[doc.id]
        selected = set(alignment.selected)
        if selected:
            aspects = effective_aspect_sets(aspect_sets[doc.id], doc.id, augmented_labels)
            code = map_summary(selected, aspects)
        else:
            code = ControlCode((0, 0, 0))
        targets = np.array([1.0 if i in selected else 0.0 for i in range(doc.n_sentences)])
        examples.append(
            TrainingExample(doc_id=doc.id, sent_vecs=sentence_vectors[doc.id], code=code, targets=targets)
        )
    return examples


def save_selector(path: str, model: SentenceSelector, metadata: dict | None = None) -> None:
    meta = dict(metadata or {})
    meta.update(
        {
            "model": "selector",
            "input_dim": model.input_dim,
            "hidden_dim": model.hidden_dim,
            "num_layers": model.num_layers,
            "dropout": float(model.drop.p),
        }
    )
    arrays = {name: tensor.detach().numpy() for name, tensor in model.state_dict().items()}
    save_checkpoint(path, meta, arrays)


def load_selector(path: str) -> tuple[SentenceSelector, dict]:
    header, arrays = load_checkpoint(path)
    if header.get("model") != "selector":
        raise ValueError(f"{path}: checkpoint is not a selector (model={header.get('model')!r})")
    model = SentenceSelector(header["input_dim"], header["hidden_dim"], header["num_layers"], header["dropout"])
    model.load_state_dict({name: torch.as_tensor(arr) for name, arr in arrays.items()})
    model.eval()
    return model, header
