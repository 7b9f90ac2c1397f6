"""Adversarially trained autoencoder over (document, sentence) vector
pairs, k-means clustering of the latent codes, and cluster-dominance
augmentation of sub-aspect sentence labels.

The encoder compresses [v_doc; v_sen] through a LeakyReLU hidden layer to
a sigmoid latent code; the decoder reconstructs v_sen from [v_doc;
latent]; a single-layer adversary tries to reconstruct v_sen from the
latent alone. Training alternates two updates per batch: the adversary
minimizes MSE(s_adv, v_sen) on a detached latent, then encoder+decoder
minimize MSE(s_dec, v_sen) - lambda * MSE(s_adv, v_sen), penalizing
latents the adversary can exploit.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .checkpoints import load_checkpoint, save_checkpoint
from .subaspects import ASPECTS, SentenceAspectLabel

DEFAULT_LATENT_DIM = 10
DEFAULT_HIDDEN_DIM = 256
DEFAULT_KMEANS_K = 5


class TrainingError(RuntimeError):
    """Raised when training hits non-finite losses or empty data."""


@dataclass
class AETrainConfig:
    adv_weight: float = 0.2  # lambda penalty on the adversary's reconstruction MSE
    lr: float = 1e-3
    weight_decay: float = 1e-3
    batch_size: int = 64
    dropout: float = 0.1
    epochs: int = 50
    patience: int = 5
    seed: int = 0
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    latent_dim: int = DEFAULT_LATENT_DIM

    def __post_init__(self) -> None:
        if self.adv_weight < 0:
            raise ValueError("adv_weight must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class Autoencoder(nn.Module):
    """Two-layer encoder/decoder with a one-layer adversarial decoder."""

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        latent_dim: int = DEFAULT_LATENT_DIM,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.latent_dim = latent_dim
        self.enc_hidden = nn.Linear(2 * input_dim, hidden_dim)
        self.enc_latent = nn.Linear(hidden_dim, latent_dim)
        self.dec_hidden = nn.Linear(input_dim + latent_dim, hidden_dim)
        self.dec_out = nn.Linear(hidden_dim, input_dim)
        self.adv_out = nn.Linear(latent_dim, input_dim)
        self.act = nn.LeakyReLU()
        self.drop = nn.Dropout(dropout)  # hidden layers only, train mode only

    def encode(self, v_doc: torch.Tensor, v_sen: torch.Tensor) -> torch.Tensor:
        h = self.drop(self.act(self.enc_hidden(torch.cat([v_doc, v_sen], dim=-1))))
        return torch.sigmoid(self.enc_latent(h))

    def decode(self, v_doc: torch.Tensor, latent: torch.Tensor) -> torch.Tensor:
        h = self.drop(self.act(self.dec_hidden(torch.cat([v_doc, latent], dim=-1))))
        return self.dec_out(h)

    def adversary(self, latent: torch.Tensor) -> torch.Tensor:
        return self.adv_out(latent)

    def forward(self, v_doc: torch.Tensor, v_sen: torch.Tensor):
        latent = self.encode(v_doc, v_sen)
        return latent, self.decode(v_doc, latent), self.adversary(latent)

    def main_parameters(self):
        for name, param in self.named_parameters():
            if not name.startswith("adv_out."):
                yield param

    def adversary_parameters(self):
        return self.adv_out.parameters()


def ae_forward(model: Autoencoder, v_doc, v_sen) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluation-mode forward pass on numpy inputs: (latent, recon, adv_recon)."""
    v_doc = torch.as_tensor(np.asarray(v_doc), dtype=torch.float32)
    v_sen = torch.as_tensor(np.asarray(v_sen), dtype=torch.float32)
    if v_doc.shape[-1] != model.input_dim or v_sen.shape[-1] != model.input_dim:
        raise ValueError(
            f"input dims {tuple(v_doc.shape)}/{tuple(v_sen.shape)} do not match model dim {model.input_dim}"
        )
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            latent, recon, adv_recon = model(v_doc, v_sen)
    finally:
        model.train(was_training)
    return latent.numpy(), recon.numpy(), adv_recon.numpy()


def ae_losses(recon, adv_recon, v_sen, adv_weight: float) -> tuple[torch.Tensor, torch.Tensor]:
    """(loss_main, loss_adv) = (MSE(recon) - lambda * MSE(adv), MSE(adv))."""
    recon = torch.as_tensor(recon)
    adv_recon = torch.as_tensor(adv_recon)
    v_sen = torch.as_tensor(v_sen)
    if recon.shape != v_sen.shape or adv_recon.shape != v_sen.shape:
        raise ValueError(
            f"shape mismatch: recon {tuple(recon.shape)}, adv {tuple(adv_recon.shape)}, target {tuple(v_sen.shape)}"
        )
    loss_adv = torch.mean((adv_recon - v_sen) ** 2)
    loss_main = torch.mean((recon - v_sen) ** 2) - adv_weight * loss_adv
    return loss_main, loss_adv


def _as_pair_arrays(pairs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pairs, tuple) and len(pairs) == 2 and not isinstance(pairs[0], (list, tuple)):
        docs, sens = np.asarray(pairs[0]), np.asarray(pairs[1])
    else:
        docs = np.asarray([p[0] for p in pairs])
        sens = np.asarray([p[1] for p in pairs])
    if docs.ndim != 2 or docs.shape != sens.shape:
        raise ValueError(f"expected matching (n, dim) pair arrays, got {docs.shape} and {sens.shape}")
    return docs, sens


@dataclass
class AETrainResult:
    model: Autoencoder
    train_loss_main: list[float]
    val_loss_main: list[float]
    best_epoch: int


def adversary_step(model: Autoencoder, opt_adv, x_doc: torch.Tensor, x_sen: torch.Tensor) -> torch.Tensor:
    """Training step 1: update only the adversary on MSE(s_adv, v_sen).

    The latent is detached, so no gradient reaches encoder or decoder.
    """
    with torch.no_grad():
        latent = model.encode(x_doc, x_sen)
    loss_adv = torch.mean((model.adversary(latent) - x_sen) ** 2)
    opt_adv.zero_grad(set_to_none=True)
    loss_adv.backward()
    opt_adv.step()
    return loss_adv


def main_step(model: Autoencoder, opt_main, x_doc: torch.Tensor, x_sen: torch.Tensor, adv_weight: float) -> torch.Tensor:
    """Training step 2: update only encoder+decoder on the penalized loss.

    The adversary contributes to the loss (its output is what the penalty
    measures) and accumulates gradients, but its parameters are never
    stepped here.
    """
    latent = model.encode(x_doc, x_sen)
    recon = model.decode(x_doc, latent)
    adv_recon = model.adversary(latent)
    loss_main, _ = ae_losses(recon, adv_recon, x_sen, adv_weight)
    model.zero_grad(set_to_none=True)
    loss_main.backward()
    opt_main.step()
    return loss_main


def _eval_loss_main(model: Autoencoder, docs: torch.Tensor, sens: torch.Tensor, adv_weight: float) -> float:
    model.eval()
    with torch.no_grad():
        _, recon, adv_recon = model(docs, sens)
        loss_main, _ = ae_losses(recon, adv_recon, sens, adv_weight)
    return float(loss_main)


def train_autoencoder(pairs, cfg: AETrainConfig, val_pairs=None) -> AETrainResult:
    """Two-step adversarial training with Adam; seeded and reproducible.

    Per batch, step 1 updates only the adversary on MSE(s_adv, v_sen)
    computed from a detached latent; step 2 updates only encoder+decoder
    on the penalized reconstruction loss. With validation pairs, training
    stops early after ``cfg.patience`` epochs without improvement and the
    best-epoch parameters are returned.
    """
    docs_np, sens_np = _as_pair_arrays(pairs)
    n = docs_np.shape[0]
    if n == 0:
        raise TrainingError("no training pairs")
    torch.manual_seed(cfg.seed)
    model = Autoencoder(docs_np.shape[1], cfg.hidden_dim, cfg.latent_dim, cfg.dropout)
    opt_adv = torch.optim.Adam(model.adversary_parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    opt_main = torch.optim.Adam(model.main_parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)

    docs = torch.as_tensor(docs_np, dtype=torch.float32)
    sens = torch.as_tensor(sens_np, dtype=torch.float32)
    if val_pairs is not None:
        val_docs_np, val_sens_np = _as_pair_arrays(val_pairs)
        val_docs = torch.as_tensor(val_docs_np, dtype=torch.float32)
        val_sens = torch.as_tensor(val_sens_np, dtype=torch.float32)
    rng = np.random.default_rng(cfg.seed)

    train_history: list[float] = []
    val_history: list[float] = []
    best_state = None
    best_val = float("inf")
    best_epoch = -1
    stale = 0

    for epoch in range(cfg.epochs):
        model.train()
        perm = rng.permutation(n)
        epoch_main = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            x_doc, x_sen = docs[batch], sens[batch]
            loss_adv = adversary_step(model, opt_adv, x_doc, x_sen)
            loss_main = main_step(model, opt_main, x_doc, x_sen, cfg.adv_weight)
            if not torch.isfinite(loss_main) or not torch.isfinite(loss_adv):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting at {start}")
            epoch_main += loss_main.item() * len(batch)
        train_history.append(epoch_main / n)

        if val_pairs is not None:
            val_loss = _eval_loss_main(model, val_docs, val_sens, cfg.adv_weight)
            val_history.append(val_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break

    if best_state is not None:
        model.load_state_dict(best_state)
    else:
        best_epoch = cfg.epochs - 1
    model.eval()
    return AETrainResult(model=model, train_loss_main=train_history, val_loss_main=val_history, best_epoch=best_epoch)


def encode_latents(model: Autoencoder, doc_vecs, sen_vecs) -> np.ndarray:
    """Evaluation-mode latent codes for (document, sentence) vector rows."""
    latents, _, _ = ae_forward(model, np.asarray(doc_vecs), np.asarray(sen_vecs))
    return latents


def save_autoencoder(path: str, model: Autoencoder, metadata: dict | None = None) -> None:
    meta = dict(metadata or {})
    meta.update(
        {
            "model": "autoencoder",
            "input_dim": model.input_dim,
            "hidden_dim": model.hidden_dim,
            "latent_dim": model.latent_dim,
            "dropout": float(model.drop.p),
        }
    )
    arrays = {name: tensor.detach().numpy() for name, tensor in model.state_dict().items()}
    save_checkpoint(path, meta, arrays)


def load_autoencoder(path: str) -> tuple[Autoencoder, dict]:
    header, arrays = load_checkpoint(path)
    if header.get("model") != "autoencoder":
        raise ValueError(f"{path}: checkpoint is not an autoencoder (model={header.get('model')!r})")
    model = Autoencoder(header["input_dim"], header["hidden_dim"], header["latent_dim"], header["dropout"])
    state = {name: torch.as_tensor(arr) for name, arr in arrays.items()}
    model.load_state_dict(state)
    model.eval()
    return model, header


@dataclass
class ClusterModel:
    """Fitted k-means model over latent vectors."""

    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)
    refs: tuple | None = None  # optional (doc_id, index) per latent row

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def predict(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        d2 = ((points[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans(latents, k: int = DEFAULT_KMEANS_K, seed: int = 0, max_iter: int = 300, refs=None) -> ClusterModel:
    """Lloyd's algorithm with seeded distinct-point initialization.

    Iterates to an assignment fixed point or ``max_iter`` rounds; a
    cluster that empties is re-seeded at the point farthest from its
    assigned centroid. Ties in assignment go to the lowest cluster id.
    """
    points = np.asarray(latents, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"expected (n, dim) latent matrix, got shape {points.shape}")
    n = points.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if refs is not None and len(refs) != n:
        raise ValueError(f"{len(refs)} refs for {n} latent rows")
    rng = np.random.default_rng(seed)
    centroids = points[rng.choice(n, size=k, replace=False)].copy()

    assignments = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _squared_distances(points, centroids)
        new_assignments = d2.argmin(axis=1)
        for cid in range(k):
            if np.any(new_assignments == cid):
                continue
            own = d2[np.arange(n), new_assignments]
            centroids[cid] = points[int(np.argmax(own))]
            d2 = _squared_distances(points, centroids)
            new_assignments = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), new_assignments].sum()))
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for cid in range(k):
            members = points[assignments == cid]
            if len(members):
                centroids[cid] = members.mean(axis=0)

    d2 = _squared_distances(points, centroids)
    inertia = float(d2[np.arange(n), assignments].sum())
    return ClusterModel(
        centroids=centroids,
        assignments=assignments,
        inertia=inertia,
        n_iter=n_iter,
        inertia_history=history,
        refs=tuple(refs) if refs is not None else None,
    )


@dataclass
class AugmentationReport:
    dominant: dict[int, str]
    skipped: dict[int, str]
    augmented_count: int
    unlabeled_before: int
    unlabeled_after: int


def augment_labels(
    model: ClusterModel, labels: Sequence[SentenceAspectLabel]
) -> tuple[list[SentenceAspectLabel], AugmentationReport]:
    """Assign each cluster's dominant direct aspect to its unlabeled sentences.

    Dominance counts only origin=direct labels (augmented ones never feed
    back). Clusters with no direct labels or with a tied top count are
    skipped and recorded in the report. Direct labels are never altered.
    """
    if model.refs is not None:
        cluster_of: Mapping = {ref: int(c) for ref, c in zip(model.refs, model.assignments)}

        def lookup(pos: int, label: SentenceAspectLabel) -> int:
            key = (label.doc_id, label.index)
            if key not in cluster_of:
                raise ValueError(f"sentence {key} has no cluster assignment")
            return cluster_of[key]

    else:
        if len(labels) != len(model.assignments):
            raise ValueError(f"{len(labels)} labels for {len(model.assignments)} cluster assignments")

        def lookup(pos: int, label: SentenceAspectLabel) -> int:
            return int(model.assignments[pos])

    counts: dict[int, Counter] = {cid: Counter() for cid in range(model.k)}
    for pos, label in enumerate(labels):
        if label.origin == "direct" and label.labels:
            counts[lookup(pos, label)].update(label.labels)

    dominant: dict[int, str] = {}
    skipped: dict[int, str] = {}
    for cid in range(model.k):
        counter = counts[cid]
        if not counter:
            skipped[cid] = "no direct-labeled sentences"
            continue
        top = counter.most_common()
        if len(top) > 1 and top[0][1] == top[1][1]:
            skipped[cid] = f"tie between {sorted(a for a, c in top if c == top[0][1])}"
            continue
        dominant[cid] = top[0][0]

    augmented: list[SentenceAspectLabel] = []
    unlabeled_before = 0
    unlabeled_after = 0
    augmented_count = 0
    for pos, label in enumerate(labels):
        if label.labels:
            augmented.append(label)
            continue
        unlabeled_before += 1
        cid = lookup(pos, label)
        if cid in dominant:
            augmented.append(
                SentenceAspectLabel(
                    doc_id=label.doc_id,
                    index=label.index,
                    labels=frozenset({dominant[cid]}),
                    origin="cluster-augmented",
                )
            )
            augmented_count += 1
        else:
            augmented.append(label)
            unlabeled_after += 1
    report = AugmentationReport(
        dominant=dominant,
        skipped=skipped,
        augmented_count=augmented_count,
        unlabeled_before=unlabeled_before,
        unlabeled_after=unlabeled_after,
    )
    return augmented, report
