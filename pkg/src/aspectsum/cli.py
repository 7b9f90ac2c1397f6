"""End-to-end pipeline CLI.

Subcommands cover the whole flow: build-oracle, label-subaspects,
train-autoencoder, cluster, augment, train-selector, summarize, evaluate,
shuffle-exp, cross-domain, report. Stages communicate only through files
in the output directory; every artifact gets a ``.meta.json`` sidecar
carrying the producing config hash, seed, and provider, and every command
writes a manifest.

Configuration is an INI file with one section per stage; every key has a
default matching the published hyperparameters. Environment variables
``ASPECTSUM_<SECTION>_<KEY>`` override file values, and command-line
flags override both. Exit codes: 0 success, 1 contract violation,
2 missing upstream artifact.
"""

from __future__ import annotations

import argparse
import configparser
import copy
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__, corpus as corpus_mod, evaluation, latent_cluster, selector as selector_mod, semantic_match, subaspects
from .corpus import Corpus, CorpusFormatError, load_corpus
from .embeddings import (
    EmbeddingCache,
    HashEmbeddingProvider,
    VectorFileProvider,
    document_sentence_matrix,
    document_token_embeddings,
    document_vector,
    embed_tokens,
)
from .latent_cluster import AETrainConfig, TrainingError
from .selector import SelTrainConfig
from .subaspects import ControlCode

DEFAULT_CONFIG: dict[str, dict[str, str]] = {
    "pipeline": {"output_dir": "out", "seed": "0"},
    "corpus": {"train": "", "val": "", "test": ""},
    "embeddings": {"provider": "hash", "dimension": "768", "seed": "0", "vector_file": "", "cache_dir": ""},
    "oracle": {"metric": "semantic", "threshold": "0.5"},
    "subaspects": {"k_mode": "oracle", "fixed_k": "4", "projection_dim": "4"},
    "autoencoder": {
        "lambda": "0.2",
        "lr": "1e-3",
        "weight_decay": "1e-3",
        "batch_size": "64",
        "dropout": "0.1",
        "epochs": "50",
        "patience": "5",
        "hidden_dim": "256",
        "latent_dim": "10",
    },
    "cluster": {"k": "5"},
    "selector": {
        "lr": "3e-4",
        "weight_decay": "1e-4",
        "batch_size": "64",
        "dropout": "0.2",
        "epochs": "20",
        "hidden_dim": "384",
        "num_layers": "2",
    },
    "summarize": {"top_k": "3", "trigram_block": "true"},
}

ENV_PREFIX = "ASPECTSUM"


class ContractError(ValueError):
    """User-facing configuration or input contract violation (exit 1)."""


class MissingArtifactError(RuntimeError):
    """A required upstream artifact file is absent (exit 2)."""


def _parse_bool(value: str) -> bool:
    if value.lower() in ("1", "true", "yes", "on"):
        return True
    if value.lower() in ("0", "false", "no", "off"):
        return False
    raise ContractError(f"expected a boolean, got {value!r}")


def load_config(path: str | None) -> dict[str, dict[str, str]]:
    """Defaults, overlaid by the INI file, overlaid by environment variables."""
    effective = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        if not os.path.exists(path):
            raise ContractError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.read(path)
        for section in parser.sections():
            if section not in effective:
                raise ContractError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in effective[section]:
                    raise ContractError(f"unknown config key {key!r} in section [{section}]")
                effective[section][key] = value
    for section, keys in effective.items():
        for key in keys:
            env_name = f"{ENV_PREFIX}_{section.upper()}_{key.upper()}"
            if env_name in os.environ:
                effective[section][key] = os.environ[env_name]
    return effective


def config_hash(effective: dict[str, dict[str, str]]) -> str:
    """Stable hash of the effective configuration, output location excluded."""
    lines = []
    for section in sorted(effective):
        for key in sorted(effective[section]):
            if section == "pipeline" and key == "output_dir":
                continue
            lines.append(f"{section}.{key}={effective[section][key]}")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:12]


@dataclass
class Pipeline:
    config: dict[str, dict[str, str]]

    def __post_init__(self) -> None:
        self.hash = config_hash(self.config)
        self.output_dir = self.config["pipeline"]["output_dir"]
        self.seed = int(self.config["pipeline"]["seed"])

    # --- inputs -----------------------------------------------------------

    def corpus_path(self, split: str) -> str:
        path = self.config["corpus"].get(corpus_mod.normalize_split(split), "")
        if not path:
            raise ContractError(f"no corpus path configured for split {split!r}")
        return path

    def load_split(self, split: str) -> Corpus:
        path = self.corpus_path(split)
        if not os.path.exists(path):
            raise ContractError(f"corpus file not found: {path}")
        return load_corpus(path, split)

    def provider(self):
        cfg = self.config["embeddings"]
        kind = cfg["provider"]
        if kind == "hash":
            return HashEmbeddingProvider(dimension=int(cfg["dimension"]), seed=int(cfg["seed"]))
        if kind == "vector-file":
            if not cfg["vector_file"]:
                raise ContractError("provider=vector-file requires embeddings.vector_file")
            return VectorFileProvider(cfg["vector_file"])
        raise ContractError(f"unknown embeddings provider {kind!r}")

    def cache(self, corpus_id: str, split: str) -> EmbeddingCache | None:
        root = self.config["embeddings"]["cache_dir"]
        if not root:
            return None
        return EmbeddingCache(root).scoped(corpus_id, split)

    # --- artifacts --------------------------------------------------------

    def artifact(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def require_artifact(self, name: str, producer: str) -> str:
        path = self.artifact(name)
        if not os.path.exists(path):
            raise MissingArtifactError(f"missing artifact {name!r}; run `{producer}` first")
        return path

    def write_meta(self, name: str, command: str, provider_name: str | None) -> None:
        meta = {
            "artifact": name,
            "command": command,
            "config_hash": self.hash,
            "seed": self.seed,
            "provider": provider_name,
            "created": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
        }
        with open(self.artifact(name) + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_manifest(self, command: str, provider_name: str | None, inputs: list[str], outputs: list[str]) -> None:
        manifest = {
            "command": command,
            "config_hash": self.hash,
            "seed": self.seed,
            "provider": provider_name,
            "inputs": sorted(inputs),
            "outputs": sorted(outputs),
            "created": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
        }
        with open(self.artifact(f"{command}.manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def finish(self, command: str, provider_name: str | None, inputs: list[str], outputs: list[str]) -> None:
        for name in outputs:
            self.write_meta(name, command, provider_name)
        self.write_manifest(command, provider_name, inputs, outputs)
        for name in outputs:
            print(f"[{command}] wrote {self.artifact(name)}")

    # --- derived data -----------------------------------------------------

    def sentence_vectors(self, split: str, corpus: Corpus, provider) -> dict[str, np.ndarray]:
        cache = self.cache(f"{split}-corpus", split)
        return {doc.id: document_sentence_matrix(provider, doc, cache) for doc in corpus}

    def oracle_name(self, split: str) -> str:
        return f"oracle-{self.config['oracle']['metric']}-{split}.jsonl"

    def load_alignments(self, split: str) -> dict[str, semantic_match.OracleAlignment]:
        path = self.require_artifact(self.oracle_name(split), "build-oracle")
        return {al.doc_id: al for al in semantic_match.read_oracles(path)}


# --- commands ---------------------------------------------------------------


def cmd_build_oracle(pipe: Pipeline, args) -> None:
    split = corpus_mod.normalize_split(args.split)
    corpus = pipe.load_split(split)
    metric = pipe.config["oracle"]["metric"]
    threshold = float(pipe.config["oracle"]["threshold"])
    provider = pipe.provider() if metric == "semantic" else None
    cache = pipe.cache(f"{split}-corpus", split) if provider else None

    alignments = []
    for doc in corpus:
        if not doc.has_gold:
            raise ContractError(f"document {doc.id!r} has no gold summary; cannot build an oracle")
        if metric == "semantic":
            source_embs = document_token_embeddings(provider, doc, cache)
            gold_embs = [embed_tokens(provider, s.tokens, cache) for s in doc.gold]
            alignments.append(
                semantic_match.build_semantic_oracle(
                    doc, source_embs, gold_embs, threshold=threshold, provider=provider.name
                )
            )
        elif metric == "lexical":
            alignments.append(semantic_match.build_lexical_oracle(doc))
        else:
            raise ContractError(f"unknown oracle metric {metric!r}")
    name = pipe.oracle_name(split)
    semantic_match.write_oracles(pipe.artifact(name), alignments)
    pipe.finish("build-oracle", provider.name if provider else None, [pipe.corpus_path(split)], [name])


def cmd_label_subaspects(pipe: Pipeline, args) -> None:
    split = corpus_mod.normalize_split(args.split)
    corpus = pipe.load_split(split)
    alignments = pipe.load_alignments(split)
    provider = pipe.provider()
    vectors = pipe.sentence_vectors(split, corpus, provider)
    k_mode = pipe.config["subaspects"]["k_mode"]
    fixed_k = int(pipe.config["subaspects"]["fixed_k"])
    projection_dim = int(pipe.config["subaspects"]["projection_dim"])
    if k_mode not in ("oracle", "fixed"):
        raise ContractError(f"unknown k_mode {k_mode!r}")

    records = {}
    for doc in corpus:
        if doc.id not in alignments:
            raise ContractError(f"oracle artifact does not cover document {doc.id!r}")
        selected = set(alignments[doc.id].selected)
        k = len(selected) if k_mode == "oracle" else fixed_k
        aspects = subaspects.compute_subaspects(vectors[doc.id], k or None, projection_dim)
        if selected:
            code = subaspects.map_summary(selected, aspects)
        else:
            code = ControlCode((0, 0, 0))
        records[doc.id] = (aspects, code)
    name = f"labels-{split}.jsonl"
    subaspects.write_labels(pipe.artifact(name), records)
    coverage = subaspects.corpus_coverage([code for _, code in records.values()])
    cov_name = f"coverage-{split}.json"
    with open(pipe.artifact(cov_name), "w", encoding="utf-8") as fh:
        json.dump(coverage, fh, indent=2, sort_keys=True)
        fh.write("\n")
    pipe.finish(
        "label-subaspects",
        provider.name,
        [pipe.corpus_path(split), pipe.oracle_name(split)],
        [name, cov_name],
    )


def _ae_pairs(pipe: Pipeline, split: str, provider):
    corpus = pipe.load_split(split)
    vectors = pipe.sentence_vectors(split, corpus, provider)
    docs = []
    sens = []
    for doc in corpus:
        matrix = vectors[doc.id]
        v_doc = document_vector(matrix)
        for row in matrix:
            docs.append(v_doc)
            sens.append(row)
    return np.asarray(docs), np.asarray(sens)


def _ae_config(pipe: Pipeline) -> AETrainConfig:
    cfg = pipe.config["autoencoder"]
    return AETrainConfig(
        adv_weight=float(cfg["lambda"]),
        lr=float(cfg["lr"]),
        weight_decay=float(cfg["weight_decay"]),
        batch_size=int(cfg["batch_size"]),
        dropout=float(cfg["dropout"]),
        epochs=int(cfg["epochs"]),
        patience=int(cfg["patience"]),
        seed=pipe.seed,
        hidden_dim=int(cfg["hidden_dim"]),
        latent_dim=int(cfg["latent_dim"]),
    )


def cmd_train_autoencoder(pipe: Pipeline, args) -> None:
    provider = pipe.provider()
    train_pairs = _ae_pairs(pipe, "train", provider)
    val_pairs = _ae_pairs(pipe, "val", provider) if pipe.config["corpus"]["val"] else None
    cfg = _ae_config(pipe)
    result = latent_cluster.train_autoencoder(train_pairs, cfg, val_pairs)
    name = "autoencoder.ckpt"
    latent_cluster.save_autoencoder(
        pipe.artifact(name),
        result.model,
        {"seed": cfg.seed, "config_hash": pipe.hash, "provider": provider.name, "best_epoch": result.best_epoch},
    )
    print(
        f"[train-autoencoder] epochs={len(result.train_loss_main)} best_epoch={result.best_epoch} "
        f"final_loss_main={result.train_loss_main[-1]:.6f}"
    )
    inputs = [pipe.corpus_path("train")] + ([pipe.corpus_path("val")] if val_pairs is not None else [])
    pipe.finish("train-autoencoder", provider.name, inputs, [name])


def cmd_cluster(pipe: Pipeline, args) -> None:
    split = corpus_mod.normalize_split(args.split)
    ckpt = pipe.require_artifact("autoencoder.ckpt", "train-autoencoder")
    model, _ = latent_cluster.load_autoencoder(ckpt)
    provider = pipe.provider()
    corpus = pipe.load_split(split)
    vectors = pipe.sentence_vectors(split, corpus, provider)

    refs = []
    doc_rows = []
    sen_rows = []
    for doc in corpus:
        matrix = vectors[doc.id]
        v_doc = document_vector(matrix)
        for i, row in enumerate(matrix):
            refs.append((doc.id, i))
            doc_rows.append(v_doc)
            sen_rows.append(row)
    latents = latent_cluster.encode_latents(model, np.asarray(doc_rows), np.asarray(sen_rows))
    k = int(pipe.config["cluster"]["k"])
    cluster_model = latent_cluster.kmeans(latents, k=k, seed=pipe.seed, refs=refs)

    name = f"clusters-{split}.jsonl"
    with open(pipe.artifact(name), "w", encoding="utf-8") as fh:
        for (doc_id, index), cid in zip(refs, cluster_model.assignments):
            fh.write(json.dumps({"cluster": int(cid), "id": doc_id, "index": index}, sort_keys=True) + "\n")
    model_name = f"cluster-model-{split}.json"
    with open(pipe.artifact(model_name), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "centroids": [[float(x) for x in row] for row in cluster_model.centroids],
                "inertia": cluster_model.inertia,
                "k": k,
                "n_iter": cluster_model.n_iter,
                "seed": pipe.seed,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    pipe.finish("cluster", provider.name, [ckpt, pipe.corpus_path(split)], [name, model_name])


def _read_clusters(path: str) -> tuple[list[tuple[str, int]], list[int]]:
    refs = []
    cids = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            refs.append((rec["id"], rec["index"]))
            cids.append(rec["cluster"])
    return refs, cids


def cmd_augment(pipe: Pipeline, args) -> None:
    split = corpus_mod.normalize_split(args.split)
    clusters_path = pipe.require_artifact(f"clusters-{split}.jsonl", "cluster")
    model_path = pipe.require_artifact(f"cluster-model-{split}.json", "cluster")
    labels_path = pipe.require_artifact(f"labels-{split}.jsonl", "label-subaspects")
    corpus = pipe.load_split(split)
    refs, cids = _read_clusters(clusters_path)
    with open(model_path, encoding="utf-8") as fh:
        centroids = np.asarray(json.load(fh)["centroids"])
    cluster_model = latent_cluster.ClusterModel(
        centroids=centroids,
        assignments=np.asarray(cids, dtype=np.int64),
        inertia=0.0,
        n_iter=0,
        refs=tuple(refs),
    )
    label_records = subaspects.read_labels(labels_path)
    labels = []
    for doc in corpus:
        if doc.id not in label_records:
            raise ContractError(f"labels artifact does not cover document {doc.id!r}")
        aspects, _ = label_records[doc.id]
        labels.extend(subaspects.direct_sentence_labels(doc.id, doc.n_sentences, aspects))
    augmented, report = latent_cluster.augment_labels(cluster_model, labels)

    name = f"augmented-{split}.jsonl"
    with open(pipe.artifact(name), "w", encoding="utf-8") as fh:
        for label in augmented:
            fh.write(
                json.dumps(
                    {
                        "id": label.doc_id,
                        "index": label.index,
                        "labels": sorted(label.labels),
                        "origin": label.origin,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    report_name = f"augment-report-{split}.json"
    with open(pipe.artifact(report_name), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "dominant": {str(c): a for c, a in sorted(report.dominant.items())},
                "skipped": {str(c): r for c, r in sorted(report.skipped.items())},
                "augmented_count": report.augmented_count,
                "unlabeled_before": report.unlabeled_before,
                "unlabeled_after": report.unlabeled_after,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    pipe.finish("augment", None, [clusters_path, model_path, labels_path], [name, report_name])


def _read_augmented(path: str) -> list[subaspects.SentenceAspectLabel]:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            labels.append(
                subaspects.SentenceAspectLabel(
                    doc_id=rec["id"],
                    index=rec["index"],
                    labels=frozenset(rec["labels"]),
                    origin=rec["origin"],
                )
            )
    return labels


def _selector_config(pipe: Pipeline) -> SelTrainConfig:
    cfg = pipe.config["selector"]
    return SelTrainConfig(
        lr=float(cfg["lr"]),
        weight_decay=float(cfg["weight_decay"]),
        batch_size=int(cfg["batch_size"]),
        dropout=float(cfg["dropout"]),
        epochs=int(cfg["epochs"]),
        seed=pipe.seed,
        hidden_dim=int(cfg["hidden_dim"]),
        num_layers=int(cfg["num_layers"]),
    )


def _training_examples(pipe: Pipeline, split: str, provider) -> list[selector_mod.TrainingExample]:
    corpus = pipe.load_split(split)
    alignments = pipe.load_alignments(split)
    labels_path = pipe.require_artifact(f"labels-{split}.jsonl", "label-subaspects")
    label_records = subaspects.read_labels(labels_path)
    aspect_sets = {doc_id: aspects for doc_id, (aspects, _) in label_records.items()}
    augmented_path = pipe.artifact(f"augmented-{split}.jsonl")
    augmented = _read_augmented(augmented_path) if os.path.exists(augmented_path) else None
    vectors = pipe.sentence_vectors(split, corpus, provider)
    return selector_mod.label_training_pairs(
        corpus, alignments, aspect_sets, augmented, sentence_vectors=vectors
    )


def cmd_train_selector(pipe: Pipeline, args) -> None:
    provider = pipe.provider()
    train_examples = _training_examples(pipe, "train", provider)
    val_examples = _training_examples(pipe, "val", provider)
    cfg = _selector_config(pipe)
    result = selector_mod.train_selector(train_examples, cfg, val_examples)
    name = "selector.ckpt"
    selector_mod.save_selector(
        pipe.artifact(name),
        result.model,
        {"seed": cfg.seed, "config_hash": pipe.hash, "provider": provider.name, "best_epoch": result.best_epoch},
    )
    print(
        f"[train-selector] epochs={len(result.train_loss)} best_epoch={result.best_epoch} "
        f"best_val_loss={min(result.val_loss):.6f}"
    )
    pipe.finish("train-selector", provider.name, [pipe.corpus_path("train"), pipe.corpus_path("val")], [name])


def _parse_code(text: str) -> ControlCode:
    try:
        return ControlCode.from_string(text)
    except ValueError as exc:
        raise ContractError(str(exc)) from exc


def cmd_summarize(pipe: Pipeline, args) -> None:
    split = corpus_mod.normalize_split(args.split)
    code = _parse_code(args.code)
    ckpt = pipe.require_artifact("selector.ckpt", "train-selector")
    model, _ = selector_mod.load_selector(ckpt)
    provider = pipe.provider()
    corpus = pipe.load_split(split)
    vectors = pipe.sentence_vectors(split, corpus, provider)
    top_k = int(pipe.config["summarize"]["top_k"]) if args.top_k is None else args.top_k
    trigram_block = _parse_bool(pipe.config["summarize"]["trigram_block"]) and not args.no_trigram_block
    summaries = evaluation.summarize_corpus(model, corpus, code, vectors, top_k, trigram_block)
    name = f"summaries-{code}-{split}.jsonl"
    with open(pipe.artifact(name), "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(
                json.dumps(
                    {"code": str(code), "id": doc.id, "selected": list(summaries[doc.id])}, sort_keys=True
                )
                + "\n"
            )
    pipe.finish("summarize", provider.name, [ckpt, pipe.corpus_path(split)], [name])


def _read_summaries(path: str) -> dict[str, list[int]]:
    summaries = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            summaries[rec["id"]] = list(rec["selected"])
    return summaries


def cmd_evaluate(pipe: Pipeline, args) -> None:
    split = corpus_mod.normalize_split(args.split)
    code = _parse_code(args.code)
    summaries_path = pipe.require_artifact(f"summaries-{code}-{split}.jsonl", "summarize")
    corpus = pipe.load_split(split)
    summaries = _read_summaries(summaries_path)
    labels_path = pipe.artifact(f"labels-{split}.jsonl")
    aspect_sets = None
    if os.path.exists(labels_path):
        aspect_sets = {doc_id: aspects for doc_id, (aspects, _) in subaspects.read_labels(labels_path).items()}
    report = evaluation.evaluate_system(
        summaries, corpus, system=f"selector[{code}]", code=code, aspect_sets=aspect_sets
    )
    base = f"eval-{code}-{split}"
    evaluation.write_report_json(pipe.artifact(f"{base}.json"), [report])
    with open(pipe.artifact(f"{base}.txt"), "w", encoding="utf-8") as fh:
        fh.write(evaluation.format_report_text([report]))
    evaluation.write_per_doc_csv(pipe.artifact(f"{base}.csv"), report)
    evaluation.write_histogram_csv(pipe.artifact(f"{base}-positions.csv"), report.position_hist)
    print(evaluation.format_report_text([report]), end="")
    outputs = [f"{base}.json", f"{base}.txt", f"{base}.csv", f"{base}-positions.csv"]
    pipe.finish("evaluate", None, [summaries_path, pipe.corpus_path(split)], outputs)


def _parse_codes(text: str) -> list[ControlCode]:
    return [_parse_code(part.strip()) for part in text.split(",") if part.strip()]


def cmd_shuffle_exp(pipe: Pipeline, args) -> None:
    split = corpus_mod.normalize_split(args.split)
    ckpt = pipe.require_artifact("selector.ckpt", "train-selector")
    model, _ = selector_mod.load_selector(ckpt)
    provider = pipe.provider()
    corpus = pipe.load_split(split)
    codes = _parse_codes(args.codes)
    seed = pipe.seed if args.seed is None else args.seed
    top_k = int(pipe.config["summarize"]["top_k"])
    rows = evaluation.shuffle_experiment(model, corpus, codes, seed, provider, top_k=top_k)
    name = f"shuffle-{split}.json"
    with open(pipe.artifact(name), "w", encoding="utf-8") as fh:
        json.dump([row.to_dict() for row in rows], fh, indent=2, sort_keys=True)
        fh.write("\n")
    text_name = f"shuffle-{split}.txt"
    with open(pipe.artifact(text_name), "w", encoding="utf-8") as fh:
        fh.write(f"{'code':<6} {'R1-F1 in-order':>15} {'R1-F1 shuffled':>15} {'drop':>8}\n")
        for row in rows:
            fh.write(
                f"{row.code:<6} {row.inorder_rouge1_f1:>15.4f} {row.shuffled_rouge1_f1:>15.4f} "
                f"{row.rouge1_drop:>8.4f}\n"
            )
    pipe.finish("shuffle-exp", provider.name, [ckpt, pipe.corpus_path(split)], [name, text_name])


def cmd_cross_domain(pipe: Pipeline, args) -> None:
    ckpt = pipe.require_artifact("selector.ckpt", "train-selector")
    model, _ = selector_mod.load_selector(ckpt)
    provider = pipe.provider()
    if not os.path.exists(args.foreign_corpus):
        raise ContractError(f"foreign corpus file not found: {args.foreign_corpus}")
    foreign = load_corpus(args.foreign_corpus, "test")
    codes = _parse_codes(args.codes)
    top_k = int(pipe.config["summarize"]["top_k"])
    reports = evaluation.cross_domain_inference(model, foreign, codes, provider, top_k=top_k)
    name = "cross-domain.json"
    evaluation.write_report_json(pipe.artifact(name), reports)
    text_name = "cross-domain.txt"
    with open(pipe.artifact(text_name), "w", encoding="utf-8") as fh:
        fh.write(evaluation.format_report_text(reports))
    print(evaluation.format_report_text(reports), end="")
    pipe.finish("cross-domain", provider.name, [ckpt, args.foreign_corpus], [name, text_name])


def cmd_report(pipe: Pipeline, args) -> None:
    if not os.path.isdir(pipe.output_dir):
        raise MissingArtifactError(f"output directory {pipe.output_dir!r} does not exist")
    metas = []
    for entry in sorted(os.listdir(pipe.output_dir)):
        if entry.endswith(".meta.json"):
            with open(os.path.join(pipe.output_dir, entry), encoding="utf-8") as fh:
                metas.append(json.load(fh))
    if not metas:
        raise MissingArtifactError(f"no artifacts with metadata found in {pipe.output_dir!r}")
    hashes = sorted({meta["config_hash"] for meta in metas})
    if len(hashes) > 1 and not args.force:
        raise ContractError(
            f"artifacts were produced by different config hashes {hashes}; re-run stages or pass --force"
        )
    combined = {
        "config_hashes": hashes,
        "artifacts": [
            {k: meta[k] for k in ("artifact", "command", "config_hash", "seed", "provider")} for meta in metas
        ],
    }
    name = "report.json"
    with open(pipe.artifact(name), "w", encoding="utf-8") as fh:
        json.dump(combined, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"[report] {len(metas)} artifacts, config hashes: {', '.join(hashes)}")
    pipe.finish("report", None, [], [name])


# --- argument parsing ---------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file; defaults match the published hyperparameters")
    parser.add_argument("--output-dir", help="artifact directory (overrides pipeline.output_dir)")
    parser.add_argument("--corpus", help="corpus JSONL path for this command's split")
    parser.add_argument("--seed", type=int, default=None, help="override pipeline.seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aspectsum", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-oracle", help="greedy extractive oracles from gold summaries")
    _add_common(p)
    p.add_argument("--split", default="train")
    p.add_argument("--metric", choices=["semantic", "lexical"])
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_build_oracle)

    p = sub.add_parser("label-subaspects", help="per-document aspect subsets and summary codes")
    _add_common(p)
    p.add_argument("--split", default="train")
    p.add_argument("--k-mode", choices=["oracle", "fixed"])
    p.add_argument("--projection-dim", type=int)
    p.set_defaults(func=cmd_label_subaspects)

    p = sub.add_parser("train-autoencoder", help="adversarial autoencoder over (doc, sentence) vectors")
    _add_common(p)
    p.add_argument("--lambda", dest="adv_weight", type=float)
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train_autoencoder)

    p = sub.add_parser("cluster", help="k-means over autoencoder latents")
    _add_common(p)
    p.add_argument("--split", default="train")
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("augment", help="cluster-dominance augmentation of sentence labels")
    _add_common(p)
    p.add_argument("--split", default="train")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train-selector", help="conditional BiLSTM sentence selector")
    _add_common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.set_defaults(func=cmd_train_selector)

    p = sub.add_parser("summarize", help="extract summaries under one control code")
    _add_common(p)
    p.add_argument("--split", default="test")
    p.add_argument("--code", required=True, help="3-bit string [importance, diversity, position], e.g. 101")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--no-trigram-block", action="store_true")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="ROUGE and position analysis of a summaries artifact")
    _add_common(p)
    p.add_argument("--split", default="test")
    p.add_argument("--code", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("shuffle-exp", help="paired in-order vs shuffled-sentence inference")
    _add_common(p)
    p.add_argument("--split", default="test")
    p.add_argument("--codes", default="001,010,100")
    p.set_defaults(func=cmd_shuffle_exp)

    p = sub.add_parser("cross-domain", help="inference on a foreign-domain corpus")
    _add_common(p)
    p.add_argument("--foreign-corpus", required=True)
    p.add_argument("--codes", default="001,010,100")
    p.set_defaults(func=cmd_cross_domain)

    p = sub.add_parser("report", help="collate artifact metadata, refusing mixed config hashes")
    _add_common(p)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def _apply_flag_overrides(effective: dict[str, dict[str, str]], args) -> None:
    if getattr(args, "output_dir", None):
        effective["pipeline"]["output_dir"] = args.output_dir
    if getattr(args, "seed", None) is not None:
        effective["pipeline"]["seed"] = str(args.seed)
    if getattr(args, "corpus", None):
        split = corpus_mod.normalize_split(getattr(args, "split", "train") or "train")
        effective["corpus"][split] = args.corpus
    if getattr(args, "metric", None):
        effective["oracle"]["metric"] = args.metric
    if getattr(args, "threshold", None) is not None:
        effective["oracle"]["threshold"] = repr(args.threshold)
    if getattr(args, "k_mode", None):
        effective["subaspects"]["k_mode"] = args.k_mode
    if getattr(args, "projection_dim", None) is not None:
        effective["subaspects"]["projection_dim"] = str(args.projection_dim)
    if getattr(args, "adv_weight", None) is not None:
        effective["autoencoder"]["lambda"] = repr(args.adv_weight)
    if getattr(args, "epochs", None) is not None:
        section = "autoencoder" if args.command == "train-autoencoder" else "selector"
        effective[section]["epochs"] = str(args.epochs)
    if getattr(args, "hidden", None) is not None:
        effective["selector"]["hidden_dim"] = str(args.hidden)
    if getattr(args, "k", None) is not None:
        effective["cluster"]["k"] = str(args.k)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        effective = load_config(args.config)
        _apply_flag_overrides(effective, args)
        pipe = Pipeline(effective)
        os.makedirs(pipe.output_dir, exist_ok=True)
        args.func(pipe, args)
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, CorpusFormatError, TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
