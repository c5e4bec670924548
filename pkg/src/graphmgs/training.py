"""Structure-aligned self-supervised pre-training, fine-tuning, and evaluation.

The pre-training objective maximizes rank correlation between structural
similarity (from fingerprints, constant) and embedding similarity (cosine of
encoder outputs, differentiable), using either a soft-rank surrogate for
Spearman or a plain Pearson surrogate.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import tensor as T
from .config import derive_seed, stable_hash
from .errors import DataError, NumericError
from .graphs import GraphCorpus
from .models import GnnModel, embed_graph, classify, with_head
from .similarity import (SimilarityPairSet, average_ranks, build_pair_set, mgs,
                         sample_pairs, structural_similarity, write_pair_csv)

SURROGATES = ("softrank", "pearson")


@dataclass(frozen=True)
class PgmConfig:
    surrogate: str = "softrank"
    temperature: float = 0.0       # 0 = auto: 0.05 x IQR of the batch's embedding sims
    batch_size: int = 32
    epochs: int = 100
    lr: float = 1e-3
    scheme: str = "topological"
    seed: int = 0
    holdout_fraction: float = 0.1
    eval_pairs: int = 200

    def __post_init__(self):
        if self.surrogate not in SURROGATES:
            raise DataError(f"unknown surrogate {self.surrogate!r}")
        if self.batch_size < 3:
            raise DataError("batch_size must be >= 3")
        if self.temperature < 0.0:
            raise DataError("temperature must be >= 0 (0 selects auto)")


@dataclass
class TrainReport:
    """Per-epoch pre-training trace; epochs are recorded consecutively from 1."""

    losses: list[float] = field(default_factory=list)
    holdout_mgs: list[float] = field(default_factory=list)
    wall_clock: float = 0.0
    seed: int = 0
    config_hash: str = ""
    skipped_batches: int = 0

    def to_dict(self) -> dict:
        return {
            "epochs": len(self.losses),
            "losses": self.losses,
            "holdout_mgs": self.holdout_mgs,
            "wall_clock": self.wall_clock,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "skipped_batches": self.skipped_batches,
        }


def _pearson_of(x: T.Tensor, y_const: np.ndarray) -> T.Tensor:
    """Differentiable Pearson correlation of a tensor against a constant vector."""
    y = np.asarray(y_const, dtype=np.float64)
    if float(np.var(x.data)) < 1e-30:
        raise NumericError("pgm loss undefined: constant embedding similarities")
    sy = float(np.sqrt(np.sum((y - y.mean()) ** 2)))
    if sy == 0.0:
        raise NumericError("pgm loss undefined: zero rank variance in structural similarities")
    dx = x - T.tmean(x)
    dy = (y - y.mean()) / sy
    num = T.tsum(dx * dy)
    den = T.sqrt(T.tsum(dx * dx))
    return num / den


def _batch_embedding_sims(embeddings: list[T.Tensor]) -> T.Tensor:
    """Cosine similarity of every unordered pair, as one differentiable vector."""
    rows = [T.reshape(e, (1, -1)) for e in embeddings]
    e = T.concat(rows, axis=0)
    sq = T.tsum(e * e, axis=1, keepdims=True)
    norms = T.sqrt(sq)
    if float(np.min(norms.data)) == 0.0:
        raise NumericError("undefined cosine: zero-norm embedding in batch")
    normed = e / norms
    sims = normed @ T.transpose(normed)
    i_idx, j_idx = np.triu_indices(len(embeddings), k=1)
    return T.gather2d(sims, i_idx, j_idx)


def pgm_loss(embeddings: list[T.Tensor], structural_sims: np.ndarray,
             cfg: PgmConfig) -> T.Tensor:
    """Negative correlation between structural and embedding similarity.

    softrank mode correlates differentiable soft ranks of the embedding
    similarities with exact average ranks of the structural similarities;
    pearson mode correlates the raw vectors.  Gradient flows only through
    the embedding side.
    """
    structural = np.asarray(structural_sims, dtype=np.float64)
    n_pairs = len(embeddings) * (len(embeddings) - 1) // 2
    if len(structural) != n_pairs:
        raise DataError(f"pgm_loss: {len(structural)} structural sims for {n_pairs} pairs")
    if n_pairs < 3:
        raise DataError("pgm_loss: need at least 3 pairs")
    if np.all(structural == structural[0]):
        raise NumericError("pgm loss undefined: zero rank variance in structural similarities")
    sims = _batch_embedding_sims(embeddings)
    if cfg.surrogate == "pearson":
        corr = _pearson_of(sims, structural)
    else:
        tau = cfg.temperature
        if tau == 0.0:
            q75, q25 = np.percentile(sims.data, [75, 25])
            spread = q75 - q25
            if spread <= 0.0:
                spread = float(np.max(sims.data) - np.min(sims.data))
            if spread <= 0.0:
                raise NumericError("pgm loss undefined: constant embedding similarities")
            tau = 0.05 * spread
        soft = T.soft_rank(sims, tau)
        corr = _pearson_of(soft, average_ranks(structural))
    return -corr


def _structural_sims_for_batch(graphs, fingerprints) -> np.ndarray:
    n = len(graphs)
    i_idx, j_idx = np.triu_indices(n, k=1)
    out = np.empty(len(i_idx), dtype=np.float64)
    for k, (i, j) in enumerate(zip(i_idx, j_idx)):
        out[k] = structural_similarity(fingerprints[graphs[i].id], fingerprints[graphs[j].id])
    return out


def holdout_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """(train_indices, holdout_indices) with at least 2 held-out graphs."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    k = max(2, int(round(fraction * n)))
    if k >= n:
        raise DataError("holdout fraction leaves no training graphs")
    return perm[k:], perm[:k]


def pretrain(corpus: GraphCorpus, model: GnnModel, cfg: PgmConfig,
             fingerprints: dict) -> tuple[GnnModel, TrainReport]:
    """Epochs of within-batch pair correlation maximization with Adam; the
    held-out MGS is evaluated on a fixed pair sample of unseen graphs."""
    missing = [g.id for g in corpus if g.id not in fingerprints]
    if missing:
        raise DataError(f"fingerprints missing for graphs: {missing[:5]}")
    graphs = list(corpus)
    report = TrainReport(seed=cfg.seed, config_hash=stable_hash(vars(cfg)))
    if cfg.epochs == 0:
        return model, report

    start = time.perf_counter()
    train_idx, hold_idx = holdout_split(len(graphs), cfg.holdout_fraction,
                                        derive_seed(cfg.seed, "pretrain-holdout"))
    hold_graphs = [graphs[i] for i in hold_idx]
    hold_corpus = GraphCorpus(graphs=tuple(hold_graphs), task_count=corpus.task_count,
                              name=corpus.name)
    n_hold_pairs = min(cfg.eval_pairs, len(hold_graphs) * (len(hold_graphs) - 1) // 2)

    params = model.parameters()
    state = T.AdamState.for_params(params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng(derive_seed(cfg.seed, "pretrain-shuffle"))

    def holdout_mgs() -> float:
        pairs = _eval_pair_set(hold_corpus, model, fingerprints, n_hold_pairs,
                               derive_seed(cfg.seed, "pretrain-eval"))
        return mgs(pairs)

    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(train_idx)
        batch_losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = [graphs[i] for i in order[lo:lo + cfg.batch_size]]
            if len(batch) < 3:
                continue
            structural = _structural_sims_for_batch(batch, fingerprints)
            T.zero_grads(params)
            try:
                embeddings = [embed_graph(model, g) for g in batch]
                loss = pgm_loss(embeddings, structural, cfg)
            except NumericError as exc:
                warnings.warn(f"skipping batch: {exc}")
                report.skipped_batches += 1
                T.clear_tape()
                continue
            if not np.isfinite(loss.item()):
                raise NumericError(
                    f"NaN/inf pre-training loss on batch {[g.id for g in batch]}")
            T.backward(loss)
            T.adam_step(params, state)
            batch_losses.append(loss.item())
        report.losses.append(float(np.mean(batch_losses)) if batch_losses else float("nan"))
        report.holdout_mgs.append(holdout_mgs())
    report.wall_clock = time.perf_counter() - start
    return model, report


def _eval_pair_set(corpus: GraphCorpus, model: GnnModel, fingerprints: dict,
                   n_pairs: int, seed: int) -> SimilarityPairSet:
    with T.no_grad():
        return build_pair_set(
            corpus, lambda g: embed_graph(model, g).data, fingerprints, n_pairs, seed)


def evaluate_mgs(corpus: GraphCorpus, model: GnnModel, fingerprints: dict,
                 n_pairs: int = 1000, seed: int = 0,
                 csv_path=None) -> tuple[float, SimilarityPairSet]:
    """MGS of a trained (or untrained) encoder over sampled pairs, with
    optional scatter CSV export."""
    pairs = _eval_pair_set(corpus, model, fingerprints, n_pairs, seed)
    value = mgs(pairs)
    if csv_path is not None:
        write_pair_csv(pairs, csv_path)
    return value, pairs


def roc_auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC; ties credit one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError(f"roc_auc: shape mismatch {s.shape} vs {y.shape}")
    pos = int(np.sum(y == 1))
    neg = int(np.sum(y == 0))
    if pos == 0 or neg == 0:
        raise NumericError("AUC undefined: needs at least one positive and one negative")
    ranks = average_ranks(s)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


@dataclass
class FinetuneReport:
    train_losses: list[float] = field(default_factory=list)
    valid_aucs: list[float] = field(default_factory=list)
    best_epoch: int = 0
    test_auc: float = float("nan")
    wall_clock: float = 0.0
    seed: int = 0
    config_hash: str = ""

    def to_dict(self) -> dict:
        return {
            "epochs": len(self.train_losses),
            "train_losses": self.train_losses,
            "valid_aucs": self.valid_aucs,
            "best_epoch": self.best_epoch,
            "test_auc": self.test_auc,
            "wall_clock": self.wall_clock,
            "seed": self.seed,
            "config_hash": self.config_hash,
        }


def split_folds(n: int, seed: int) -> dict[str, np.ndarray]:
    """Random 80/10/10 train/valid/test split."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = max(1, n // 10)
    n_valid = max(1, n // 10)
    if n_test + n_valid >= n:
        raise DataError(f"corpus of {n} graphs is too small to split 80/10/10")
    return {
        "test": perm[:n_test],
        "valid": perm[n_test:n_test + n_valid],
        "train": perm[n_test + n_valid:],
    }


def _fold_auc(model: GnnModel, graphs, labels_per_graph) -> float:
    """Mean per-task AUC over tasks with both classes present in the fold."""
    with T.no_grad():
        scores = np.stack([classify(model, g).data for g in graphs])
    tasks = scores.shape[1]
    aucs = []
    for t in range(tasks):
        y = np.asarray([lab[t] if lab[t] is not None else -1 for lab in labels_per_graph])
        known = y >= 0
        if known.sum() < 2:
            continue
        yt = y[known]
        if len(np.unique(yt)) < 2:
            continue
        aucs.append(roc_auc(scores[known, t], yt))
    if not aucs:
        raise NumericError("AUC undefined: no task has both classes in this fold")
    return float(np.mean(aucs))


def finetune(corpus: GraphCorpus, model: GnnModel, epochs: int = 100,
             lr: float = 1e-3, seed: int = 0, batch_size: int = 32,
             on_label_read: Optional[Callable[[str, Optional[int]], None]] = None,
             ) -> tuple[GnnModel, FinetuneReport]:
    """Supervised fine-tuning with masked binary cross-entropy over observed
    labels; returns the parameters from the best validation-AUC epoch.

    ``on_label_read(fold, epoch)`` is invoked on every fold label access
    (epoch None for the final test evaluation), so tests can verify that
    test labels are never touched during training.
    """
    if corpus.task_count < 1:
        raise DataError("finetune needs a corpus with graph labels")
    graphs = list(corpus)
    has_any = any(g.graph_labels is not None and any(l is not None for l in g.graph_labels)
                  for g in graphs)
    if not has_any:
        raise DataError("finetune: all graph labels are missing")
    if "head.w" not in model.params or model.config.task_count != corpus.task_count:
        model = with_head(model, corpus.task_count, derive_seed(seed, "head-init"))

    start = time.perf_counter()
    folds = split_folds(len(graphs), derive_seed(seed, "finetune-split"))

    def fold_labels(fold: str, epoch: Optional[int]):
        if on_label_read is not None:
            on_label_read(fold, epoch)
        out = []
        for i in folds[fold]:
            labs = graphs[i].graph_labels
            out.append(labs if labs is not None else (None,) * corpus.task_count)
        return out

    report = FinetuneReport(seed=seed, config_hash=stable_hash(
        {"epochs": epochs, "lr": lr, "batch_size": batch_size, "seed": seed,
         "model": model.config.to_dict()}))
    params = model.parameters()
    state = T.AdamState.for_params(params, lr=lr)
    shuffle_rng = np.random.default_rng(derive_seed(seed, "finetune-shuffle"))
    dropout_rng = np.random.default_rng(derive_seed(seed, "finetune-dropout"))
    best_auc = -np.inf
    best_params = {name: p.data.copy() for name, p in model.params.items()}
    best_epoch = 0

    for epoch in range(1, epochs + 1):
        order = shuffle_rng.permutation(len(folds["train"]))
        train_labels = fold_labels("train", epoch)
        epoch_losses = []
        for lo in range(0, len(order), batch_size):
            picks = order[lo:lo + batch_size]
            logits_rows = []
            targets = []
            masks = []
            for k in picks:
                g = graphs[folds["train"][k]]
                labs = train_labels[k]
                if all(l is None for l in labs):
                    continue  # all-missing graphs contribute nothing
                logits_rows.append(T.reshape(
                    classify(model, g, training=True, rng=dropout_rng), (1, -1)))
                targets.append([0.0 if l is None else float(l) for l in labs])
                masks.append([0.0 if l is None else 1.0 for l in labs])
            if not logits_rows:
                continue
            T.zero_grads(params)
            logits = T.concat(logits_rows, axis=0)
            loss = T.bce_with_logits(logits, np.asarray(targets), np.asarray(masks))
            if not np.isfinite(loss.item()):
                raise NumericError("NaN/inf fine-tuning loss")
            T.backward(loss)
            T.adam_step(params, state)
            epoch_losses.append(loss.item())
        report.train_losses.append(float(np.mean(epoch_losses)) if epoch_losses else float("nan"))
        try:
            valid_auc = _fold_auc(model, [graphs[i] for i in folds["valid"]],
                                  fold_labels("valid", epoch))
        except NumericError:
            valid_auc = float("nan")  # single-class fold this epoch; no signal
        report.valid_aucs.append(valid_auc)
        if valid_auc > best_auc:
            best_auc = valid_auc
            best_epoch = epoch
            best_params = {name: p.data.copy() for name, p in model.params.items()}

    for name, p in model.params.items():
        p.data = best_params[name]
    report.best_epoch = best_epoch
    report.test_auc = _fold_auc(model, [graphs[i] for i in folds["test"]],
                                fold_labels("test", None))
    report.wall_clock = time.perf_counter() - start
    return model, report
