"""Frozen-encoder embeddings, linear-probe classification, and diagnostics.

The probe is a hand-rolled L2-regularized multinomial logistic regression
trained by full-batch gradient descent with a spectral-norm step size, so fold
accuracies are deterministic functions of (embeddings, labels, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .augment import AugmentPolicy, sample_pair
from .cocoloss import build_mask, minmax_scale
from .encoder import gin_forward, project, readout
from .errors import DataError, NumericError, ShapeError
from .graphdata import GraphDataset
from .trainer import Checkpoint

FOLD_TAG = 0x464F4C44

PROBE_REG = 1e-3
PROBE_MAX_ITER = 500
PROBE_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingTable:
    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if rows.ndim != 2 or labels.ndim != 1 or rows.shape[0] != labels.shape[0]:
            raise ShapeError(f"table needs (n,d) rows and (n,) labels, got {rows.shape} and {labels.shape}")
        if not np.all(np.isfinite(rows)):
            raise NumericError("embedding table contains non-finite entries")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class ProbeReport:
    fold_accuracies: tuple[float, ...]
    mean: float
    std: float

    @classmethod
    def from_folds(cls, accs: Sequence[float]) -> "ProbeReport":
        accs = tuple(float(a) for a in accs)
        return cls(accs, float(np.mean(accs)), float(np.std(accs)))


def embed_rows(dataset: GraphDataset, ckpt: Checkpoint, mode: str = "anchor") -> np.ndarray:
    """One un-augmented forward pass per graph; the flattened pooled embedding
    is the row. ``concat`` appends the self-erased copy (entries above the
    config threshold zeroed) to double the width."""
    if mode not in ("anchor", "concat"):
        raise DataError(f"embed mode must be 'anchor' or 'concat', got {mode!r}")
    rows = []
    for g in dataset:
        pooled = readout(None, gin_forward(None, ckpt.encoder, g)).data
        flat = pooled.reshape(-1)
        if mode == "concat":
            mask = build_mask(minmax_scale(pooled), ckpt.config.delta)
            flat = np.concatenate([flat, (pooled * mask).reshape(-1)])
        rows.append(flat)
    return np.stack(rows)


def embed_all(dataset: GraphDataset, ckpt: Checkpoint, mode: str = "anchor") -> EmbeddingTable:
    return EmbeddingTable(embed_rows(dataset, ckpt, mode), dataset.labels())


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Deterministic stratified split; assignment depends only on (labels, seed)."""
    labels = np.asarray(labels, dtype=np.int64)
    if folds < 2:
        raise DataError(f"folds must be >= 2, got {folds}")
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise DataError("stratified folds need at least two classes")
    short = counts < folds
    if short.any():
        raise DataError(
            f"class {classes[short][0]} has {counts[short][0]} members, fewer than {folds} folds"
        )
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), FOLD_TAG]))
    fold_of = np.empty(labels.size, dtype=np.int64)
    for c in classes:
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = np.arange(idx.size) % folds
    return [np.flatnonzero(fold_of == f) for f in range(folds)]


def fit_probe(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    reg: float = PROBE_REG,
    max_iter: int = PROBE_MAX_ITER,
    tol: float = PROBE_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-batch gradient descent on softmax cross-entropy + L2 (bias excluded)."""
    n, d = x.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    # 1/2 bounds the softmax Hessian; the quadratic term adds its own curvature
    lipschitz = 0.5 * float(np.linalg.eigvalsh(x.T @ x / n).max()) + reg
    lr = 1.0 / lipschitz
    w = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    for _ in range(max_iter):
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        diff = (p - onehot) / n
        gw = x.T @ diff + reg * w
        gb = diff.sum(axis=0)
        if max(np.abs(gw).max(), np.abs(gb).max()) < tol:
            break
        w -= lr * gw
        b -= lr * gb
    return w, b


def linear_probe_cv(table: EmbeddingTable, folds: int = 10, seed: int = 0) -> ProbeReport:
    """Stratified k-fold accuracy of the logistic probe on frozen embeddings.

    Each fold standardizes columns with its own training statistics.
    """
    n_classes = int(table.labels.max()) + 1
    fold_sets = stratified_folds(table.labels, folds, seed)
    accs = []
    for f, test_idx in enumerate(fold_sets):
        train_idx = np.concatenate([fold_sets[g] for g in range(folds) if g != f])
        x_train = table.rows[train_idx]
        mu = x_train.mean(axis=0)
        sigma = x_train.std(axis=0)
        sigma = np.where(sigma > 0.0, sigma, 1.0)
        xs_train = (x_train - mu) / sigma
        xs_test = (table.rows[test_idx] - mu) / sigma
        w, b = fit_probe(xs_train, table.labels[train_idx], n_classes)
        pred = (xs_test @ w + b).argmax(axis=1)
        accs.append(float((pred == table.labels[test_idx]).mean()))
    return ProbeReport.from_folds(accs)


def _top_indices(v: np.ndarray, k: int) -> set[int]:
    order = np.argsort(-np.abs(v), kind="stable")
    return set(order[:k].tolist())


def highlighted_overlap(z1, z2, top_k: int) -> float:
    """Fraction of shared indices among each vector's top_k largest |entries|.

    Ties resolve toward the lower index.
    """
    a = np.asarray(z1, dtype=np.float64).reshape(-1)
    b = np.asarray(z2, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise ShapeError(f"vectors must have equal dims, got {a.size} and {b.size}")
    if not (1 <= top_k <= a.size):
        raise ShapeError(f"top_k must lie in [1, {a.size}], got {top_k}")
    return len(_top_indices(a, top_k) & _top_indices(b, top_k)) / top_k


def gradient_concentration(grad, top_k: int) -> float:
    """Share of total |gradient| mass carried by the top_k largest entries."""
    g = np.abs(np.asarray(grad, dtype=np.float64).reshape(-1))
    if not (1 <= top_k <= g.size):
        raise ShapeError(f"top_k must lie in [1, {g.size}], got {top_k}")
    total = g.sum()
    if total == 0.0:
        raise NumericError("gradient_concentration of a zero vector is undefined")
    return float(np.sort(g)[::-1][:top_k].sum() / total)


def positive_pair_overlap(
    dataset: GraphDataset, ckpt: Checkpoint, top_k: int, seed: int
) -> tuple[float, list[float]]:
    """Mean highlighted_overlap between the projected embeddings of each
    graph's two augmented views, drawn from an evaluation-owned stream.

    Measured on the projections because those are the vectors the contrastive
    objective compares, so they carry the dimension-concentration effect the
    diagnostic is after. No erasing is applied here; the statistic describes
    the trained model, not the training-time masking.
    """
    policy = AugmentPolicy(first=ckpt.config.aug1, second=ckpt.config.aug2, seed=seed)
    overlaps = []
    for graph_idx, g in enumerate(dataset):
        v1, v2 = sample_pair(g, policy, epoch=0, graph_idx=graph_idx)
        z1 = project(None, ckpt.head, readout(None, gin_forward(None, ckpt.encoder, v1)))
        z2 = project(None, ckpt.head, readout(None, gin_forward(None, ckpt.encoder, v2)))
        overlaps.append(highlighted_overlap(z1.data.reshape(-1), z2.data.reshape(-1), top_k))
    return float(np.mean(overlaps)), overlaps
