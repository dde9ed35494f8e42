"""Contrastive objective with erasing of dominant embedding dimensions.

The first view's pooled embedding picks, after global min-max scaling, the
entries exceeding a threshold; those entries are zeroed in the second view's
pooled embedding before projection. Only positive pairs see the erased
version; negatives always use the intact embeddings. The mask itself is a
constant: no gradient flows through its construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .ndiff import (
    Tape,
    Tensor,
    add,
    cosine_sim,
    hadamard_const,
    log_sum_exp,
    scale,
    stack_scalars,
    sum_all,
)


def minmax_scale(values: np.ndarray) -> np.ndarray:
    """Affine rescale of all entries to [0, 1]; a constant matrix maps to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def build_mask(scaled: np.ndarray, delta: float) -> np.ndarray:
    """Binary matrix: 0 where the scaled value strictly exceeds delta, else 1."""
    scaled = np.asarray(scaled, dtype=np.float64)
    return np.where(scaled > delta, 0.0, 1.0)


def erase(tape: Tape | None, x: Tensor, mask: np.ndarray) -> Tensor:
    return hadamard_const(tape, x, mask)


@dataclass(frozen=True)
class LossConfig:
    delta: float = 0.7
    tau: float = 0.2

    def __post_init__(self):
        if not (0.0 <= self.delta <= 1.0):
            raise ConfigError(f"delta must lie in [0, 1], got {self.delta}")
        if not self.tau > 0.0:
            raise ConfigError(f"tau must be positive, got {self.tau}")


@dataclass
class BatchViews:
    """Projected embeddings of one minibatch.

    ``z1`` anchors both roles for the first view; ``z2_pos`` is the erased
    second view paired against it, ``z2_neg`` the intact second view used for
    negatives. ``z1_pos`` overrides the positive-side first view (used when
    erasing runs in both directions) and defaults to ``z1``.
    """

    z1: list[Tensor]
    z2_pos: list[Tensor]
    z2_neg: list[Tensor]
    z1_pos: list[Tensor] | None = None

    def __post_init__(self):
        if self.z1_pos is None:
            self.z1_pos = self.z1
        sizes = {len(self.z1), len(self.z2_pos), len(self.z2_neg), len(self.z1_pos)}
        if sizes != {len(self.z1)}:
            raise ShapeError(f"view lists must have one common length, got {sorted(sizes)}")
        if not self.z1:
            raise ShapeError("batch must contain at least one graph")

    def __len__(self) -> int:
        return len(self.z1)


def infonce_batch(tape: Tape | None, views: BatchViews, cfg: LossConfig) -> Tensor:
    """Batched noise-contrastive loss over both view anchors.

    For each graph j and anchor view k the term is
    ``lse(all logits) - positive logit`` where the positive logit compares the
    (possibly erased) positive-pair projections and the negative logits compare
    the anchor's intact projection with every other graph's intact projections.
    The mean is taken over graphs, so a batch of one graph scores exactly 0.
    """
    b = len(views)
    inv_tau = 1.0 / cfg.tau
    pos = [cosine_sim(tape, views.z1_pos[j], views.z2_pos[j]) for j in range(b)]
    sim_11 = {}
    sim_22 = {}
    sim_12 = {}
    for i in range(b):
        for j in range(i + 1, b):
            sim_11[i, j] = cosine_sim(tape, views.z1[i], views.z1[j])
            sim_22[i, j] = cosine_sim(tape, views.z2_neg[i], views.z2_neg[j])
    for i in range(b):
        for j in range(b):
            if i != j:
                sim_12[i, j] = cosine_sim(tape, views.z1[i], views.z2_neg[j])

    terms = []
    for j in range(b):
        negs_k1 = []
        negs_k2 = []
        for jp in range(b):
            if jp == j:
                continue
            lo, hi = min(j, jp), max(j, jp)
            negs_k1.append(sim_11[lo, hi])
            negs_k1.append(sim_12[j, jp])
            negs_k2.append(sim_12[jp, j])
            negs_k2.append(sim_22[lo, hi])
        for negs in (negs_k1, negs_k2):
            logits = scale(tape, stack_scalars(tape, [pos[j]] + negs), inv_tau)
            lse = log_sum_exp(tape, logits)
            terms.append(add(tape, lse, scale(tape, pos[j], -inv_tau)))
    total = sum_all(tape, stack_scalars(tape, terms))
    return scale(tape, total, 1.0 / b)


def infonce_grad_analytic(
    u: np.ndarray, v_pos: np.ndarray, v_negs: Sequence[np.ndarray], tau: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Closed-form loss and positive-pair gradients of single-anchor InfoNCE.

    Uses raw inner products as logits. Returns (loss, d/du, d/dv_pos); serves
    as the independent oracle the tape gradients are checked against.
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v_pos = np.asarray(v_pos, dtype=np.float64).reshape(-1)
    negs = [np.asarray(v, dtype=np.float64).reshape(-1) for v in v_negs]
    logits = np.array([float(u @ v_pos)] + [float(u @ v) for v in negs]) / tau
    m = logits.max()
    weights = np.exp(logits - m)
    weights /= weights.sum()
    p_pos, p_negs = weights[0], weights[1:]
    loss = float(m + np.log(np.exp(logits - m).sum()) - logits[0])
    neg_pull = sum((p * v for p, v in zip(p_negs, negs)), start=np.zeros_like(u))
    du = -(1.0 / tau) * ((1.0 - p_pos) * v_pos - neg_pull)
    dv_pos = -((1.0 - p_pos) / tau) * u
    return loss, du, dv_pos
