"""Stochastic graph augmentations producing correlated views for training.

Every operation is a pure function of (graph, ratio, rng): repeated calls with
an identically seeded generator return identical views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError
from .graphdata import Graph

AUGMENT_TAG = 0x41554731


class AugmentKind(str, Enum):
    NODE_DROP = "node_drop"
    EDGE_DROP = "edge_drop"
    EDGE_ADD = "edge_add"
    FEATURE_MASK = "feature_mask"
    SUBGRAPH = "subgraph"
    IDENTITY = "identity"


@dataclass(frozen=True)
class AugmentSpec:
    kind: AugmentKind
    ratio: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "kind", AugmentKind(self.kind))
        if not (0.0 <= self.ratio < 1.0):
            raise ConfigError(f"augmentation ratio must lie in [0, 1), got {self.ratio}")


@dataclass(frozen=True)
class AugmentPolicy:
    """The two per-graph view transformations plus the stream seed."""

    first: AugmentSpec
    second: AugmentSpec
    seed: int = 0

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    @classmethod
    def default(cls, seed: int = 0) -> "AugmentPolicy":
        return cls(
            first=AugmentSpec(AugmentKind.NODE_DROP, 0.2),
            second=AugmentSpec(AugmentKind.SUBGRAPH, 0.2),
            seed=seed,
        )


def _induced(g: Graph, keep: np.ndarray) -> Graph:
    keep = np.sort(keep)
    remap = {int(old): new for new, old in enumerate(keep)}
    edges = tuple(
        (remap[i], remap[j]) for i, j in g.edges if i in remap and j in remap
    )
    return Graph(len(keep), edges, g.features[keep], g.label)


def node_drop(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    n_drop = math.floor(ratio * g.node_count)
    if n_drop == 0:
        return g
    drop = rng.choice(g.node_count, size=n_drop, replace=False)
    keep = np.setdiff1d(np.arange(g.node_count), drop)
    return _induced(g, keep)


def edge_drop(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    n_drop = math.floor(ratio * len(g.edges))
    if n_drop == 0:
        return g
    drop = set(rng.choice(len(g.edges), size=n_drop, replace=False).tolist())
    edges = tuple(e for idx, e in enumerate(g.edges) if idx not in drop)
    return Graph(g.node_count, edges, g.features, g.label)


def edge_add(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    present = set(g.edges)
    free = [
        (i, j)
        for i in range(g.node_count)
        for j in range(i + 1, g.node_count)
        if (i, j) not in present
    ]
    n_add = min(math.floor(ratio * len(g.edges)), len(free))
    if n_add == 0:
        return g
    picks = rng.choice(len(free), size=n_add, replace=False)
    edges = g.edges + tuple(free[k] for k in picks)
    return Graph(g.node_count, edges, g.features, g.label)


def feature_mask(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    n_mask = math.floor(ratio * g.feature_dim)
    if n_mask == 0:
        return g
    cols = rng.choice(g.feature_dim, size=n_mask, replace=False)
    feats = g.features.copy()
    feats[:, cols] = 0.0
    return Graph(g.node_count, g.edges, feats, g.label)


def subgraph(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Induced subgraph on a random-walk sample keeping about (1 - ratio) of nodes."""
    target = math.ceil((1.0 - ratio) * g.node_count)
    neighbors: dict[int, list[int]] = {i: [] for i in range(g.node_count)}
    for i, j in g.edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    current = int(rng.integers(g.node_count))
    visited = {current}
    budget = 10 * g.node_count
    while len(visited) < target and budget > 0:
        budget -= 1
        hood = neighbors[current]
        if not hood:
            break
        current = int(hood[rng.integers(len(hood))])
        visited.add(current)
    return _induced(g, np.fromiter(visited, dtype=np.int64))


_OPS = {
    AugmentKind.NODE_DROP: node_drop,
    AugmentKind.EDGE_DROP: edge_drop,
    AugmentKind.EDGE_ADD: edge_add,
    AugmentKind.FEATURE_MASK: feature_mask,
    AugmentKind.SUBGRAPH: subgraph,
}


def apply_augment(g: Graph, spec: AugmentSpec, rng: np.random.Generator) -> Graph:
    if spec.kind is AugmentKind.IDENTITY:
        return g
    return _OPS[spec.kind](g, spec.ratio, rng)


def view_rng(seed: int, epoch: int, graph_idx: int, view: int) -> np.random.Generator:
    """Independent stream per (seed, epoch, graph, view) tuple."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), AUGMENT_TAG, int(epoch), int(graph_idx), int(view)])
    )


def sample_pair(g: Graph, policy: AugmentPolicy, epoch: int, graph_idx: int) -> tuple[Graph, Graph]:
    v1 = apply_augment(g, policy.first, view_rng(policy.seed, epoch, graph_idx, 1))
    v2 = apply_augment(g, policy.second, view_rng(policy.seed, epoch, graph_idx, 2))
    return v1, v2
