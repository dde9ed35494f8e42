"""Graph and dataset types, TUDataset-format text I/O, and synthetic data.

Graphs are immutable: undirected edges are canonicalized to sorted ``i < j``
pairs and deduplicated at construction, feature matrices are write-protected.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParseError

log = logging.getLogger(__name__)

MAX_DEGREE_CAP = 50


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph with per-node features and an optional class label."""

    node_count: int
    edges: tuple[tuple[int, int], ...]
    features: np.ndarray
    label: int | None = None

    def __post_init__(self):
        if self.node_count < 1:
            raise DataError(f"graph needs at least one node, got {self.node_count}")
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise DataError(f"self-loop on node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise DataError(f"edge ({i},{j}) references a node outside 0..{self.node_count - 1}")
            canon.add((i, j) if i < j else (j, i))
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.node_count:
            raise DataError(f"features must be ({self.node_count}, F), got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise DataError("features contain non-finite entries")
        feats = feats.copy()
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        if self.label is not None and self.label < 0:
            raise DataError(f"label must be non-negative, got {self.label}")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count), dtype=np.float64)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.edges == other.edges
            and self.label == other.label
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


@dataclass(frozen=True)
class GraphDataset:
    """Ordered collection of graphs sharing one feature dimension."""

    graphs: tuple[Graph, ...]
    feature_dim: int
    num_classes: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if not self.graphs:
            raise DataError("dataset needs at least one graph")
        for g in self.graphs:
            if g.feature_dim != self.feature_dim:
                raise DataError(f"graph feature dim {g.feature_dim} != dataset dim {self.feature_dim}")
        if self.num_classes is not None:
            if self.num_classes < 1:
                raise DataError("num_classes must be >= 1")
            for g in self.graphs:
                if g.label is not None and g.label >= self.num_classes:
                    raise DataError(f"label {g.label} out of range for {self.num_classes} classes")

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, idx: int) -> Graph:
        return self.graphs[idx]

    def labels(self) -> np.ndarray:
        if any(g.label is None for g in self.graphs):
            raise DataError("dataset has unlabeled graphs")
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph]) -> "GraphDataset":
        graphs = tuple(graphs)
        if not graphs:
            raise DataError("dataset needs at least one graph")
        labels = [g.label for g in graphs if g.label is not None]
        num_classes = (max(labels) + 1) if labels else None
        return cls(graphs=graphs, feature_dim=graphs[0].feature_dim, num_classes=num_classes)


# ---------------------------------------------------------------------------
# feature synthesis
# ---------------------------------------------------------------------------

def degree_features(g: Graph, max_degree: int) -> Graph:
    """Replace node features by a one-hot of min(degree, max_degree)."""
    if max_degree < 1:
        raise DataError(f"max_degree must be >= 1, got {max_degree}")
    binned = np.minimum(g.degrees(), max_degree)
    feats = np.zeros((g.node_count, max_degree + 1))
    feats[np.arange(g.node_count), binned] = 1.0
    return Graph(node_count=g.node_count, edges=g.edges, features=feats, label=g.label)


def _with_dataset_degree_features(graphs: Sequence[Graph], labels_present: bool) -> GraphDataset:
    cap = max((int(g.degrees().max(initial=0)) for g in graphs), default=0)
    cap = max(1, min(cap, MAX_DEGREE_CAP))
    rebuilt = tuple(degree_features(g, cap) for g in graphs)
    return GraphDataset.from_graphs(rebuilt) if labels_present else GraphDataset(rebuilt, cap + 1, None)


# ---------------------------------------------------------------------------
# TUDataset text format
# ---------------------------------------------------------------------------

def _read_int_lines(path: Path, n_fields: int) -> list[tuple[int, ...]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != n_fields:
                raise ParseError(path, line_no, f"expected {n_fields} comma-separated fields, got {len(parts)}")
            try:
                rows.append(tuple(int(p) for p in parts))
            except ValueError:
                raise ParseError(path, line_no, f"non-integer token in {line!r}") from None
    return rows


def load_tudataset(directory, name: str) -> GraphDataset:
    """Load a dataset stored in the TUDataset text convention.

    Requires ``<name>_A.txt``, ``<name>_graph_indicator.txt`` and
    ``<name>_graph_labels.txt`` under ``directory``; 1-based indices are
    converted to 0-based, directed duplicate edge rows collapse to one
    undirected edge, and self-loops are dropped (counted in a warning).
    Node labels, when ``<name>_node_labels.txt`` exists, become one-hot
    features; otherwise degree one-hot features are synthesized with the
    dataset-wide maximum degree capped at 50.
    """
    directory = Path(directory)
    paths = {key: directory / f"{name}_{key}.txt" for key in ("A", "graph_indicator", "graph_labels", "node_labels")}
    for key in ("A", "graph_indicator", "graph_labels"):
        if not paths[key].exists():
            raise DataError(f"missing required file {paths[key]}")

    indicator = [row[0] for row in _read_int_lines(paths["graph_indicator"], 1)]
    n_nodes = len(indicator)
    if n_nodes == 0:
        raise DataError(f"{paths['graph_indicator']} declares no nodes")
    graph_ids = sorted(set(indicator))
    node_of_graph: dict[int, list[int]] = {gid: [] for gid in graph_ids}
    for node, gid in enumerate(indicator):
        node_of_graph[gid].append(node)
    local_index = {}
    for gid, nodes in node_of_graph.items():
        for local, node in enumerate(nodes):
            local_index[node] = (gid, local)

    raw_labels = [row[0] for row in _read_int_lines(paths["graph_labels"], 1)]
    if len(raw_labels) != len(graph_ids):
        raise DataError(
            f"{paths['graph_labels']} has {len(raw_labels)} labels for {len(graph_ids)} graphs"
        )
    label_map = {lab: idx for idx, lab in enumerate(sorted(set(raw_labels)))}

    edges_of_graph: dict[int, set[tuple[int, int]]] = {gid: set() for gid in graph_ids}
    self_loops = 0
    with open(paths["A"], "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise ParseError(paths["A"], line_no, f"expected 2 comma-separated fields, got {len(parts)}")
            try:
                u, v = (int(p) for p in parts)
            except ValueError:
                raise ParseError(paths["A"], line_no, f"non-integer token in {line!r}") from None
            for endpoint in (u, v):
                if not (1 <= endpoint <= n_nodes):
                    raise ParseError(paths["A"], line_no, f"node {endpoint} outside declared range 1..{n_nodes}")
            if u == v:
                self_loops += 1
                continue
            gu, lu = local_index[u - 1]
            gv, lv = local_index[v - 1]
            if gu != gv:
                raise ParseError(paths["A"], line_no, f"edge ({u},{v}) crosses graphs {gu} and {gv}")
            edges_of_graph[gu].add((lu, lv) if lu < lv else (lv, lu))
    if self_loops:
        log.warning("dropped %d self-loop rows while loading %s", self_loops, name)

    node_labels = None
    if paths["node_labels"].exists():
        values = [row[0] for row in _read_int_lines(paths["node_labels"], 1)]
        if len(values) != n_nodes:
            raise DataError(f"{paths['node_labels']} has {len(values)} labels for {n_nodes} nodes")
        node_labels = values

    graphs = []
    if node_labels is not None:
        alphabet = {lab: idx for idx, lab in enumerate(sorted(set(node_labels)))}
        width = len(alphabet)
        for order, gid in enumerate(graph_ids):
            nodes = node_of_graph[gid]
            feats = np.zeros((len(nodes), width))
            for local, node in enumerate(nodes):
                feats[local, alphabet[node_labels[node]]] = 1.0
            graphs.append(
                Graph(len(nodes), tuple(edges_of_graph[gid]), feats, label_map[raw_labels[order]])
            )
        return GraphDataset.from_graphs(graphs)

    for order, gid in enumerate(graph_ids):
        nodes = node_of_graph[gid]
        feats = np.zeros((len(nodes), 1))
        graphs.append(Graph(len(nodes), tuple(edges_of_graph[gid]), feats, label_map[raw_labels[order]]))
    return _with_dataset_degree_features(graphs, labels_present=True)


def _one_hot_labels(dataset: GraphDataset) -> list[list[int]] | None:
    """Recover integer node labels iff features are exact one-hot with every column used."""
    used = np.zeros(dataset.feature_dim, dtype=bool)
    labels = []
    for g in dataset.graphs:
        f = g.features
        if not (np.all((f == 0.0) | (f == 1.0)) and np.all(f.sum(axis=1) == 1.0)):
            return None
        idx = f.argmax(axis=1)
        used[idx] = True
        labels.append(idx.tolist())
    return labels if bool(used.all()) else None


def save_tudataset(dataset: GraphDataset, directory, name: str) -> list[Path]:
    """Write a dataset in the TUDataset text convention (inverse of load).

    Node labels are emitted only when features are exactly one-hot with every
    column in use; otherwise the node-labels file is omitted and a reload
    falls back to degree one-hot features.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    a_path = directory / f"{name}_A.txt"
    ind_path = directory / f"{name}_graph_indicator.txt"
    lab_path = directory / f"{name}_graph_labels.txt"
    offsets = []
    total = 0
    for g in dataset.graphs:
        offsets.append(total)
        total += g.node_count
    with open(a_path, "w", encoding="utf-8") as fh:
        for g, off in zip(dataset.graphs, offsets):
            for i, j in g.edges:
                fh.write(f"{off + i + 1}, {off + j + 1}\n")
                fh.write(f"{off + j + 1}, {off + i + 1}\n")
    with open(ind_path, "w", encoding="utf-8") as fh:
        for gid, g in enumerate(dataset.graphs, start=1):
            fh.writelines(f"{gid}\n" for _ in range(g.node_count))
    with open(lab_path, "w", encoding="utf-8") as fh:
        for g in dataset.graphs:
            if g.label is None:
                raise DataError("cannot write graph_labels for an unlabeled dataset")
            fh.write(f"{g.label}\n")
    written += [a_path, ind_path, lab_path]

    node_labels = _one_hot_labels(dataset)
    if node_labels is not None:
        nl_path = directory / f"{name}_node_labels.txt"
        with open(nl_path, "w", encoding="utf-8") as fh:
            for per_graph in node_labels:
                fh.writelines(f"{lab}\n" for lab in per_graph)
        written.append(nl_path)
    else:
        log.warning("features are not fully-used one-hot; omitting %s_node_labels.txt", name)
    return written


# ---------------------------------------------------------------------------
# synthetic two-class benchmark
# ---------------------------------------------------------------------------

def synth_two_class(n_per_class: int, seed: int) -> GraphDataset:
    """Deterministic two-class dataset: sparse vs dense Erdos-Renyi-style graphs.

    Class 0 draws edges with probability 0.1, class 1 with 0.5; sizes are
    uniform on [10, 20]. Features are degree one-hot over the dataset-wide
    maximum degree, matching what a TUDataset round trip reconstructs.
    """
    if n_per_class < 1:
        raise DataError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5947]))
    graphs = []
    for label, edge_prob in ((0, 0.1), (1, 0.5)):
        for _ in range(n_per_class):
            n = int(rng.integers(10, 21))
            edges = []
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < edge_prob:
                        edges.append((i, j))
            graphs.append(Graph(n, tuple(edges), np.zeros((n, 1)), label))
    return _with_dataset_degree_features(graphs, labels_present=True)
