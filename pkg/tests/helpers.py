"""Shared test utilities."""

import numpy as np

from graphcoco import Graph


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative error with a floor of 1 to tolerate zero gradients."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    denom = max(1.0, float(np.abs(a).max(initial=0.0)), float(np.abs(f).max(initial=0.0)))
    return float(np.abs(a - f).max(initial=0.0)) / denom


def triangle_graph(label=0) -> Graph:
    feats = np.eye(3)
    return Graph(3, ((0, 1), (1, 2), (0, 2)), feats, label)


def path_graph(n: int, feature_dim: int = 2, label=0) -> Graph:
    rng = np.random.default_rng(n)
    feats = rng.normal(size=(n, feature_dim))
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)), feats, label)


def write_tu_fixture(directory):
    """Two graphs: a triangle and a single edge, labels 1 and 2, node labels."""
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "fix_A.txt").write_text(
        "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n"
    )
    (directory / "fix_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n")
    (directory / "fix_graph_labels.txt").write_text("1\n2\n")
    (directory / "fix_node_labels.txt").write_text("0\n0\n1\n1\n0\n")
    return directory
