"""Input-validation helpers shared by the estimator facade."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .graphdata import Graph, GraphDataset


def as_dataset(data) -> GraphDataset:
    """Accept a GraphDataset or any sequence of Graph objects."""
    if isinstance(data, GraphDataset):
        return data
    if isinstance(data, Graph):
        raise DataError("expected a dataset or sequence of graphs, got a single Graph")
    try:
        graphs = list(data)
    except TypeError:
        raise DataError(f"cannot interpret {type(data).__name__} as a graph dataset") from None
    if not graphs or not all(isinstance(g, Graph) for g in graphs):
        raise DataError("expected a non-empty sequence of Graph objects")
    dims = {g.feature_dim for g in graphs}
    if len(dims) != 1:
        raise DataError(f"graphs disagree on feature dim: {sorted(dims)}")
    labels = [g.label for g in graphs if g.label is not None]
    num_classes = (max(labels) + 1) if labels else None
    return GraphDataset(tuple(graphs), dims.pop(), num_classes)


def check_positive_int(name: str, value) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_unit_interval(name: str, value, open_right: bool = False) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a real number, got {value!r}") from None
    hi_ok = value < 1.0 if open_right else value <= 1.0
    if not (0.0 <= value and hi_ok):
        bracket = "[0, 1)" if open_right else "[0, 1]"
        raise ConfigError(f"{name} must lie in {bracket}, got {value}")
    return value
