"""Graph isomorphism network encoder, sum-pooled readout, projection head.

Each message-passing layer computes ``MLP((A + I) h)`` where the MLP is
Linear -> ReLU -> Linear with no trailing activation. The readout stacks the
per-layer column sums into a (depth, hidden) matrix; the projection head
flattens that matrix and passes it through a two-layer ReLU MLP of the same
output width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ShapeError
from .graphdata import Graph
from .ndiff import Tape, Tensor, add, concat_rows, matmul, relu, reshape, row_sum, tensor


@dataclass
class GinLayer:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor


@dataclass
class GinEncoder:
    layers: list[GinLayer]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def feature_dim(self) -> int:
        return self.layers[0].w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.layers[0].w1.shape[1]

    def params(self) -> dict[str, Tensor]:
        out = {}
        for idx, layer in enumerate(self.layers):
            out[f"gin{idx}_w1"] = layer.w1
            out[f"gin{idx}_b1"] = layer.b1
            out[f"gin{idx}_w2"] = layer.w2
            out[f"gin{idx}_b2"] = layer.b2
        return out

    def load_params(self, values: Mapping[str, Tensor]) -> None:
        for idx, layer in enumerate(self.layers):
            for slot in ("w1", "b1", "w2", "b2"):
                name = f"gin{idx}_{slot}"
                if name not in values:
                    raise ShapeError(f"missing parameter {name}")
                new = values[name]
                if new.shape != getattr(layer, slot).shape:
                    raise ShapeError(
                        f"parameter {name} has shape {new.shape}, expected {getattr(layer, slot).shape}"
                    )
                setattr(layer, slot, new)


@dataclass
class ProjectionHead:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def params(self) -> dict[str, Tensor]:
        return {"head_w1": self.w1, "head_b1": self.b1, "head_w2": self.w2, "head_b2": self.b2}

    def load_params(self, values: Mapping[str, Tensor]) -> None:
        for slot in ("w1", "b1", "w2", "b2"):
            name = f"head_{slot}"
            if name not in values:
                raise ShapeError(f"missing parameter {name}")
            new = values[name]
            if new.shape != getattr(self, slot).shape:
                raise ShapeError(
                    f"parameter {name} has shape {new.shape}, expected {getattr(self, slot).shape}"
                )
            setattr(self, slot, new)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)))


def init_encoder(feature_dim: int, hidden_dim: int, depth: int, rng: np.random.Generator) -> GinEncoder:
    if feature_dim < 1 or hidden_dim < 1 or depth < 1:
        raise ShapeError(
            f"encoder dims must be positive, got feature_dim={feature_dim} hidden_dim={hidden_dim} depth={depth}"
        )
    layers = []
    in_dim = feature_dim
    for _ in range(depth):
        layers.append(
            GinLayer(
                w1=_glorot(rng, in_dim, hidden_dim),
                b1=tensor(np.zeros((1, hidden_dim))),
                w2=_glorot(rng, hidden_dim, hidden_dim),
                b2=tensor(np.zeros((1, hidden_dim))),
            )
        )
        in_dim = hidden_dim
    return GinEncoder(layers)


def init_head(in_dim: int, rng: np.random.Generator) -> ProjectionHead:
    if in_dim < 1:
        raise ShapeError(f"projection width must be positive, got {in_dim}")
    return ProjectionHead(
        w1=_glorot(rng, in_dim, in_dim),
        b1=tensor(np.zeros((1, in_dim))),
        w2=_glorot(rng, in_dim, in_dim),
        b2=tensor(np.zeros((1, in_dim))),
    )


def gin_forward(tape: Tape | None, encoder: GinEncoder, graph: Graph) -> list[Tensor]:
    """Run message passing; returns the node-embedding matrix after each layer."""
    if graph.feature_dim != encoder.feature_dim:
        raise ShapeError(
            f"graph feature dim {graph.feature_dim} does not match encoder input {encoder.feature_dim}"
        )
    n = graph.node_count
    a_hat = tensor(graph.adjacency() + np.eye(n))
    ones_col = tensor(np.ones((n, 1)))
    h = tensor(graph.features)
    per_layer = []
    for layer in encoder.layers:
        agg = matmul(tape, a_hat, h)
        # bias rows replicated through a rank-one product, keeping ops 2-D
        pre = add(tape, matmul(tape, agg, layer.w1), matmul(tape, ones_col, layer.b1))
        act = relu(tape, pre)
        h = add(tape, matmul(tape, act, layer.w2), matmul(tape, ones_col, layer.b2))
        per_layer.append(h)
    return per_layer


def readout(tape: Tape | None, per_layer: list[Tensor]) -> Tensor:
    """Stack per-layer sum pools into a (depth, hidden) matrix."""
    if not per_layer:
        raise ShapeError("readout needs at least one layer output")
    return concat_rows(tape, [row_sum(tape, h) for h in per_layer])


def project(tape: Tape | None, head: ProjectionHead, pooled: Tensor) -> Tensor:
    """Flatten the readout matrix and map it through the projection MLP."""
    flat = reshape(tape, pooled, (1, pooled.shape[0] * pooled.shape[1]))
    if flat.shape[1] != head.in_dim:
        raise ShapeError(f"readout width {flat.shape[1]} does not match head input {head.in_dim}")
    hidden = relu(tape, add(tape, matmul(tape, flat, head.w1), head.b1))
    return add(tape, matmul(tape, hidden, head.w2), head.b2)


def embed_graph(tape: Tape | None, encoder: GinEncoder, head: ProjectionHead, graph: Graph) -> tuple[Tensor, Tensor]:
    """Convenience wrapper returning (readout, projection) for one graph."""
    pooled = readout(tape, gin_forward(tape, encoder, graph))
    return pooled, project(tape, head, pooled)
