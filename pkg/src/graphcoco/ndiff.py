"""Dense float64 tensors with reverse-mode differentiation.

Every primitive the encoder and the contrastive loss need is defined here,
each one appending a record to an explicit :class:`Tape`. ``backward`` walks
the tape in reverse and returns exact gradients for every watched parameter;
``finite_diff`` is the independent central-difference oracle used to verify
them.

Conventions fixed for determinism:
  * relu'(0) = 0
  * the gradient of a zero row in ``l2_norm_rows`` is 0
  * masks passed to ``hadamard_const`` are constants, never differentiated
  * no broadcasting except scalar-times-tensor (``scale``)
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import NumericError, ShapeError

_UIDS = itertools.count(1)


class Tensor:
    """Immutable dense value: a float64 array plus an identity on tapes."""

    __slots__ = ("data", "uid")

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64)
        arr = arr.copy() if arr.base is not None or arr.flags.writeable else arr
        arr.setflags(write=False)
        self.data = arr
        self.uid = next(_UIDS)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, uid={self.uid})"


def tensor(values) -> Tensor:
    """Wrap ``values`` as a constant tensor (verified finite)."""
    t = Tensor(values)
    if not np.all(np.isfinite(t.data)):
        raise NumericError("tensor() given non-finite entries")
    return t


class _Node:
    __slots__ = ("op", "out_uid", "inputs", "aux")

    def __init__(self, op: str, out_uid: int, inputs: tuple[Tensor, ...], aux):
        self.op = op
        self.out_uid = out_uid
        self.inputs = inputs
        self.aux = aux


class Tape:
    """Ordered record of primitive applications plus a parameter registry.

    One tape is built per training step and owned by a single thread.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._params: dict[str, Tensor] = {}
        self._known: set[int] = set()

    def watch(self, name: str, param: Tensor) -> Tensor:
        """Register ``param`` so ``backward`` reports its gradient."""
        existing = self._params.get(name)
        if existing is not None and existing.uid != param.uid:
            raise ShapeError(f"parameter {name!r} watched twice with different tensors")
        self._params[name] = param
        self._known.add(param.uid)
        return param

    @property
    def params(self) -> dict[str, Tensor]:
        return dict(self._params)

    def __len__(self) -> int:
        return len(self._nodes)

    def _record(self, op: str, out: np.ndarray, inputs: tuple[Tensor, ...], aux=None) -> Tensor:
        if not np.all(np.isfinite(out)):
            raise NumericError(f"{op} produced a non-finite result")
        result = Tensor(out)
        self._nodes.append(_Node(op, result.uid, inputs, aux))
        self._known.update(t.uid for t in inputs)
        self._known.add(result.uid)
        return result


def _emit(tape: Tape | None, op: str, out: np.ndarray, inputs: tuple[Tensor, ...], aux=None) -> Tensor:
    if tape is None:
        if not np.all(np.isfinite(out)):
            raise NumericError(f"{op} produced a non-finite result")
        return Tensor(out)
    return tape._record(op, out, inputs, aux)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul needs (n,k)@(k,m), got {a.shape} @ {b.shape}")
    return _emit(tape, "matmul", a.data @ b.data, (a, b))


def add(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add needs equal shapes, got {a.shape} + {b.shape}")
    return _emit(tape, "add", a.data + b.data, (a, b))


def scale(tape: Tape | None, x: Tensor, factor: float) -> Tensor:
    return _emit(tape, "scale", x.data * float(factor), (x,), aux=float(factor))


def relu(tape: Tape | None, x: Tensor) -> Tensor:
    return _emit(tape, "relu", np.maximum(x.data, 0.0), (x,))


def row_sum(tape: Tape | None, x: Tensor) -> Tensor:
    """Sum the rows of a matrix into a single row of column totals."""
    if x.ndim != 2:
        raise ShapeError(f"row_sum needs a matrix, got shape {x.shape}")
    return _emit(tape, "row_sum", x.data.sum(axis=0, keepdims=True), (x,))


def concat_rows(tape: Tape | None, parts: Sequence[Tensor]) -> Tensor:
    parts = tuple(parts)
    if not parts:
        raise ShapeError("concat_rows needs at least one input")
    cols = {p.shape[1] if p.ndim == 2 else None for p in parts}
    if None in cols or len(cols) != 1:
        raise ShapeError(f"concat_rows needs matrices with equal columns, got {[p.shape for p in parts]}")
    out = np.concatenate([p.data for p in parts], axis=0)
    return _emit(tape, "concat_rows", out, parts, aux=tuple(p.shape[0] for p in parts))


def stack_scalars(tape: Tape | None, parts: Sequence[Tensor]) -> Tensor:
    parts = tuple(parts)
    if not parts or any(p.shape != () for p in parts):
        raise ShapeError("stack_scalars needs one or more scalar inputs")
    out = np.array([p.data.reshape(()) for p in parts], dtype=np.float64)
    return _emit(tape, "stack_scalars", out, parts)


def reshape(tape: Tape | None, x: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape, dtype=np.int64)) != x.data.size:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}")
    return _emit(tape, "reshape", x.data.reshape(shape), (x,), aux=x.shape)


def hadamard_const(tape: Tape | None, x: Tensor, mask: np.ndarray) -> Tensor:
    """Elementwise product with a constant mask; no gradient flows into the mask."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.shape:
        raise ShapeError(f"hadamard_const needs equal shapes, got {x.shape} * {mask.shape}")
    return _emit(tape, "hadamard_const", x.data * mask, (x,), aux=mask)


def sum_all(tape: Tape | None, x: Tensor) -> Tensor:
    return _emit(tape, "sum_all", np.asarray(x.data.sum()), (x,))


def log(tape: Tape | None, x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise NumericError("log needs strictly positive inputs")
    return _emit(tape, "log", np.log(x.data), (x,))


def exp(tape: Tape | None, x: Tensor) -> Tensor:
    return _emit(tape, "exp", np.exp(x.data), (x,))


def l2_norm_rows(tape: Tape | None, x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"l2_norm_rows needs a matrix, got shape {x.shape}")
    norms = np.sqrt((x.data ** 2).sum(axis=1, keepdims=True))
    return _emit(tape, "l2_norm_rows", norms, (x,), aux=norms)


def cosine_sim(tape: Tape | None, u: Tensor, v: Tensor) -> Tensor:
    if u.shape != v.shape:
        raise ShapeError(f"cosine_sim needs equal shapes, got {u.shape} vs {v.shape}")
    uf, vf = u.data.reshape(-1), v.data.reshape(-1)
    nu, nv = np.linalg.norm(uf), np.linalg.norm(vf)
    if nu == 0.0 or nv == 0.0:
        raise NumericError("cosine_sim of a zero-norm vector is undefined")
    value = float(uf @ vf) / (nu * nv)
    return _emit(tape, "cosine_sim", np.asarray(value), (u, v), aux=(nu, nv, value))


def log_sum_exp(tape: Tape | None, x: Tensor) -> Tensor:
    """Stable log(sum(exp(x))) of a vector, shift-by-max form."""
    if x.ndim != 1 or x.data.size == 0:
        raise ShapeError(f"log_sum_exp needs a non-empty vector, got shape {x.shape}")
    m = float(x.data.max())
    shifted = np.exp(x.data - m)
    value = m + np.log(shifted.sum())
    return _emit(tape, "log_sum_exp", np.asarray(value), (x,), aux=shifted / shifted.sum())


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------

def _vjp(node: _Node, g: np.ndarray) -> tuple[np.ndarray, ...]:
    op, inputs, aux = node.op, node.inputs, node.aux
    if op == "matmul":
        a, b = inputs
        return g @ b.data.T, a.data.T @ g
    if op == "add":
        return g, g
    if op == "scale":
        return (g * aux,)
    if op == "relu":
        return (g * (inputs[0].data > 0.0),)
    if op == "row_sum":
        n = inputs[0].shape[0]
        return (np.broadcast_to(g, (n,) + g.shape[1:]).copy(),)
    if op == "concat_rows":
        splits = np.cumsum(aux)[:-1]
        return tuple(np.ascontiguousarray(part) for part in np.split(g, splits, axis=0))
    if op == "stack_scalars":
        return tuple(np.asarray(g[i]) for i in range(len(inputs)))
    if op == "reshape":
        return (g.reshape(aux),)
    if op == "hadamard_const":
        return (g * aux,)
    if op == "sum_all":
        return (np.full(inputs[0].shape, float(g)),)
    if op == "log":
        return (g / inputs[0].data,)
    if op == "exp":
        return (g * np.exp(inputs[0].data),)
    if op == "l2_norm_rows":
        x, norms = inputs[0].data, aux
        safe = np.where(norms > 0.0, norms, 1.0)
        return (np.where(norms > 0.0, g, 0.0) * x / safe,)
    if op == "cosine_sim":
        u, v = inputs
        nu, nv, value = aux
        uf, vf = u.data.reshape(-1), v.data.reshape(-1)
        gu = float(g) * (vf / (nu * nv) - value * uf / nu**2)
        gv = float(g) * (uf / (nu * nv) - value * vf / nv**2)
        return gu.reshape(u.shape), gv.reshape(v.shape)
    if op == "log_sum_exp":
        return (float(g) * aux,)
    raise AssertionError(f"unknown op {op!r}")


def backward(tape: Tape, loss: Tensor) -> dict[str, Tensor]:
    """Reverse-mode gradients of a recorded scalar w.r.t. every watched parameter.

    Parameters that do not participate in the loss get zero tensors.
    """
    if loss.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.uid not in {n.out_uid for n in tape._nodes}:
        raise ShapeError("loss tensor was not produced on this tape")

    grads: dict[int, np.ndarray] = {loss.uid: np.asarray(1.0)}
    for node in reversed(tape._nodes):
        g = grads.pop(node.out_uid, None)
        if g is None:
            continue
        for inp, piece in zip(node.inputs, _vjp(node, g)):
            acc = grads.get(inp.uid)
            grads[inp.uid] = piece if acc is None else acc + piece

    out: dict[str, Tensor] = {}
    for name, param in tape._params.items():
        g = grads.get(param.uid)
        out[name] = Tensor(np.zeros(param.shape) if g is None else g)
    return out


def finite_diff(
    f: Callable[[Mapping[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-6,
) -> dict[str, Tensor]:
    """Central-difference gradient estimate of a scalar function of named arrays."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    out: dict[str, Tensor] = {}
    for name, value in base.items():
        grad = np.zeros_like(value)
        flat_v, flat_g = value.reshape(-1), grad.reshape(-1)
        for i in range(flat_v.size):
            orig = flat_v[i]
            flat_v[i] = orig + eps
            hi = f(base)
            flat_v[i] = orig - eps
            lo = f(base)
            flat_v[i] = orig
            flat_g[i] = (hi - lo) / (2.0 * eps)
        out[name] = Tensor(grad)
    return out
