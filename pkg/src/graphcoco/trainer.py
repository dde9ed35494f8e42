"""End-to-end contrastive training: batching, views, erase, loss, Adam.

One optimizer step per minibatch. All randomness flows through named streams
derived from (seed, tag, epoch, ...) tuples, so a run is a pure function of
its config and dataset.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .augment import AugmentKind, AugmentPolicy, AugmentSpec, sample_pair
from .cocoloss import BatchViews, LossConfig, build_mask, erase, infonce_batch, minmax_scale
from .encoder import GinEncoder, ProjectionHead, gin_forward, init_encoder, init_head, project, readout
from .errors import CheckpointError, ConfigError, ShapeError
from .graphdata import GraphDataset
from .ndiff import Tape, Tensor, backward, tensor

INIT_TAG = 0x494E4954
SHUFFLE_TAG = 0x53485546
MASK_TAG = 0x4D41534B

CHECKPOINT_MAGIC = b"GCOCO1"


class EraseMode(str, Enum):
    STANDARD = "standard"
    NONE = "none"
    RAND = "rand"
    NON_MIN = "non_min"
    BI = "bi"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 0.01
    delta: float = 0.7
    tau: float = 0.2
    depth: int = 3
    hidden_dim: int = 32
    erase_mode: EraseMode = EraseMode.STANDARD
    seed: int = 0
    aug1: AugmentSpec = field(default_factory=lambda: AugmentSpec(AugmentKind.NODE_DROP, 0.2))
    aug2: AugmentSpec = field(default_factory=lambda: AugmentSpec(AugmentKind.SUBGRAPH, 0.2))

    def __post_init__(self):
        try:
            object.__setattr__(self, "erase_mode", EraseMode(self.erase_mode))
        except ValueError:
            raise ConfigError(
                f"erase_mode must be one of {[m.value for m in EraseMode]}, got {self.erase_mode!r}"
            ) from None
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.depth < 1 or self.hidden_dim < 1:
            raise ConfigError(
                f"depth and hidden_dim must be >= 1, got depth={self.depth} hidden_dim={self.hidden_dim}"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        LossConfig(delta=self.delta, tau=self.tau)

    def policy(self) -> AugmentPolicy:
        return AugmentPolicy(first=self.aug1, second=self.aug2, seed=self.seed)

    def loss_config(self) -> LossConfig:
        return LossConfig(delta=self.delta, tau=self.tau)

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "delta": self.delta,
            "tau": self.tau,
            "depth": self.depth,
            "hidden_dim": self.hidden_dim,
            "erase_mode": self.erase_mode.value,
            "seed": self.seed,
            "aug1": {"kind": self.aug1.kind.value, "p": self.aug1.ratio},
            "aug2": {"kind": self.aug2.kind.value, "p": self.aug2.ratio},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        kwargs = dict(raw)
        try:
            for key in ("aug1", "aug2"):
                if key in kwargs:
                    spec = kwargs[key]
                    kwargs[key] = AugmentSpec(AugmentKind(spec["kind"]), float(spec.get("p", 0.2)))
            if "erase_mode" in kwargs:
                kwargs["erase_mode"] = EraseMode(kwargs["erase_mode"])
            return cls(**kwargs)
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"bad training config: {err}") from None


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def fresh(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls(
            m={k: np.zeros(p.shape) for k, p in params.items()},
            v={k: np.zeros(p.shape) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> dict[str, Tensor]:
    """One bias-corrected Adam update; mutates ``state``, returns new params."""
    state.step += 1
    t = state.step
    out = {}
    for name, p in params.items():
        if name not in grads:
            raise ShapeError(f"missing gradient for parameter {name}")
        g = grads[name].data
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = state.m[name] / (1.0 - beta1**t)
        v_hat = state.v[name] / (1.0 - beta2**t)
        out[name] = tensor(p.data - lr * m_hat / (np.sqrt(v_hat) + eps))
    return out


@dataclass
class Checkpoint:
    """Trained model snapshot; round-trips bit-exactly through save/load."""

    encoder: GinEncoder
    head: ProjectionHead
    config: TrainConfig
    epoch: int
    loss_history: list[float]
    mask_zeros: int = 0
    source_mask_zeros: int = 0

    def params(self) -> dict[str, Tensor]:
        return {**self.encoder.params(), **self.head.params()}


def _mask_rng(seed: int, epoch: int, graph_idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), MASK_TAG, int(epoch), int(graph_idx)]))


def masks_for_mode(
    r1_values: np.ndarray,
    r2_values: np.ndarray,
    cfg: TrainConfig,
    epoch: int,
    graph_idx: int,
) -> tuple[np.ndarray, np.ndarray | None, int]:
    """Mask applied to the second view, optional mask for the first, and the
    zero count the plain thresholding rule would have produced."""
    standard = build_mask(minmax_scale(r1_values), cfg.delta)
    source_zeros = int(standard.size - standard.sum())
    mode = cfg.erase_mode
    if mode is EraseMode.STANDARD:
        return standard, None, source_zeros
    if mode is EraseMode.NONE:
        return np.ones_like(standard), None, source_zeros
    if mode is EraseMode.RAND:
        flat = standard.reshape(-1)
        perm = _mask_rng(cfg.seed, epoch, graph_idx).permutation(flat.size)
        return flat[perm].reshape(standard.shape), None, source_zeros
    if mode is EraseMode.NON_MIN:
        scaled = minmax_scale(r1_values)
        return np.where(scaled < 1.0 - cfg.delta, 0.0, 1.0), None, source_zeros
    if mode is EraseMode.BI:
        reverse = build_mask(minmax_scale(r2_values), cfg.delta)
        source_zeros += int(reverse.size - reverse.sum())
        return standard, reverse, source_zeros
    raise ConfigError(f"unknown erase mode {mode!r}")


def _batch_views(
    tape: Tape,
    dataset: GraphDataset,
    idxs: np.ndarray,
    encoder: GinEncoder,
    head: ProjectionHead,
    cfg: TrainConfig,
    epoch: int,
) -> tuple[BatchViews, int, int]:
    policy = cfg.policy()
    z1, z2_pos, z2_neg, z1_pos = [], [], [], []
    applied_zeros = 0
    source_zeros = 0
    for graph_idx in idxs:
        graph_idx = int(graph_idx)
        v1, v2 = sample_pair(dataset[graph_idx], policy, epoch, graph_idx)
        r1 = readout(tape, gin_forward(tape, encoder, v1))
        r2 = readout(tape, gin_forward(tape, encoder, v2))
        mask2, mask1, src = masks_for_mode(r1.data, r2.data, cfg, epoch, graph_idx)
        source_zeros += src
        applied_zeros += int(mask2.size - mask2.sum())
        z1.append(project(tape, head, r1))
        z2_neg.append(project(tape, head, r2))
        z2_pos.append(project(tape, head, erase(tape, r2, mask2)))
        if mask1 is None:
            z1_pos.append(z1[-1])
        else:
            applied_zeros += int(mask1.size - mask1.sum())
            z1_pos.append(project(tape, head, erase(tape, r1, mask1)))
    return BatchViews(z1=z1, z2_pos=z2_pos, z2_neg=z2_neg, z1_pos=z1_pos), applied_zeros, source_zeros


def train(
    dataset: GraphDataset,
    cfg: TrainConfig,
    progress: Callable[[int, float], None] | None = None,
) -> tuple[Checkpoint, list[float]]:
    """Run the full training loop; returns the checkpoint and per-epoch mean loss."""
    init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, INIT_TAG]))
    encoder = init_encoder(dataset.feature_dim, cfg.hidden_dim, cfg.depth, init_rng)
    head = init_head(cfg.depth * cfg.hidden_dim, init_rng)
    params = {**encoder.params(), **head.params()}
    adam = AdamState.fresh(params)
    loss_cfg = cfg.loss_config()

    history: list[float] = []
    mask_zeros = 0
    source_mask_zeros = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, SHUFFLE_TAG, epoch])
        ).permutation(len(dataset))
        batch_losses = []
        for start in range(0, len(dataset), cfg.batch_size):
            idxs = order[start : start + cfg.batch_size]
            tape = Tape()
            for name, p in params.items():
                tape.watch(name, p)
            views, applied, src = _batch_views(tape, dataset, idxs, encoder, head, cfg, epoch)
            mask_zeros += applied
            source_mask_zeros += src
            loss = infonce_batch(tape, views, loss_cfg)
            grads = backward(tape, loss)
            params = adam_step(params, grads, adam, cfg.lr)
            encoder.load_params(params)
            head.load_params(params)
            batch_losses.append(loss.item())
        mean_loss = float(np.mean(batch_losses))
        history.append(mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)

    ckpt = Checkpoint(
        encoder=encoder,
        head=head,
        config=cfg,
        epoch=cfg.epochs,
        loss_history=history,
        mask_zeros=mask_zeros,
        source_mask_zeros=source_mask_zeros,
    )
    return ckpt, history


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------

def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Binary layout: magic, uint32 little-endian header length, JSON header
    (dims in parameter registration order), raw little-endian float64 values."""
    params = ckpt.params()
    header = {
        "magic": CHECKPOINT_MAGIC.decode("ascii"),
        "depth": ckpt.encoder.depth,
        "hidden_dim": ckpt.encoder.hidden_dim,
        "feature_dim": ckpt.encoder.feature_dim,
        "dims": {name: list(p.shape) for name, p in params.items()},
        "config": ckpt.config.to_dict(),
        "epoch": ckpt.epoch,
        "loss_history": ckpt.loss_history,
        "mask_zeros": ckpt.mask_zeros,
        "source_mask_zeros": ckpt.source_mask_zeros,
    }
    blob = json.dumps(header, sort_keys=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for p in params.values():
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(CHECKPOINT_MAGIC) + 4 or raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    offset = len(CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if len(raw) < offset + header_len:
        raise CheckpointError(f"{path} is truncated inside the header")
    try:
        header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"{path} has an unreadable header: {err}") from None
    offset += header_len

    try:
        dims = {name: tuple(shape) for name, shape in header["dims"].items()}
        config = TrainConfig.from_dict(header["config"])
        epoch = int(header["epoch"])
        loss_history = [float(x) for x in header["loss_history"]]
        mask_zeros = int(header.get("mask_zeros", 0))
        source_mask_zeros = int(header.get("source_mask_zeros", 0))
        feature_dim = int(header["feature_dim"])
    except (KeyError, TypeError, ValueError, ConfigError) as err:
        raise CheckpointError(f"{path} header is malformed: {err}") from None

    expected = sum(int(np.prod(shape, dtype=np.int64)) for shape in dims.values()) * 8
    payload = raw[offset:]
    if len(payload) != expected:
        raise CheckpointError(
            f"{path} parameter payload has {len(payload)} bytes, expected {expected}"
        )

    params = {}
    cursor = 0
    for name, shape in dims.items():
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(payload, dtype="<f8", count=count, offset=cursor).reshape(shape)
        params[name] = tensor(values.copy())
        cursor += count * 8

    dummy = np.random.default_rng(0)
    encoder = init_encoder(feature_dim, config.hidden_dim, config.depth, dummy)
    head = init_head(config.depth * config.hidden_dim, dummy)
    try:
        encoder.load_params(params)
        head.load_params(params)
    except ShapeError as err:
        raise CheckpointError(f"{path} parameters do not fit the declared model: {err}") from None
    return Checkpoint(
        encoder=encoder,
        head=head,
        config=config,
        epoch=epoch,
        loss_history=loss_history,
        mask_zeros=mask_zeros,
        source_mask_zeros=source_mask_zeros,
    )
