"""Command-line surface: data generation, training, evaluation, ablation, sweeps.

Configuration comes from an optional JSON file plus flag overrides (flags win).
Every command is deterministic given (config, seed). Exit codes: 0 success,
2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .augment import AugmentSpec
from .errors import ConfigError, DataError, NumericError
from .evaluation import embed_all, linear_probe_cv, positive_pair_overlap
from .graphdata import GraphDataset, load_tudataset, save_tudataset, synth_two_class
from .trainer import EraseMode, TrainConfig, load_checkpoint, save_checkpoint, train

log = logging.getLogger(__name__)

_TRAIN_KEYS = {
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "delta": float,
    "tau": float,
    "depth": int,
    "hidden_dim": int,
    "erase_mode": str,
    "seed": int,
    "aug1": {"kind": str, "p": float},
    "aug2": {"kind": str, "p": float},
}

_SCHEMA = {
    "dataset": {"path": str, "name": str, "synthetic": {"n_per_class": int, "seed": int}},
    "train": _TRAIN_KEYS,
    "eval": {"folds": int, "top_k": int, "embed": str, "seed": int},
    "output_dir": str,
}


def _validate_keys(raw: dict, schema: dict, prefix: str = "") -> None:
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown config key {path!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be an object")
            _validate_keys(value, expected, prefix=f"{path}.")


def load_config_file(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    _validate_keys(raw, _SCHEMA)
    return raw


_OVERRIDES = (
    ("epochs", ("train", "epochs")),
    ("batch_size", ("train", "batch_size")),
    ("lr", ("train", "lr")),
    ("delta", ("train", "delta")),
    ("tau", ("train", "tau")),
    ("depth", ("train", "depth")),
    ("hidden_dim", ("train", "hidden_dim")),
    ("erase_mode", ("train", "erase_mode")),
    ("seed", ("train", "seed")),
    ("folds", ("eval", "folds")),
    ("top_k", ("eval", "top_k")),
    ("embed", ("eval", "embed")),
    ("eval_seed", ("eval", "seed")),
    ("out", ("output_dir",)),
    ("data", ("dataset", "path")),
    ("name", ("dataset", "name")),
    ("synth_n", ("dataset", "synthetic", "n_per_class")),
    ("synth_seed", ("dataset", "synthetic", "seed")),
)


def merge_config(args: argparse.Namespace) -> dict:
    cfg = load_config_file(args.config) if getattr(args, "config", None) else {}
    for flag, path in _OVERRIDES:
        value = getattr(args, flag, None)
        if value is None:
            continue
        node = cfg
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    return cfg


def train_config_of(cfg: dict) -> TrainConfig:
    section = dict(cfg.get("train", {}))
    try:
        return TrainConfig.from_dict(section)
    except (TypeError, ValueError, KeyError) as err:
        raise ConfigError(f"bad train config: {err}") from None


def resolve_dataset(cfg: dict) -> GraphDataset:
    section = cfg.get("dataset", {})
    synthetic = section.get("synthetic")
    path, name = section.get("path"), section.get("name")
    if synthetic is not None and path is None:
        n = synthetic.get("n_per_class")
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"dataset.synthetic.n_per_class must be a positive integer, got {n!r}")
        return synth_two_class(n, int(synthetic.get("seed", 0)))
    if path is not None:
        if name is None:
            raise ConfigError("dataset.name is required together with dataset.path")
        return load_tudataset(path, name)
    raise ConfigError("config names no dataset: give dataset.path+name or dataset.synthetic")


def output_dir_of(cfg: dict) -> Path:
    out = cfg.get("output_dir")
    if not out:
        raise ConfigError("output_dir is required (flag --out or config key)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _thread_budget() -> int:
    raw = os.environ.get("GCOCO_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"GCOCO_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"GCOCO_THREADS must be >= 1, got {threads}")
    return threads


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_data(args: argparse.Namespace) -> int:
    if args.n < 1:
        raise ConfigError(f"--n must be a positive integer, got {args.n}")
    if args.seed < 0:
        raise ConfigError(f"--seed must be non-negative, got {args.seed}")
    dataset = synth_two_class(args.n, args.seed)
    written = save_tudataset(dataset, args.out, args.name)
    for path in written:
        print(path)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = merge_config(args)
    train_cfg = train_config_of(cfg)
    dataset = resolve_dataset(cfg)
    out = output_dir_of(cfg)
    ckpt, history = train(
        dataset, train_cfg, progress=lambda e, l: log.info("epoch %d mean loss %.6f", e, l)
    )
    save_checkpoint(ckpt, out / "checkpoint.gcoco")
    write_csv(out / "history.csv", ["epoch", "loss"], [(i, v) for i, v in enumerate(history)])
    print(out / "checkpoint.gcoco")
    print(out / "history.csv")
    return 0


def _eval_settings(cfg: dict, width: int) -> tuple[int, int, str, int]:
    section = cfg.get("eval", {})
    folds = int(section.get("folds", 10))
    top_k = section.get("top_k")
    top_k = max(1, width // 8) if top_k is None else int(top_k)
    embed = str(section.get("embed", "anchor"))
    seed = int(section.get("seed", 0))
    if embed not in ("anchor", "concat"):
        raise ConfigError(f"eval.embed must be 'anchor' or 'concat', got {embed!r}")
    return folds, top_k, embed, seed


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = merge_config(args)
    ckpt = load_checkpoint(args.checkpoint)
    dataset = resolve_dataset(cfg)
    out = output_dir_of(cfg)
    width = ckpt.config.depth * ckpt.config.hidden_dim
    folds, top_k, embed, seed = _eval_settings(cfg, width)

    table = embed_all(dataset, ckpt, mode=embed)
    report = linear_probe_cv(table, folds=folds, seed=seed)
    probe_rows = [(i, a) for i, a in enumerate(report.fold_accuracies)]
    probe_rows.append(("mean", report.mean))
    write_csv(out / "probe.csv", ["fold", "accuracy"], probe_rows)

    _, overlaps = positive_pair_overlap(dataset, ckpt, top_k=top_k, seed=seed)
    write_csv(out / "diagnostics.csv", ["pair_id", "overlap"], list(enumerate(overlaps)))
    print(out / "probe.csv")
    print(out / "diagnostics.csv")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = merge_config(args)
    base = train_config_of(cfg)
    dataset = resolve_dataset(cfg)
    out = output_dir_of(cfg)
    folds, _, embed, seed = _eval_settings(cfg, base.depth * base.hidden_dim)

    rows = []
    for mode in EraseMode:
        mode_cfg = dataclasses.replace(base, erase_mode=mode)
        ckpt, _ = train(dataset, mode_cfg)
        report = linear_probe_cv(embed_all(dataset, ckpt, mode=embed), folds=folds, seed=seed)
        rows.append((mode.value, report.mean, report.std, ckpt.mask_zeros, ckpt.source_mask_zeros))
        log.info("erase mode %s: probe mean %.4f", mode.value, report.mean)
    write_csv(
        out / "ablate.csv",
        ["erase_mode", "mean_acc", "std_acc", "mask_zeros", "source_mask_zeros"],
        rows,
    )
    print(out / "ablate.csv")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = merge_config(args)
    base = train_config_of(cfg)
    dataset = resolve_dataset(cfg)
    out = output_dir_of(cfg)
    folds, _, embed, seed = _eval_settings(cfg, base.depth * base.hidden_dim)

    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated reals, got {args.values!r}") from None
    if not values:
        raise ConfigError("--values must name at least one point")
    deduped = []
    for v in values:
        if v in deduped:
            log.warning("duplicate sweep value %s ignored", v)
            continue
        deduped.append(v)
    for v in deduped:
        if args.axis == "delta" and not (0.0 <= v <= 1.0):
            raise ConfigError(f"delta sweep value {v} outside [0, 1]")
        if args.axis == "aug_ratio" and not (0.0 <= v < 1.0):
            raise ConfigError(f"aug_ratio sweep value {v} outside [0, 1)")

    def run_point(v: float) -> tuple[float, float, float]:
        if args.axis == "delta":
            point = dataclasses.replace(base, delta=v)
        else:
            point = dataclasses.replace(
                base,
                aug1=AugmentSpec(base.aug1.kind, v),
                aug2=AugmentSpec(base.aug2.kind, v),
            )
        ckpt, _ = train(dataset, point)
        report = linear_probe_cv(embed_all(dataset, ckpt, mode=embed), folds=folds, seed=seed)
        return v, report.mean, report.std

    threads = _thread_budget()
    if threads == 1:
        results = [run_point(v) for v in deduped]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_point, deduped))
    write_csv(out / "sweep.csv", ["value", "mean_acc", "std_acc"], results)
    print(out / "sweep.csv")
    return 0


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------

def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config file")
    p.add_argument("--data", help="directory holding TUDataset-format files")
    p.add_argument("--name", help="dataset name prefix inside --data")
    p.add_argument("--synth-n", dest="synth_n", type=int, help="per-class size of the synthetic dataset")
    p.add_argument("--synth-seed", dest="synth_seed", type=int, help="seed of the synthetic dataset")
    p.add_argument("--out", help="output directory")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--erase-mode", dest="erase_mode", choices=[m.value for m in EraseMode])
    p.add_argument("--seed", type=int)


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--folds", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--embed", choices=["anchor", "concat"])
    p.add_argument("--eval-seed", dest="eval_seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcoco", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic two-class dataset in TUDataset format")
    p.add_argument("--n", type=int, required=True, help="graphs per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="synth", help="dataset name prefix")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run contrastive training, write checkpoint + history.csv")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="probe a checkpoint, write probe.csv + diagnostics.csv")
    p.add_argument("--checkpoint", required=True)
    _add_dataset_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train every erase mode, write ablate.csv")
    _add_dataset_flags(p)
    _add_train_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="train across one axis of values, write sweep.csv")
    p.add_argument("--axis", choices=["delta", "aug_ratio"], required=True)
    p.add_argument("--values", required=True, help="comma-separated points")
    _add_dataset_flags(p)
    _add_train_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(main())
