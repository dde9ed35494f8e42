"""The gcoco command surface, driven in-process through main()."""

import json

import numpy as np
import pytest

from graphcoco import load_checkpoint, load_tudataset
from graphcoco.cli import main


FAST = [
    "--synth-n", "4",
    "--synth-seed", "0",
    "--epochs", "2",
    "--batch-size", "4",
    "--depth", "2",
    "--hidden-dim", "4",
    "--seed", "0",
]


def read_rows(path):
    lines = path.read_text().strip().split("\n")
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------

def test_gen_data_writes_a_loadable_dataset(tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["gen-data", "--n", "3", "--seed", "7", "--out", str(out)]) == 0
    printed = capsys.readouterr().out.strip().split("\n")
    assert len(printed) == 4
    names = {p.rsplit("/", 1)[-1] for p in printed}
    assert names == {
        "synth_A.txt",
        "synth_graph_indicator.txt",
        "synth_graph_labels.txt",
        "synth_node_labels.txt",
    }
    ds = load_tudataset(out, "synth")
    assert len(ds) == 6
    assert sorted(set(ds.labels().tolist())) == [0, 1]


def test_gen_data_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["gen-data", "--n", "3", "--seed", "5", "--out", str(a)])
    main(["gen-data", "--n", "3", "--seed", "5", "--out", str(b)])
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_gen_data_rejects_bad_counts(tmp_path, capsys):
    assert main(["gen-data", "--n", "0", "--out", str(tmp_path)]) == 2
    assert "--n" in capsys.readouterr().err
    assert main(["gen-data", "--n", "2", "--seed", "-1", "--out", str(tmp_path)]) == 2


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_checkpoint_and_history(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", *FAST, "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "checkpoint.gcoco" in printed and "history.csv" in printed
    header, rows = read_rows(out / "history.csv")
    assert header == ["epoch", "loss"]
    assert [r[0] for r in rows] == ["0", "1"]
    ckpt = load_checkpoint(out / "checkpoint.gcoco")
    assert ckpt.epoch == 2
    assert ckpt.config.hidden_dim == 4


def test_train_is_deterministic_across_invocations(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["train", *FAST, "--out", str(a)])
    main(["train", *FAST, "--out", str(b)])
    assert (a / "checkpoint.gcoco").read_bytes() == (b / "checkpoint.gcoco").read_bytes()
    assert (a / "history.csv").read_bytes() == (b / "history.csv").read_bytes()


def test_train_flags_override_config_file(tmp_path):
    cfg = {
        "dataset": {"synthetic": {"n_per_class": 4, "seed": 0}},
        "train": {"epochs": 5, "batch_size": 4, "depth": 2, "hidden_dim": 4},
        "output_dir": str(tmp_path / "cfg_out"),
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(cfg_path), "--epochs", "1"]) == 0
    _, rows = read_rows(tmp_path / "cfg_out" / "history.csv")
    assert len(rows) == 1  # the flag, not the file, set the epoch count


def test_train_rejects_out_of_range_delta(tmp_path, capsys):
    assert main(["train", *FAST, "--out", str(tmp_path), "--delta", "1.5"]) == 2
    assert "delta" in capsys.readouterr().err


def test_train_requires_a_dataset(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path), "--epochs", "1"]) == 2
    assert "dataset" in capsys.readouterr().err


def test_data_path_without_name_is_rejected(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path), "--out", str(tmp_path)]) == 2
    assert "name" in capsys.readouterr().err


def test_erase_none_and_delta_one_histories_match(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["train", *FAST, "--out", str(a), "--erase-mode", "none"])
    main(["train", *FAST, "--out", str(b), "--delta", "1.0"])
    assert (a / "history.csv").read_bytes() == (b / "history.csv").read_bytes()


def test_unknown_config_key_names_its_path(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"train": {"bogus": 3}}))
    assert main(["train", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2
    assert "train.bogus" in capsys.readouterr().err


def test_config_file_must_be_json(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text("{nope")
    assert main(["train", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2
    assert "JSON" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@pytest.fixture()
def trained_run(tmp_path):
    out = tmp_path / "run"
    args = [
        "--synth-n", "5",
        "--synth-seed", "0",
        "--epochs", "2",
        "--batch-size", "5",
        "--depth", "2",
        "--hidden-dim", "4",
        "--seed", "0",
    ]
    assert main(["train", *args, "--out", str(out)]) == 0
    return out, args


def test_eval_writes_probe_and_diagnostics(tmp_path, trained_run, capsys):
    out, args = trained_run
    eval_out = tmp_path / "eval"
    code = main(
        [
            "eval",
            "--checkpoint", str(out / "checkpoint.gcoco"),
            "--synth-n", "5",
            "--synth-seed", "0",
            "--out", str(eval_out),
            "--folds", "5",
        ]
    )
    assert code == 0
    header, rows = read_rows(eval_out / "probe.csv")
    assert header == ["fold", "accuracy"]
    assert len(rows) == 6
    assert rows[-1][0] == "mean"
    fold_accs = [float(r[1]) for r in rows[:-1]]
    assert abs(float(rows[-1][1]) - np.mean(fold_accs)) < 1e-15
    header, rows = read_rows(eval_out / "diagnostics.csv")
    assert header == ["pair_id", "overlap"]
    assert len(rows) == 10
    assert all(0.0 <= float(r[1]) <= 1.0 for r in rows)


def test_eval_is_deterministic(tmp_path, trained_run):
    out, _ = trained_run
    runs = []
    for sub in ("e1", "e2"):
        eval_out = tmp_path / sub
        main(
            [
                "eval",
                "--checkpoint", str(out / "checkpoint.gcoco"),
                "--synth-n", "5",
                "--synth-seed", "0",
                "--out", str(eval_out),
                "--folds", "5",
            ]
        )
        runs.append(
            (eval_out / "probe.csv").read_bytes()
            + (eval_out / "diagnostics.csv").read_bytes()
        )
    assert runs[0] == runs[1]


def test_eval_rejects_corrupt_checkpoint(tmp_path, capsys):
    bad = tmp_path / "bad.gcoco"
    bad.write_bytes(b"JUNKJUNKJUNK")
    code = main(
        ["eval", "--checkpoint", str(bad), "--synth-n", "5", "--out", str(tmp_path)]
    )
    assert code == 3


# ---------------------------------------------------------------------------
# ablate and sweep
# ---------------------------------------------------------------------------

def test_ablate_covers_every_erase_mode(tmp_path):
    out = tmp_path / "ablate"
    args = [
        "--synth-n", "4",
        "--synth-seed", "0",
        "--epochs", "1",
        "--batch-size", "4",
        "--depth", "2",
        "--hidden-dim", "4",
        "--seed", "0",
        "--folds", "4",
    ]
    assert main(["ablate", *args, "--out", str(out)]) == 0
    header, rows = read_rows(out / "ablate.csv")
    assert header == ["erase_mode", "mean_acc", "std_acc", "mask_zeros", "source_mask_zeros"]
    assert [r[0] for r in rows] == ["standard", "none", "rand", "non_min", "bi"]
    by_mode = {r[0]: r for r in rows}
    assert by_mode["standard"][3] == by_mode["standard"][4]
    assert by_mode["rand"][3] == by_mode["rand"][4]
    assert by_mode["none"][3] == "0"
    assert int(by_mode["none"][4]) > 0


def test_sweep_runs_each_value_once(tmp_path, caplog):
    out = tmp_path / "sweep"
    args = [
        "--axis", "delta",
        "--values", "0.3,0.7,0.3",
        "--synth-n", "4",
        "--synth-seed", "0",
        "--epochs", "1",
        "--batch-size", "4",
        "--depth", "2",
        "--hidden-dim", "4",
        "--seed", "0",
        "--folds", "4",
    ]
    with caplog.at_level("WARNING", logger="graphcoco.cli"):
        assert main(["sweep", *args, "--out", str(out)]) == 0
    assert "duplicate sweep value" in caplog.text
    header, rows = read_rows(out / "sweep.csv")
    assert header == ["value", "mean_acc", "std_acc"]
    assert [float(r[0]) for r in rows] == [0.3, 0.7]


def test_sweep_validates_axis_domain(tmp_path, capsys):
    base = ["--synth-n", "2", "--epochs", "1", "--out", str(tmp_path)]
    assert main(["sweep", "--axis", "delta", "--values", "0.5,1.5", *base]) == 2
    assert main(["sweep", "--axis", "aug_ratio", "--values", "1.0", *base]) == 2
    assert main(["sweep", "--axis", "delta", "--values", "a,b", *base]) == 2
    assert main(["sweep", "--axis", "delta", "--values", ",", *base]) == 2


def test_sweep_thread_budget_from_environment(tmp_path, monkeypatch, capsys):
    args = [
        "--axis", "delta",
        "--values", "0.4,0.8",
        "--synth-n", "4",
        "--synth-seed", "0",
        "--epochs", "1",
        "--batch-size", "4",
        "--depth", "2",
        "--hidden-dim", "4",
        "--seed", "0",
        "--folds", "4",
    ]
    monkeypatch.setenv("GCOCO_THREADS", "2")
    out = tmp_path / "threaded"
    assert main(["sweep", *args, "--out", str(out)]) == 0
    _, rows = read_rows(out / "sweep.csv")
    assert [float(r[0]) for r in rows] == [0.4, 0.8]

    monkeypatch.setenv("GCOCO_THREADS", "zero")
    assert main(["sweep", *args, "--out", str(tmp_path / "x")]) == 2
    monkeypatch.setenv("GCOCO_THREADS", "0")
    assert main(["sweep", *args, "--out", str(tmp_path / "y")]) == 2


def test_threaded_sweep_matches_serial(tmp_path, monkeypatch):
    args = [
        "--axis", "delta",
        "--values", "0.4,0.8",
        "--synth-n", "4",
        "--synth-seed", "0",
        "--epochs", "1",
        "--batch-size", "4",
        "--depth", "2",
        "--hidden-dim", "4",
        "--seed", "0",
        "--folds", "4",
    ]
    monkeypatch.setenv("GCOCO_THREADS", "1")
    main(["sweep", *args, "--out", str(tmp_path / "serial")])
    monkeypatch.setenv("GCOCO_THREADS", "2")
    main(["sweep", *args, "--out", str(tmp_path / "parallel")])
    assert (tmp_path / "serial" / "sweep.csv").read_bytes() == (
        tmp_path / "parallel" / "sweep.csv"
    ).read_bytes()


def test_unknown_erase_mode_flag_is_an_argparse_error(tmp_path):
    with pytest.raises(SystemExit):
        main(["train", "--erase-mode", "sideways", "--out", str(tmp_path)])


def test_missing_subcommand_is_an_argparse_error():
    with pytest.raises(SystemExit):
        main([])
