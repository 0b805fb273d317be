"""Command-line behavior: happy paths, exit codes, and artifact layout.

Commands run in-process through main(argv) so coverage and tracebacks work.
"""

import json

import numpy as np
import pytest

from newsclf import pipeline
from newsclf.cli import main
from newsclf.textprep import save_dataset

FAST_OVERRIDES = [
    "--override", "vocab.target_size=120",
    "--override", "model.max_len=16",
    "--override", "model.hidden_dim=8",
    "--override", "model.num_layers=1",
    "--override", "model.ff_dim=16",
    "--override", "train.batch_size=16",
    "--override", "train.epochs=4",
    "--override", "train.lr=0.02",
    "--override", "train.rounds=1",
    "--override", "schedule=[[0,4.0],[2,1.0]]",
]


@pytest.fixture
def data_files(tmp_path, micro_examples):
    train_ex, val_ex = micro_examples
    tr = tmp_path / "train.tsv"
    va = tmp_path / "val.tsv"
    save_dataset(train_ex, tr)
    save_dataset(val_ex, va)
    return tr, va


def run_train(tmp_path, tr, va, extra=()):
    outdir = tmp_path / "run"
    rc = main([
        "train",
        "--override", f"data.train={tr}",
        "--override", f"data.validation={va}",
        *FAST_OVERRIDES, *extra,
        "--seed", "1",
        "--outdir", str(outdir),
    ])
    assert rc == 0
    return outdir


def test_preprocess_writes_cleaned_tsv(tmp_path, data_files, capsys):
    tr, _ = data_files
    out = tmp_path / "clean.tsv"
    rc = main(["preprocess", "--input", str(tr), "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "id\ttext\tlabel"
    assert len(lines) == 31
    assert "label counts" in capsys.readouterr().out


def test_preprocess_requires_input(capsys):
    rc = main(["preprocess", "--output", "x.tsv"])
    assert rc == 1
    assert "--input is required" in capsys.readouterr().err


def test_build_vocab_appends_domain_tokens(tmp_path, data_files, capsys):
    tr, _ = data_files
    out = tmp_path / "vocab.txt"
    rc = main(["build-vocab", "--input", str(tr), "--target-size", "120",
               "--output", str(out)])
    assert rc == 0
    assert "domain tokens appended" in capsys.readouterr().out
    text = out.read_text()
    assert "coronavirus\t#ADDED" in text or "coronavirus" in text


def test_build_vocab_no_domain_tokens(tmp_path, data_files):
    tr, _ = data_files
    out = tmp_path / "vocab.txt"
    rc = main(["build-vocab", "--input", str(tr), "--target-size", "120",
               "--no-domain-tokens", "--output", str(out)])
    assert rc == 0
    assert "#ADDED" not in out.read_text()


def test_train_writes_run_directory(tmp_path, data_files, capsys):
    tr, va = data_files
    outdir = run_train(tmp_path, tr, va)
    for name in ("checkpoint.bin", "trainlog.jsonl", "report.json", "predictions.tsv"):
        assert (outdir / name).exists(), name
    out = capsys.readouterr().out
    assert "validation weighted F1" in out


def test_train_then_eval_and_literal_flag(tmp_path, data_files, capsys):
    tr, va = data_files
    outdir = run_train(tmp_path, tr, va)
    capsys.readouterr()

    rc = main(["eval", "--checkpoint", str(outdir / "checkpoint.bin"),
               "--input", str(va), *FAST_OVERRIDES])
    assert rc == 0
    plain = capsys.readouterr().out.splitlines()[-1].split()

    rc = main(["eval", "--checkpoint", str(outdir / "checkpoint.bin"),
               "--input", str(va), "--divide-by-classes", *FAST_OVERRIDES])
    assert rc == 0
    halved = capsys.readouterr().out.splitlines()[-1].split()
    # audit mode divides the weighted sums by the class count (2 here)
    assert float(halved[1]) == pytest.approx(float(plain[1]) / 2, abs=1e-6)
    assert float(halved[2]) == pytest.approx(float(plain[2]) / 2, abs=1e-6)


def test_eval_requires_checkpoint(capsys):
    rc = main(["eval", "--input", "x.tsv"])
    assert rc == 1
    assert "--checkpoint is required" in capsys.readouterr().err


def test_eval_corrupt_checkpoint_is_user_error(tmp_path, data_files, capsys):
    _, va = data_files
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not a checkpoint at all")
    rc = main(["eval", "--checkpoint", str(bad), "--input", str(va)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_predict_prints_rows(tmp_path, data_files, capsys):
    tr, va = data_files
    outdir = run_train(tmp_path, tr, va)
    queries = tmp_path / "q.tsv"
    queries.write_text("id\ttext\nq1\tofficials confirmed the report\nq2\tmiracle cure hoax\n")
    capsys.readouterr()
    rc = main(["predict", "--checkpoint", str(outdir / "checkpoint.bin"),
               "--input", str(queries), *FAST_OVERRIDES])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "id\tgold\tpred\tp_fake\tp_real"
    assert len(lines) == 3
    assert lines[1].startswith("q1\t-\t")


def test_unknown_override_key_is_exit_1(capsys):
    rc = main(["train", "--override", "train.nope=1"])
    assert rc == 1
    assert "train.nope" in capsys.readouterr().err


def test_debug_reraises():
    with pytest.raises(pipeline.ConfigError):
        main(["train", "--debug", "--override", "train.nope=1"])


def test_augment_command(tmp_path, data_files, capsys):
    tr, va = data_files
    outdir = run_train(tmp_path, tr, va, extra=("--override", "train.epochs=1"))
    capsys.readouterr()
    rc = main(["augment", "--checkpoint", str(outdir / "checkpoint.bin"),
               "--override", f"data.train={tr}",
               "--override", f"data.validation={va}",
               *FAST_OVERRIDES, "--outdir", str(tmp_path / "aug")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "misclassified examples" in out
    lines = (tmp_path / "aug" / "augmented.tsv").read_text().splitlines()
    assert lines[0].startswith("id\tsource_id\ttransformation")


def test_fuse_command(tmp_path, data_files, capsys):
    tr, va = data_files
    out_a = run_train(tmp_path, tr, va)
    out_b = tmp_path / "run_b"
    rc = main([
        "train",
        "--override", f"data.train={tr}",
        "--override", f"data.validation={va}",
        *FAST_OVERRIDES, "--seed", "2", "--outdir", str(out_b),
    ])
    assert rc == 0
    capsys.readouterr()
    fuse_dir = tmp_path / "fused"
    rc = main(["fuse",
               "--checkpoint-a", str(out_a / "checkpoint.bin"),
               "--checkpoint-b", str(out_b / "checkpoint.bin"),
               "--override", f"data.validation={va}",
               *FAST_OVERRIDES, "--outdir", str(fuse_dir)])
    assert rc == 0
    assert "fusion head validation weighted F1" in capsys.readouterr().out
    assert (fuse_dir / "fusion.bin").exists()


def test_ablate_command(tmp_path, data_files, capsys):
    tr, va = data_files
    rc = main(["ablate",
               "--override", f"data.train={tr}",
               "--override", f"data.validation={va}",
               "--override", f"data.test={va}",
               *FAST_OVERRIDES,
               # later overrides win: shrink the suite after the fast block
               "--override", "train.epochs=2",
               "--override", "toggles.fusion=false",
               "--seed", "1",
               "--outdir", str(tmp_path / "abl")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "baseline" in out
    payload = json.loads((tmp_path / "abl" / "ablation.json").read_text())
    assert "baseline" in payload
    assert (tmp_path / "abl" / "ablation.txt").exists()


def test_top_split_tokens_command(tmp_path, data_files, capsys):
    tr, _ = data_files
    vocab_path = tmp_path / "v.txt"
    main(["build-vocab", "--input", str(tr), "--target-size", "80",
          "--output", str(vocab_path)])
    capsys.readouterr()
    rc = main(["top-split-tokens", "--input", str(tr), "--vocab", str(vocab_path),
               "--k", "3"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "word\tfrequency\tsubtokens"
    assert len(lines) <= 4
