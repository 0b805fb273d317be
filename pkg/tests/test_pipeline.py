"""End-to-end orchestration: config handling, training loops, augmentation
rounds, fusion, persistence, and the run directory layout."""

import json

import numpy as np
import pytest

from newsclf import metrics, pipeline, synthdata
from newsclf.pipeline import (
    ConfigError, RunConfig, TooShort, augment, evaluate, harvest_hard_samples,
    load_lexicon, predict, run_training, save_model, load_model, train,
)
from newsclf.textprep import NewsExample

FAST = {
    "vocab": {"target_size": 120},
    "model": {"max_len": 16, "hidden_dim": 8, "num_layers": 1, "num_heads": 2,
              "ff_dim": 16, "dropout": 0.1},
    "train": {"batch_size": 16, "eval_batch_size": 64, "epochs": 3, "lr": 0.02,
              "warmup": 0.2, "patience": 5, "rounds": 1},
    "schedule": [[0, 4.0], [2, 1.0]],
    "adv": {"enabled": True, "epsilon": 0.3, "combine_weight": 0.5,
            "per_token_norm": False},
}


def fast_config(**extra) -> RunConfig:
    data = json.loads(json.dumps(FAST))
    data.update(extra)
    return RunConfig.from_dict(data)


# ---- configuration -------------------------------------------------------

def test_defaults_round_trip():
    cfg = RunConfig.from_dict({})
    assert cfg["train"]["lr"] == 2e-5
    assert cfg["model"]["hidden_dim"] == 64
    assert cfg.seed == 0


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"trian": {}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"train": {"learning_rate": 0.1}})


def test_overrides_coerce_types():
    cfg = RunConfig.from_dict({}).with_overrides(
        ["train.lr=0.25", "train.epochs=7", "toggles.adversarial=false",
         "data.train=x.tsv", "schedule=[[0,2.0]]"])
    assert cfg["train"]["lr"] == 0.25
    assert cfg["train"]["epochs"] == 7
    assert cfg.toggles["adversarial"] is False
    assert cfg["data"]["train"] == "x.tsv"
    assert cfg["schedule"] == [[0, 2.0]]


def test_override_rejects_bad_forms():
    base = RunConfig.from_dict({})
    with pytest.raises(ConfigError):
        base.with_overrides(["train.lr"])  # no '='
    with pytest.raises(ConfigError):
        base.with_overrides(["train.nope=1"])
    with pytest.raises(ConfigError):
        base.with_overrides(["train.epochs=abc"])


def test_validate_catches_bad_values():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"train": {"epochs": 0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"adv": {"epsilon": -1.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"model": {"hidden_dim": 6, "num_heads": 4}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"fusion": {"mode": "nope"}})


def test_config_from_toml_and_json(tmp_path):
    t = tmp_path / "c.toml"
    t.write_text('seed = 5\n[train]\nlr = 0.125\n')
    cfg = RunConfig.from_file(t)
    assert cfg.seed == 5 and cfg["train"]["lr"] == 0.125
    j = tmp_path / "c.json"
    j.write_text('{"seed": 6}')
    assert RunConfig.from_file(j).seed == 6


def test_toggles_derive_new_configs():
    cfg = fast_config(seed=3)
    off = cfg.with_toggles(adversarial=False)
    assert off.toggles["adversarial"] is False
    assert cfg.toggles["adversarial"] is True  # original untouched
    assert not off.adv_config().enabled
    assert cfg.with_seed(9).seed == 9
    # heated_loss off pins alpha to 1 at every epoch
    flat = cfg.with_toggles(heated_loss=False).schedule()
    from newsclf.objective import schedule_alpha
    assert schedule_alpha(flat, 0) == 1.0
    # new_tokens off means no vocabulary additions
    assert cfg.with_toggles(new_tokens=False).domain_tokens() == ()


# ---- training ------------------------------------------------------------

def test_training_learns_separable_data(micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=1, **{"train": dict(FAST["train"], epochs=12, patience=12)})
    res = train(cfg, train_ex, val_ex)
    assert res.best_report.accuracy >= 0.8
    rep, rows = evaluate(res.model, res.vocab, val_ex, cfg)
    assert rep.accuracy == pytest.approx(res.best_report.accuracy)
    assert len(rows) == len(val_ex)


def test_training_is_deterministic(micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=2)
    r1 = train(cfg, train_ex, val_ex)
    r2 = train(cfg, train_ex, val_ex)
    assert r1.log.jsonl() == r2.log.jsonl()
    for k in r1.model.params:
        np.testing.assert_array_equal(r1.model.params[k].data,
                                      r2.model.params[k].data)


def test_training_seed_changes_trajectory(micro_examples):
    train_ex, val_ex = micro_examples
    r1 = train(fast_config(seed=2), train_ex, val_ex)
    r2 = train(fast_config(seed=3), train_ex, val_ex)
    assert r1.log.jsonl() != r2.log.jsonl()


def test_trainlog_epoch_records(micro_examples):
    train_ex, val_ex = micro_examples
    res = train(fast_config(seed=1), train_ex, val_ex)
    assert len(res.log.epochs) == 3
    for rec in res.log.epochs:
        for key in ("round", "epoch", "alpha", "lr", "clean_loss", "adv_loss", "val"):
            assert key in rec
        assert "weighted_f1" in rec["val"]
    assert res.log.epochs[0]["alpha"] == 4.0
    assert res.log.epochs[2]["alpha"] == 1.0


def test_predict_rows(micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=1)
    res = train(cfg, train_ex, val_ex)
    rows = predict(res.model, res.vocab,
                   [("q1", "official statement confirmed today")], cfg)
    assert len(rows) == 1
    ex_id, gold, pred, p_fake, p_real = rows[0]
    assert ex_id == "q1" and gold == "-"
    assert pred in ("fake", "real")
    assert p_fake + p_real == pytest.approx(1.0, abs=1e-9)


# ---- persistence ---------------------------------------------------------

def test_model_roundtrip_reproduces_reports(tmp_path, micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=4)
    res = train(cfg, train_ex, val_ex)
    p = tmp_path / "model.bin"
    save_model(p, res.model, res.vocab)
    model2, vocab2 = load_model(p)
    rep1, rows1 = evaluate(res.model, res.vocab, val_ex, cfg)
    rep2, rows2 = evaluate(model2, vocab2, val_ex, cfg)
    assert metrics.report_to_dict(rep1) == metrics.report_to_dict(rep2)
    assert rows1 == rows2
    assert vocab2.id_to_token == res.vocab.id_to_token


# ---- harvesting and augmentation -----------------------------------------

def test_harvest_returns_misclassified_sorted(micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=1, **{"train": dict(FAST["train"], epochs=1)})
    res = train(cfg, train_ex, val_ex)
    hard = harvest_hard_samples(res.model, res.vocab, train_ex, val_ex, cfg)
    ids = [ex.id for ex in hard]
    assert ids == sorted(ids)
    all_ids = {ex.id for ex in train_ex} | {ex.id for ex in val_ex}
    assert set(ids) <= all_ids


def test_lexicon_loads_symmetric_groups():
    lex = load_lexicon()
    assert lex, "bundled lexicon must not be empty"
    some_word = next(iter(lex))
    for syn in lex[some_word]:
        assert some_word in lex[syn]


def test_augment_contract():
    lex = load_lexicon()
    hard = [
        NewsExample(id="h1", raw_text="officials confirmed the vaccine works fine", label=1),
        NewsExample(id="h2", raw_text="huge hoax spreads fast online today", label=0),
        NewsExample(id="h3", raw_text="word", label=1),  # too short, skipped
    ]
    pairs = augment(hard, lex, seed=11, round_index=1)
    assert len(pairs) == 2  # one-word example dropped
    for ex, rec in pairs:
        src = next(h for h in hard if h.id == rec.source_id)
        assert ex.label == src.label
        assert ex.id.startswith(src.id + ":aug1.")
        assert ex.raw_text != src.raw_text
        n_src = len(src.raw_text.split())
        n_new = len(ex.raw_text.split())
        if rec.transformation == "word_drop":
            assert n_src - n_new == len(rec.positions)
            assert 1 <= len(rec.positions) <= 2
        else:
            assert rec.transformation == "synonym_swap"
            assert n_new == n_src
            assert 1 <= len(rec.positions) <= 2
            src_words = src.raw_text.split()
            new_words = ex.raw_text.split()
            changed = [i for i in range(n_src) if src_words[i] != new_words[i]]
            assert set(changed) <= set(rec.positions)
            for i in changed:
                assert new_words[i] in lex[src_words[i]]


def test_augment_is_seed_reproducible():
    lex = load_lexicon()
    hard = [NewsExample(id="h", raw_text="officials confirmed new vaccine data today", label=1)]
    a = augment(hard, lex, seed=5)
    b = augment(hard, lex, seed=5)
    c = augment(hard, lex, seed=6)
    assert [(ex.raw_text, rec.positions) for ex, rec in a] == \
           [(ex.raw_text, rec.positions) for ex, rec in b]
    assert a != c or a[0][0].raw_text != c[0][0].raw_text


def test_multi_round_training_grows_pool(micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=5, **{"train": dict(FAST["train"], rounds=2, epochs=2)})
    res = train(cfg, train_ex, val_ex)
    assert len(res.log.rounds) == 1
    rec = res.log.rounds[0]
    assert rec["augmented_count"] == len(res.augmented)
    assert {e["round"] for e in res.log.epochs} == {0, 1}


def test_early_stopping_cuts_epochs(micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=2, **{"train": dict(FAST["train"], epochs=30, patience=2,
                                               lr=1e-7)})  # too cold to improve
    res = train(cfg, train_ex, val_ex)
    assert len(res.log.epochs) < 30


def test_absurd_lr_keeps_losses_finite(micro_examples):
    """The loss runs through log-sum-exp, so even a diverged model reports a
    large finite loss rather than inf; the non-finite guard stays quiet."""
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=2, **{"train": dict(FAST["train"], lr=1e18)})
    res = train(cfg, train_ex, val_ex)
    for rec in res.log.epochs:
        assert np.isfinite(rec["clean_loss"])


# ---- synthetic corpora ----------------------------------------------------

def test_synthetic_corpora_shapes_and_balance():
    tr, va = synthdata.separable_corpus(40, 10, seed=0)
    assert len(tr) == 40 and len(va) == 10
    assert sum(e.label for e in tr) == 20
    tr2, va2, te2 = synthdata.noisy_corpus(30, 10, 10, 0.5, seed=0)
    assert len(te2) == 10
    comp = synthdata.complementary_corpus(20, 12, 12, seed=0)
    assert set(comp) == {"train_a", "train_b", "validation", "test"}
    a_words = set(w for e in comp["train_a"] for w in e.raw_text.split())
    assert not (a_words & set(synthdata.FAKE_MARKERS_B))
    assert not (a_words & set(synthdata.REAL_MARKERS_B))


def test_synthetic_corpora_deterministic():
    a = synthdata.separable_corpus(10, 5, seed=3)
    b = synthdata.separable_corpus(10, 5, seed=3)
    assert [(e.id, e.raw_text) for e in a[0]] == [(e.id, e.raw_text) for e in b[0]]


# ---- run directory --------------------------------------------------------

def test_run_training_writes_artifacts(tmp_path, micro_examples):
    from newsclf.textprep import save_dataset
    train_ex, val_ex = micro_examples
    save_dataset(train_ex, tmp_path / "train.tsv")
    save_dataset(val_ex, tmp_path / "val.tsv")
    cfg = fast_config(
        seed=1,
        data={"train": str(tmp_path / "train.tsv"),
              "validation": str(tmp_path / "val.tsv"),
              "test": "", "format": "tsv", "lexicon": ""},
    )
    outdir = tmp_path / "run"
    run_training(cfg, outdir)
    assert (outdir / "checkpoint.bin").exists()
    assert (outdir / "trainlog.jsonl").exists()
    report = json.loads((outdir / "report.json").read_text())
    assert "validation" in report and "weighted_f1" in report["validation"]
    lines = (outdir / "predictions.tsv").read_text().splitlines()
    assert lines[0] == "id\tgold\tpred\tp_fake\tp_real"
    assert len(lines) == 1 + len(val_ex)
    # probabilities are written with 10 decimals and sum to ~1
    _, _, _, p_fake, p_real = lines[1].split("\t")
    assert len(p_fake.split(".")[1]) == 10
    assert float(p_fake) + float(p_real) == pytest.approx(1.0, abs=1e-8)


def test_run_training_missing_data_path_is_config_error(tmp_path):
    cfg = fast_config(seed=1)
    with pytest.raises(ConfigError):
        run_training(cfg, tmp_path / "run")


# ---- fusion ---------------------------------------------------------------

def test_fused_model_not_worse_than_sources_on_validation():
    corp = synthdata.complementary_corpus(60, 40, 40, seed=4)
    cfg = fast_config(seed=6, **{"train": dict(FAST["train"], epochs=4)})
    cfg_b = cfg.with_seed(cfg.seed + 1)
    ra = train(cfg, corp["train_a"], corp["validation"])
    rb = train(cfg_b, corp["train_b"], corp["validation"])
    head, fused_val_f1 = pipeline.train_fused(
        cfg, ra.model, ra.vocab, rb.model, rb.vocab, corp["validation"])
    fa, _ = evaluate(ra.model, ra.vocab, corp["validation"], cfg)
    fb, _ = evaluate(rb.model, rb.vocab, corp["validation"], cfg_b)
    assert fused_val_f1 >= max(fa.weighted_f1, fb.weighted_f1) - 1e-9


def test_fusion_head_roundtrip(tmp_path):
    head = pipeline.save_fusion, pipeline.load_fusion
    from newsclf.encoder import init_fusion_head
    h = init_fusion_head("logits", fusion_hidden=8, seed=1, passthrough=False)
    p = tmp_path / "fusion.bin"
    pipeline.save_fusion(p, h)
    back = pipeline.load_fusion(p)
    assert back.mode == h.mode and back.in_width == h.in_width
    for k in h.params:
        np.testing.assert_array_equal(back.params[k].data, h.params[k].data)


# ---- ablation -------------------------------------------------------------

def test_ablation_suite_rows_and_table(micro_examples):
    train_ex, val_ex = micro_examples
    cfg = fast_config(seed=1, **{
        "train": dict(FAST["train"], epochs=2),
        "toggles": {"new_tokens": True, "heated_loss": True,
                    "adversarial": True, "fusion": False},
    })
    rows = pipeline.ablation_suite(cfg, train_ex, val_ex, val_ex)
    names = [name for name, _ in rows]
    assert names[0] == "baseline"
    assert "all" in names[-1] or any("all" in n for n in names)
    table = pipeline.ablation_table(rows)
    assert "Accuracy" in table.splitlines()[0]
    assert len(table.splitlines()) == len(rows) + 1
