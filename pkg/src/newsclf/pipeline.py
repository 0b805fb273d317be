"""End-to-end training orchestration.

Owns the run configuration schema, the epoch loop (temperature schedule +
adversarial step + Adam with warmup), misclassified-sample harvesting and
augmentation rounds, fusion-head training on frozen source models, the
evaluation/prediction paths, checkpoint files, and the ablation harness.
Every operation here is a deterministic function of (config, data, seed).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from newsclf import encoder as enc
from newsclf import metrics
from newsclf import tokenizer as tok
from newsclf.advtrain import AdvConfig, Batch, adversarial_training_step
from newsclf.ndtensor import (
    AdamState,
    Tensor,
    adam_step,
    backward,
    load_checkpoint,
    no_grad,
    save_checkpoint,
    zero_grad,
)
from newsclf.ndtensor.tensor import _softmax_np
from newsclf.objective import TemperatureSchedule, batch_loss_tensor, schedule_alpha
from newsclf.textprep import NewsExample, clean_dataset, load_dataset, load_stopwords

log = logging.getLogger(__name__)

LABEL_NAMES = {0: "fake", 1: "real"}


class ConfigError(ValueError):
    """Bad run-config key or value; CLI maps this to exit code 1."""


class NonFiniteLoss(RuntimeError):
    """Training produced NaN/inf; message names the offending batch."""


class TooShort(ValueError):
    """Augmentation needs at least two words to act on."""


# ---------------------------------------------------------------------------
# run configuration

DEFAULT_CONFIG = {
    "seed": 0,
    "data": {"train": "", "validation": "", "test": "", "format": "tsv", "lexicon": ""},
    "vocab": {"target_size": 200, "new_tokens": list(tok.DEFAULT_DOMAIN_TOKENS)},
    "model": {
        "max_len": 128,
        "hidden_dim": 64,
        "num_layers": 2,
        "num_heads": 2,
        "ff_dim": 128,
        "dropout": 0.1,
    },
    "schedule": [[0, 4.0], [10, 1.0], [20, 0.5]],
    "adv": {"enabled": True, "epsilon": 0.5, "combine_weight": 0.5, "per_token_norm": False},
    "train": {
        "batch_size": 64,
        "eval_batch_size": 128,
        "epochs": 30,
        "lr": 2e-5,
        "warmup": 0.1,
        "patience": 5,
        "rounds": 2,
    },
    "fusion": {"mode": "logits", "hidden": 16, "epochs": 30, "lr": 0.05, "seed_offset": 1},
    "toggles": {"new_tokens": True, "heated_loss": True, "adversarial": True, "fusion": True},
}


def _deep_merge(base: dict, extra: dict, prefix: str = "") -> dict:
    out = {}
    for key, default in base.items():
        if key not in extra:
            out[key] = json.loads(json.dumps(default))  # deep copy of plain data
        elif isinstance(default, dict):
            if not isinstance(extra[key], dict):
                raise ConfigError(f"config key {prefix}{key} must be a table/object")
            out[key] = _deep_merge(default, extra[key], prefix + key + ".")
        else:
            out[key] = extra[key]
    for key in extra:
        if key not in base:
            raise ConfigError(f"unknown config key {prefix}{key}")
    return out


def _coerce(raw: str, like):
    if isinstance(like, bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, list):
            value = json.loads(raw)
            if not isinstance(value, list):
                raise ConfigError(f"expected a JSON list, got {raw!r}")
            return value
    except (ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse {raw!r} as {type(like).__name__}") from exc
    return raw


@dataclass(frozen=True)
class RunConfig:
    """Validated nested run settings; construct via from_dict/from_file."""

    raw: dict

    @classmethod
    def from_dict(cls, data: Optional[dict] = None) -> "RunConfig":
        merged = _deep_merge(DEFAULT_CONFIG, data or {})
        cfg = cls(raw=merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            try:
                import tomllib  # py311+
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(text)
        return cls.from_dict(data)

    def with_overrides(self, pairs: Sequence[str]) -> "RunConfig":
        """Apply dotted-key overrides like adv.epsilon=0.1 (after file load)."""
        data = json.loads(json.dumps(self.raw))
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"override must look like key=value, got {pair!r}")
            dotted, raw_value = pair.split("=", 1)
            keys = dotted.strip().split(".")
            node = data
            for k in keys[:-1]:
                if not isinstance(node, dict) or k not in node:
                    raise ConfigError(f"unknown config key {dotted}")
                node = node[k]
            leaf = keys[-1]
            if not isinstance(node, dict) or leaf not in node:
                raise ConfigError(f"unknown config key {dotted}")
            node[leaf] = _coerce(raw_value, node[leaf])
        return RunConfig.from_dict(data)

    def validate(self) -> None:
        t = self.raw["train"]
        if t["epochs"] < 1:
            raise ConfigError("train.epochs must be >= 1")
        if t["batch_size"] < 1 or t["eval_batch_size"] < 1:
            raise ConfigError("batch sizes must be >= 1")
        if t["rounds"] < 1:
            raise ConfigError("train.rounds must be >= 1")
        if t["patience"] < 1:
            raise ConfigError("train.patience must be >= 1")
        if t["lr"] <= 0:
            raise ConfigError("train.lr must be > 0")
        if not (0.0 <= t["warmup"] <= 1.0):
            raise ConfigError("train.warmup must be in [0, 1]")
        if self.raw["vocab"]["target_size"] < 64:
            raise ConfigError("vocab.target_size must be >= 64")
        if self.raw["fusion"]["mode"] not in enc.FUSION_MODES:
            raise ConfigError(f"fusion.mode must be one of {enc.FUSION_MODES}")
        if self.raw["fusion"]["epochs"] < 0:
            raise ConfigError("fusion.epochs must be >= 0")
        try:
            self.adv_config()
            self.schedule()
            m = self.raw["model"]
            enc.ModelConfig(vocab_size=64, **m, seed=self.seed)
        except (ValueError, enc.InvalidConfig) as exc:
            raise ConfigError(str(exc)) from exc

    # section accessors -----------------------------------------------------
    def __getitem__(self, key: str):
        return self.raw[key]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def toggles(self) -> dict:
        return self.raw["toggles"]

    def with_toggles(self, **flags) -> "RunConfig":
        data = json.loads(json.dumps(self.raw))
        for name, value in flags.items():
            if name not in data["toggles"]:
                raise ConfigError(f"unknown toggle {name}")
            data["toggles"][name] = bool(value)
        return RunConfig.from_dict(data)

    def with_seed(self, seed: int) -> "RunConfig":
        data = json.loads(json.dumps(self.raw))
        data["seed"] = int(seed)
        return RunConfig.from_dict(data)

    def model_config(self, vocab_size: int) -> enc.ModelConfig:
        return enc.ModelConfig(vocab_size=vocab_size, seed=self.seed, **self.raw["model"])

    def schedule(self) -> TemperatureSchedule:
        if self.toggles["heated_loss"]:
            return TemperatureSchedule.from_pairs(self.raw["schedule"])
        return TemperatureSchedule.from_pairs([[0, 1.0]])

    def adv_config(self) -> AdvConfig:
        a = self.raw["adv"]
        return AdvConfig(
            enabled=bool(self.toggles["adversarial"] and a["enabled"]),
            epsilon=float(a["epsilon"]),
            combine_weight=float(a["combine_weight"]),
            per_token_norm=bool(a["per_token_norm"]),
        )

    def domain_tokens(self) -> tuple:
        if not self.toggles["new_tokens"]:
            return ()
        return tuple(self.raw["vocab"]["new_tokens"])


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint32)[0])


# ---------------------------------------------------------------------------
# dataset encoding

@dataclass(frozen=True)
class EncodedDataset:
    ids: np.ndarray
    mask: np.ndarray
    labels: np.ndarray
    example_ids: tuple
    texts: tuple


def encode_dataset(cleaned, vocab: tok.Vocabulary, max_len: int) -> EncodedDataset:
    rows = [tok.encode(ex.tokens_text, vocab, max_len) for ex in cleaned]
    if not rows:
        raise ConfigError("dataset is empty after cleaning")
    return EncodedDataset(
        ids=np.stack([r.ids for r in rows]),
        mask=np.stack([r.mask for r in rows]),
        labels=np.array([ex.label for ex in cleaned], dtype=np.int64),
        example_ids=tuple(ex.id for ex in cleaned),
        texts=tuple(ex.tokens_text for ex in cleaned),
    )


def build_vocabulary(config: RunConfig, cleaned_train) -> tok.Vocabulary:
    vocab = tok.build_vocab((ex.tokens_text for ex in cleaned_train), config["vocab"]["target_size"])
    new = config.domain_tokens()
    if new:
        vocab, added = tok.extend_vocab(vocab, new)
        log.info("extended vocabulary with %d domain tokens", added)
    return vocab


def build_model(config: RunConfig, vocab: tok.Vocabulary) -> enc.EncoderModel:
    model = enc.init_model(config.model_config(len(vocab)))
    table = model.params["tok_emb"]
    for i, token in enumerate(vocab.added_tokens):
        rng = np.random.default_rng([config.seed, 777, i])
        row = tok.init_added_token_embedding(vocab, table, token, rng=rng)
        table.data[vocab.token_to_id[token]] = row
    return model


# ---------------------------------------------------------------------------
# evaluation / prediction

def _predict_encoded(model: enc.EncoderModel, ds: EncodedDataset, eval_batch_size: int):
    """Deterministic argmax predictions and standard-softmax probabilities."""
    preds = []
    probs = []
    with no_grad():
        for lo in range(0, ds.ids.shape[0], eval_batch_size):
            hi = lo + eval_batch_size
            emb = enc.embed_batch(model, ds.ids[lo:hi])
            feats = enc.forward(model, emb, ds.mask[lo:hi], train=False)
            z = feats.logits.data
            probs.append(_softmax_np(z, 1.0))
            preds.append(np.argmax(z, axis=-1))
    return np.concatenate(preds), np.concatenate(probs)


def _prediction_rows(ds: EncodedDataset, preds, probs, golds=None):
    rows = []
    for i, ex_id in enumerate(ds.example_ids):
        gold = LABEL_NAMES[int(golds[i])] if golds is not None else "-"
        rows.append(
            (ex_id, gold, LABEL_NAMES[int(preds[i])], float(probs[i, 0]), float(probs[i, 1]))
        )
    return rows


def evaluate(model: enc.EncoderModel, vocab: tok.Vocabulary, examples, config: RunConfig,
             divide_by_classes: bool = False):
    """Report + prediction rows (id, gold, pred, p_fake, p_real) for a
    labelled dataset."""
    cleaned = clean_dataset(examples, load_stopwords())
    ds = encode_dataset(cleaned, vocab, model.config.max_len)
    preds, probs = _predict_encoded(model, ds, config["train"]["eval_batch_size"])
    counts = metrics.confusion_counts(preds, ds.labels)
    report = metrics.weighted_report(counts, divide_by_classes=divide_by_classes)
    return report, _prediction_rows(ds, preds, probs, golds=ds.labels)


def predict(model: enc.EncoderModel, vocab: tok.Vocabulary, items, config: RunConfig):
    """Prediction rows for (id, raw_text) pairs; no labels required."""
    examples = [NewsExample(id=i, raw_text=t, label=0) for i, t in items]
    cleaned = clean_dataset(examples, load_stopwords())
    ds = encode_dataset(cleaned, vocab, model.config.max_len)
    preds, probs = _predict_encoded(model, ds, config["train"]["eval_batch_size"])
    return _prediction_rows(ds, preds, probs)


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    rounds: list = field(default_factory=list)

    def jsonl(self) -> str:
        lines = [json.dumps({"kind": "epoch", **e}) for e in self.epochs]
        lines += [json.dumps({"kind": "round", **r}) for r in self.rounds]
        return "\n".join(lines) + "\n" if lines else ""


@dataclass
class TrainResult:
    model: enc.EncoderModel
    vocab: tok.Vocabulary
    log: TrainLog
    best_report: metrics.ClassificationReport
    best_epoch: int
    best_round: int
    augmented: list


def _train_one_round(config: RunConfig, train_examples, val_examples, round_index: int,
                     train_log: TrainLog) -> tuple:
    stop = load_stopwords()
    cleaned_train = clean_dataset(train_examples, stop)
    cleaned_val = clean_dataset(val_examples, stop)
    vocab = build_vocabulary(config, cleaned_train)
    model = build_model(config, vocab)
    max_len = model.config.max_len
    ds_train = encode_dataset(cleaned_train, vocab, max_len)
    ds_val = encode_dataset(cleaned_val, vocab, max_len)

    tcfg = config["train"]
    sched = config.schedule()
    adv = config.adv_config()
    n = ds_train.ids.shape[0]
    bs = tcfg["batch_size"]
    n_batches = math.ceil(n / bs)
    total_steps = tcfg["epochs"] * n_batches
    state = AdamState(lr=tcfg["lr"], warmup=tcfg["warmup"])

    best_f1 = -1.0
    best_epoch = -1
    best_params = None
    best_report = None
    global_step = 0

    for epoch in range(tcfg["epochs"]):
        alpha = schedule_alpha(sched, epoch)
        order = np.random.default_rng([config.seed, round_index, epoch, 101]).permutation(n)
        clean_losses = []
        adv_losses = []
        lr_used = 0.0
        for bi in range(n_batches):
            idx = order[bi * bs : (bi + 1) * bs]
            batch = Batch(ids=ds_train.ids[idx], mask=ds_train.mask[idx], labels=ds_train.labels[idx])
            dropout_seed = _derive_seed(config.seed, round_index, epoch, bi)
            step = adversarial_training_step(model, batch, alpha, adv, dropout_seed=dropout_seed)
            bad = not np.isfinite(step.clean_loss) or (
                step.adv_loss is not None and not np.isfinite(step.adv_loss)
            )
            if bad:
                raise NonFiniteLoss(f"non-finite loss at round {round_index} epoch {epoch} batch {bi}")
            lr_used = adam_step(model.params, state, global_step, total_steps)
            global_step += 1
            clean_losses.append(step.clean_loss)
            if step.adv_loss is not None:
                adv_losses.append(step.adv_loss)

        preds, _ = _predict_encoded(model, ds_val, tcfg["eval_batch_size"])
        report = metrics.weighted_report(metrics.confusion_counts(preds, ds_val.labels))
        train_log.epochs.append(
            {
                "round": round_index,
                "epoch": epoch,
                "alpha": alpha,
                "lr": lr_used,
                "clean_loss": float(np.mean(clean_losses)),
                "adv_loss": float(np.mean(adv_losses)) if adv_losses else None,
                "val": metrics.report_to_dict(report),
            }
        )
        if report.weighted_f1 > best_f1:
            best_f1 = report.weighted_f1
            best_epoch = epoch
            best_report = report
            best_params = {k: p.data.copy() for k, p in model.params.items()}
        if epoch - best_epoch >= tcfg["patience"]:
            log.info("early stop at epoch %d (best %d)", epoch, best_epoch)
            break

    for k, p in model.params.items():
        p.data = best_params[k].copy()
    return model, vocab, best_report, best_epoch


def train(config: RunConfig, train_examples, val_examples) -> TrainResult:
    """Full training procedure: one or more rounds, where each round after
    the first retrains from scratch on the training set extended with
    augmented copies of the previous round's misclassified examples.
    Returns the best model (by validation weighted F1) across all rounds.
    """
    train_log = TrainLog()
    pool = list(train_examples)
    lexicon = None
    augmented_pairs = []
    best = None  # (f1, round, model, vocab, report, epoch)

    rounds = config["train"]["rounds"]
    for round_index in range(rounds):
        model, vocab, report, best_epoch = _train_one_round(
            config, pool, val_examples, round_index, train_log
        )
        if best is None or report.weighted_f1 > best[0]:
            best = (report.weighted_f1, round_index, model, vocab, report, best_epoch)

        if round_index + 1 < rounds:
            hard = harvest_hard_samples(model, vocab, pool, val_examples, config)
            if lexicon is None:
                lexicon = load_lexicon(config["data"]["lexicon"] or None)
            pairs = augment(
                hard,
                lexicon,
                seed=_derive_seed(config.seed, 401, round_index),
                round_index=round_index + 1,
            )
            train_log.rounds.append(
                {"round": round_index, "hard_count": len(hard), "augmented_count": len(pairs)}
            )
            augmented_pairs.extend(pairs)
            pool = pool + [ex for ex, _ in pairs]

    _, best_round, model, vocab, report, best_epoch = best
    return TrainResult(
        model=model,
        vocab=vocab,
        log=train_log,
        best_report=report,
        best_epoch=best_epoch,
        best_round=best_round,
        augmented=augmented_pairs,
    )


# ---------------------------------------------------------------------------
# hard-sample harvesting and augmentation

def harvest_hard_samples(model, vocab, train_examples, val_examples, config: RunConfig) -> list:
    """All train+validation examples the model misclassifies, by id order."""
    stop = load_stopwords()
    out = []
    for examples in (train_examples, val_examples):
        cleaned = clean_dataset(examples, stop)
        if not cleaned:
            continue
        by_id = {ex.id: ex for ex in examples}
        ds = encode_dataset(cleaned, vocab, model.config.max_len)
        preds, _ = _predict_encoded(model, ds, config["train"]["eval_batch_size"])
        for i, ex_id in enumerate(ds.example_ids):
            if int(preds[i]) != int(ds.labels[i]):
                out.append(by_id[ex_id])
    out.sort(key=lambda ex: ex.id)
    return out


def load_lexicon(path=None) -> dict:
    """Synonym map word -> tuple of alternatives (never containing itself).

    File format: one space-separated synonym group per line; # comments.
    """
    if path is None:
        text = resources.files("newsclf").joinpath("data/synonyms_en.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    lex: dict = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        group = line.split()
        for w in group:
            others = tuple(g for g in group if g != w)
            if others:
                lex[w] = tuple(dict.fromkeys(lex.get(w, ()) + others))
    return lex


@dataclass(frozen=True)
class AugmentationRecord:
    source_id: str
    transformation: str
    positions: tuple
    text: str
    round_index: int


def _augment_one(ex: NewsExample, lexicon: dict, rng: np.random.Generator,
                 round_index: int, counter: int):
    words = ex.raw_text.split()
    if len(words) <= 1:
        raise TooShort(ex.id)
    in_lex = [i for i, w in enumerate(words) if w in lexicon]
    if in_lex:
        transformation = str(rng.choice(["synonym_swap", "word_drop"]))
    else:
        transformation = "word_drop"
    k = int(rng.integers(1, 3))
    if transformation == "synonym_swap":
        k = min(k, len(in_lex))
        positions = sorted(int(p) for p in rng.choice(in_lex, size=k, replace=False))
        new_words = list(words)
        for p in positions:
            new_words[p] = str(rng.choice(lexicon[words[p]]))
    else:
        k = min(k, len(words) - 1)
        positions = sorted(int(p) for p in rng.choice(len(words), size=k, replace=False))
        new_words = [w for i, w in enumerate(words) if i not in positions]
    text = " ".join(new_words)
    new_ex = NewsExample(
        id=f"{ex.id}:aug{round_index}.{counter}",
        raw_text=text,
        label=ex.label,
        split="train",
    )
    record = AugmentationRecord(
        source_id=ex.id,
        transformation=transformation,
        positions=tuple(positions),
        text=text,
        round_index=round_index,
    )
    return new_ex, record


def augment(hard: Sequence[NewsExample], lexicon: dict, seed: int, round_index: int = 1) -> list:
    """Seeded augmentation of harvested examples.

    Per example: swap 1-2 in-lexicon words for synonyms, or drop 1-2 words;
    examples with no lexicon hit always drop. Labels are preserved and the
    text always changes. One-word examples are skipped with a log line.
    """
    rng = np.random.default_rng([seed, 17])
    out = []
    for ex in hard:
        try:
            out.append(_augment_one(ex, lexicon, rng, round_index, len(out)))
        except TooShort:
            log.warning("skipping %s: too short to augment", ex.id)
    return out


# ---------------------------------------------------------------------------
# fusion

@dataclass
class FusedModel:
    head: enc.FusionHead
    model_a: enc.EncoderModel
    vocab_a: tok.Vocabulary
    model_b: enc.EncoderModel
    vocab_b: tok.Vocabulary


def _source_features(model, vocab, examples, config):
    cleaned = clean_dataset(examples, load_stopwords())
    ds = encode_dataset(cleaned, vocab, model.config.max_len)
    logits = []
    pooled = []
    with no_grad():
        for lo in range(0, ds.ids.shape[0], config["train"]["eval_batch_size"]):
            hi = lo + config["train"]["eval_batch_size"]
            emb = enc.embed_batch(model, ds.ids[lo:hi])
            feats = enc.forward(model, emb, ds.mask[lo:hi], train=False)
            logits.append(feats.logits.data)
            pooled.append(feats.pooled.data)
    return np.concatenate(logits), np.concatenate(pooled), ds


def _fused_logits(head, la, pa, lb, pb) -> np.ndarray:
    fa = enc.PredictedFeatures(logits=Tensor(la), pooled=Tensor(pa))
    fb = enc.PredictedFeatures(logits=Tensor(lb), pooled=Tensor(pb))
    with no_grad():
        return enc.fuse(head, fa, fb).data


def _head_val_f1(head, la, pa, lb, pb, labels) -> float:
    preds = np.argmax(_fused_logits(head, la, pa, lb, pb), axis=-1)
    report = metrics.weighted_report(metrics.confusion_counts(preds, labels))
    return report.weighted_f1


def train_fused(config: RunConfig, model_a, vocab_a, model_b, vocab_b, val_examples) -> tuple:
    """Train the fusion head on frozen source models' validation features.

    Standard cross entropy (alpha = 1). The selected head is the best of:
    every epoch's state (including initialization, which passes source A
    through exactly), and a pass-through of source B — all ranked by
    validation weighted F1, so the fused model never selects a head worse
    than either source on validation.
    """
    fcfg = config["fusion"]
    la, pa, ds_a = _source_features(model_a, vocab_a, val_examples, config)
    lb, pb, ds_b = _source_features(model_b, vocab_b, val_examples, config)
    if ds_a.example_ids != ds_b.example_ids:
        raise ConfigError("source models saw different validation examples")
    labels = ds_a.labels

    def make_head(source):
        return enc.init_fusion_head(
            mode=fcfg["mode"],
            hidden_a=model_a.config.hidden_dim,
            hidden_b=model_b.config.hidden_dim,
            fusion_hidden=fcfg["hidden"],
            seed=_derive_seed(config.seed, 501),
            passthrough=True,
            passthrough_source=source,
        )

    head = make_head(0)
    candidates = [({k: p.data.copy() for k, p in head.params.items()}, "init-passthrough-a")]
    n = labels.shape[0]
    bs = min(config["train"]["batch_size"], n)
    n_batches = math.ceil(n / bs)
    state = AdamState(lr=fcfg["lr"], warmup=0.0)
    total_steps = max(1, fcfg["epochs"] * n_batches)
    step_no = 0
    for epoch in range(fcfg["epochs"]):
        order = np.random.default_rng([config.seed, 502, epoch]).permutation(n)
        for bi in range(n_batches):
            idx = order[bi * bs : (bi + 1) * bs]
            fa = enc.PredictedFeatures(logits=Tensor(la[idx]), pooled=Tensor(pa[idx]))
            fb = enc.PredictedFeatures(logits=Tensor(lb[idx]), pooled=Tensor(pb[idx]))
            zero_grad(head.params)
            out = enc.fuse(head, fa, fb)
            loss = batch_loss_tensor(out, labels[idx], 1.0)
            backward(loss)
            adam_step(head.params, state, step_no, total_steps)
            step_no += 1
        candidates.append(({k: p.data.copy() for k, p in head.params.items()}, f"epoch-{epoch}"))

    head_b = make_head(1)
    candidates.append(({k: p.data.copy() for k, p in head_b.params.items()}, "passthrough-b"))

    best_f1 = -1.0
    best_params = None
    best_name = None
    for params, name in candidates:
        for k in head.params:
            head.params[k].data = params[k]
        f1 = _head_val_f1(head, la, pa, lb, pb, labels)
        if f1 > best_f1:
            best_f1, best_params, best_name = f1, params, name
    for k in head.params:
        head.params[k].data = best_params[k].copy()
    log.info("fusion head selected %s (val weighted F1 %.6f)", best_name, best_f1)
    return head, best_f1


def evaluate_fused(config: RunConfig, fused: FusedModel, examples,
                   divide_by_classes: bool = False):
    la, pa, ds_a = _source_features(fused.model_a, fused.vocab_a, examples, config)
    lb, pb, ds_b = _source_features(fused.model_b, fused.vocab_b, examples, config)
    if ds_a.example_ids != ds_b.example_ids:
        raise ConfigError("source models saw different examples")
    z = _fused_logits(fused.head, la, pa, lb, pb)
    preds = np.argmax(z, axis=-1)
    probs = _softmax_np(z, 1.0)
    counts = metrics.confusion_counts(preds, ds_a.labels)
    report = metrics.weighted_report(counts, divide_by_classes=divide_by_classes)
    return report, _prediction_rows(ds_a, preds, probs, golds=ds_a.labels)


# ---------------------------------------------------------------------------
# checkpoints

def save_model(path, model: enc.EncoderModel, vocab: tok.Vocabulary) -> None:
    config = {
        "kind": "encoder",
        "model": asdict(model.config),
        "vocab": {
            "tokens": list(vocab.id_to_token),
            "added": list(vocab.added_tokens),
        },
    }
    save_checkpoint(path, config, {k: p.data for k, p in model.params.items()})


def load_model(path) -> tuple:
    config, arrays = load_checkpoint(path)
    if config.get("kind") != "encoder":
        raise ConfigError(f"{path} is not an encoder checkpoint")
    mcfg = enc.ModelConfig(**config["model"])
    vocab = tok.Vocabulary(
        id_to_token=tuple(config["vocab"]["tokens"]),
        added_tokens=tuple(config["vocab"]["added"]),
    )
    params = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    model = enc.EncoderModel(config=mcfg, params=params)
    if model.n_params != enc.parameter_count(mcfg):
        raise ConfigError(f"{path}: parameter blocks do not match the config")
    return model, vocab


def save_fusion(path, head: enc.FusionHead) -> None:
    config = {
        "kind": "fusion",
        "mode": head.mode,
        "in_width": head.in_width,
        "hidden": int(head.params["fusion.b1"].data.shape[0]),
    }
    save_checkpoint(path, config, {k: p.data for k, p in head.params.items()})


def load_fusion(path) -> enc.FusionHead:
    config, arrays = load_checkpoint(path)
    if config.get("kind") != "fusion":
        raise ConfigError(f"{path} is not a fusion checkpoint")
    params = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    return enc.FusionHead(mode=config["mode"], in_width=config["in_width"], params=params)


# ---------------------------------------------------------------------------
# ablation harness

ABLATION_ROWS = (
    ("baseline", {"new_tokens": False, "heated_loss": False, "adversarial": False, "fusion": False}),
    ("+fgm", {"new_tokens": False, "heated_loss": False, "adversarial": True, "fusion": False}),
    ("+heated-loss", {"new_tokens": False, "heated_loss": True, "adversarial": False, "fusion": False}),
    ("+new-tokens", {"new_tokens": True, "heated_loss": False, "adversarial": False, "fusion": False}),
    ("+all-three", {"new_tokens": True, "heated_loss": True, "adversarial": True, "fusion": False}),
)


def ablation_suite(config: RunConfig, train_examples, val_examples, test_examples) -> list:
    """Six runs differing only in toggles, all on the same seed; returns
    [(row name, ClassificationReport), ...] including the fused row."""
    rows = []
    all_three = None
    for name, flags in ABLATION_ROWS:
        cfg = config.with_toggles(**flags)
        result = train(cfg, train_examples, val_examples)
        report, _ = evaluate(result.model, result.vocab, test_examples, cfg)
        rows.append((name, report))
        if name == "+all-three":
            all_three = result

    cfg_b = config.with_toggles(
        new_tokens=False, heated_loss=True, adversarial=True, fusion=False
    ).with_seed(config.seed + config["fusion"]["seed_offset"])
    result_b = train(cfg_b, train_examples, val_examples)
    head, _ = train_fused(
        config, all_three.model, all_three.vocab, result_b.model, result_b.vocab, val_examples
    )
    fused = FusedModel(
        head=head,
        model_a=all_three.model,
        vocab_a=all_three.vocab,
        model_b=result_b.model,
        vocab_b=result_b.vocab,
    )
    report, _ = evaluate_fused(config, fused, test_examples)
    rows.append(("fused", report))
    return rows


def ablation_table(rows) -> str:
    name_width = max(len(name) for name, _ in rows)
    head = " ".join(f"{h:>9}" for h in ("Accuracy", "Precision", "Recall", "F1"))
    lines = [f"{'':{name_width}}  {head}"]
    for name, report in rows:
        cells = " ".join(f"{v:>9.6f}" for v in (
            report.accuracy, report.weighted_precision,
            report.weighted_recall, report.weighted_f1))
        lines.append(f"{name:{name_width}}  {cells}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# run directory orchestration (CLI backend)

def _write_predictions(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\tgold\tpred\tp_fake\tp_real\n")
        for ex_id, gold, pred, p_fake, p_real in rows:
            fh.write(f"{ex_id}\t{gold}\t{pred}\t{p_fake:.10f}\t{p_real:.10f}\n")


def _write_augmented(path, pairs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\tsource_id\ttransformation\tpositions\tround\tlabel\ttext\n")
        for ex, rec in pairs:
            pos = ",".join(str(p) for p in rec.positions)
            fh.write(
                f"{ex.id}\t{rec.source_id}\t{rec.transformation}\t{pos}\t"
                f"{rec.round_index}\t{LABEL_NAMES[ex.label]}\t{rec.text}\n"
            )


def load_config_datasets(config: RunConfig, need=("train", "validation")) -> dict:
    paths = config["data"]
    fmt = paths["format"]
    out = {}
    for split in ("train", "validation", "test"):
        if paths[split]:
            out[split] = load_dataset(paths[split], format=fmt, split=split)
        elif split in need:
            raise ConfigError(f"config data.{split} is required for this command")
    return out


def run_training(config: RunConfig, outdir) -> TrainResult:
    """Train per config and write checkpoint.bin, trainlog.jsonl,
    report.json, predictions.tsv (+ augmented.tsv when rounds > 1)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    datasets = load_config_datasets(config)
    result = train(config, datasets["train"], datasets["validation"])

    save_model(outdir / "checkpoint.bin", result.model, result.vocab)
    (outdir / "trainlog.jsonl").write_text(result.log.jsonl(), encoding="utf-8")

    report = {"validation": metrics.report_to_dict(result.best_report)}
    eval_split = "test" if "test" in datasets else "validation"
    test_report, rows = evaluate(result.model, result.vocab, datasets[eval_split], config)
    report[eval_split] = metrics.report_to_dict(test_report)
    (outdir / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _write_predictions(outdir / "predictions.tsv", rows)
    if result.augmented:
        _write_augmented(outdir / "augmented.tsv", result.augmented)
    return result
