"""Command-line interface.

Exit codes: 0 success, 1 bad config/data (diagnostic names the offending
key, flag, or row), 2 internal errors. --debug re-raises with a traceback.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from newsclf import metrics, pipeline, tokenizer
from newsclf.encoder import IdOutOfRange
from newsclf.ndtensor import CheckpointError
from newsclf.textprep import clean_dataset, dataset_stats, load_dataset, load_stopwords
from newsclf.tokenizer import TokenNotAdded

log = logging.getLogger("newsclf")

# anything here is the user's fault: bad paths, malformed rows, bad keys
USER_ERRORS = (
    ValueError,
    FileNotFoundError,
    IsADirectoryError,
    NotADirectoryError,
    PermissionError,
    CheckpointError,
    IdOutOfRange,
    TokenNotAdded,
)


def _require(args, name: str):
    value = getattr(args, name.replace("-", "_"))
    if not value:
        raise pipeline.ConfigError(f"--{name} is required")
    return value


def _load_config(args) -> pipeline.RunConfig:
    cfg = pipeline.RunConfig.from_file(args.config) if args.config else pipeline.RunConfig.from_dict()
    if args.override:
        cfg = cfg.with_overrides(args.override)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _read_texts(path, fmt):
    """(id, text) pairs from a TSV/CSV with header naming text and
    optionally id; a label column, if present, is ignored."""
    fmt = fmt or ("tsv" if str(path).lower().endswith(".tsv") else "csv")
    delim = "\t" if fmt == "tsv" else ","
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delim)
        header = next(reader, None)
        if header is None:
            raise pipeline.ConfigError(f"{path}: missing header row")
        names = [h.strip().lower() for h in header]
        if "text" not in names:
            raise pipeline.ConfigError(f"{path}: header must name a text column")
        text_col = names.index("text")
        id_col = names.index("id") if "id" in names else None
        for i, row in enumerate(reader, start=1):
            ex_id = row[id_col] if id_col is not None else str(i)
            out.append((ex_id, row[text_col]))
    return out


def _print_report(report, heading: str) -> None:
    print(heading)
    print("Accuracy Precision Recall F1")
    print(metrics.report_to_table(report))


# ---------------------------------------------------------------------------
# subcommand bodies

def cmd_preprocess(args) -> int:
    src = _require(args, "input")
    out_path = _require(args, "output")
    examples = load_dataset(src, format=args.format)
    stop = load_stopwords(args.stopwords)
    cleaned = clean_dataset(examples, stop)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["id", "text", "label"])
        for ex in cleaned:
            writer.writerow([ex.id, ex.tokens_text, pipeline.LABEL_NAMES[ex.label]])
    stats = dataset_stats(cleaned)
    print(f"wrote {len(cleaned)} cleaned examples to {out_path}")
    print(f"label counts: {stats.label_counts}; mean tokens: {stats.mean_tokens:.2f}")
    return 0


def cmd_build_vocab(args) -> int:
    inputs = _require(args, "input")
    out_path = _require(args, "output")
    stop = load_stopwords(args.stopwords)
    texts = []
    for path in inputs:
        cleaned = clean_dataset(load_dataset(path, format=args.format), stop)
        texts.extend(ex.tokens_text for ex in cleaned)
    vocab = tokenizer.build_vocab(texts, args.target_size)
    base = len(vocab)
    if not args.no_domain_tokens:
        extra = (
            tuple(t.strip() for t in args.domain_tokens.split(",") if t.strip())
            if args.domain_tokens
            else tokenizer.DEFAULT_DOMAIN_TOKENS
        )
        vocab, added = tokenizer.extend_vocab(vocab, extra)
        print(f"base vocabulary {base} tokens, {added} domain tokens appended")
    else:
        print(f"base vocabulary {base} tokens")
    tokenizer.save_vocab(vocab, out_path)
    print(f"wrote {len(vocab)} tokens to {out_path}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    outdir = Path(args.outdir or "run")
    result = pipeline.run_training(config, outdir)
    best = result.best_report
    print(
        f"best round {result.best_round} epoch {result.best_epoch}: "
        f"validation weighted F1 {best.weighted_f1:.6f}"
    )
    print(f"outputs in {outdir}/ (checkpoint.bin, trainlog.jsonl, report.json, predictions.tsv)")
    return 0


def cmd_eval(args) -> int:
    ckpt = _require(args, "checkpoint")
    src = _require(args, "input")
    config = _load_config(args)
    model, vocab = pipeline.load_model(ckpt)
    examples = load_dataset(src, format=args.format, split="test")
    report, rows = pipeline.evaluate(
        model, vocab, examples, config, divide_by_classes=args.divide_by_classes
    )
    _print_report(report, f"{src} ({len(rows)} examples)")
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(
            json.dumps(metrics.report_to_dict(report), indent=2) + "\n", encoding="utf-8"
        )
        pipeline._write_predictions(outdir / "predictions.tsv", rows)
        print(f"wrote report.json and predictions.tsv to {outdir}/")
    return 0


def cmd_predict(args) -> int:
    ckpt = _require(args, "checkpoint")
    src = _require(args, "input")
    config = _load_config(args)
    model, vocab = pipeline.load_model(ckpt)
    rows = pipeline.predict(model, vocab, _read_texts(src, args.format), config)
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        pipeline._write_predictions(outdir / "predictions.tsv", rows)
        print(f"wrote {len(rows)} predictions to {outdir}/predictions.tsv")
    else:
        print("id\tgold\tpred\tp_fake\tp_real")
        for ex_id, gold, pred, p_fake, p_real in rows:
            print(f"{ex_id}\t{gold}\t{pred}\t{p_fake:.10f}\t{p_real:.10f}")
    return 0


def cmd_fuse(args) -> int:
    ckpt_a = _require(args, "checkpoint-a")
    ckpt_b = _require(args, "checkpoint-b")
    config = _load_config(args)
    model_a, vocab_a = pipeline.load_model(ckpt_a)
    model_b, vocab_b = pipeline.load_model(ckpt_b)
    datasets = pipeline.load_config_datasets(config, need=("validation",))
    head, val_f1 = pipeline.train_fused(
        config, model_a, vocab_a, model_b, vocab_b, datasets["validation"]
    )
    fused = pipeline.FusedModel(
        head=head, model_a=model_a, vocab_a=vocab_a, model_b=model_b, vocab_b=vocab_b
    )
    print(f"fusion head validation weighted F1 {val_f1:.6f}")
    outdir = Path(args.outdir or "run")
    outdir.mkdir(parents=True, exist_ok=True)
    pipeline.save_fusion(outdir / "fusion.bin", head)
    if "test" in datasets:
        report, rows = pipeline.evaluate_fused(config, fused, datasets["test"])
        _print_report(report, "fused model on test")
        (outdir / "report.json").write_text(
            json.dumps(metrics.report_to_dict(report), indent=2) + "\n", encoding="utf-8"
        )
        pipeline._write_predictions(outdir / "predictions.tsv", rows)
    print(f"wrote fusion head to {outdir}/fusion.bin")
    return 0


def cmd_augment(args) -> int:
    ckpt = _require(args, "checkpoint")
    config = _load_config(args)
    model, vocab = pipeline.load_model(ckpt)
    datasets = pipeline.load_config_datasets(config)
    hard = pipeline.harvest_hard_samples(
        model, vocab, datasets["train"], datasets["validation"], config
    )
    lexicon = pipeline.load_lexicon(args.lexicon or (config["data"]["lexicon"] or None))
    pairs = pipeline.augment(hard, lexicon, seed=config.seed, round_index=1)
    outdir = Path(args.outdir or "run")
    outdir.mkdir(parents=True, exist_ok=True)
    pipeline._write_augmented(outdir / "augmented.tsv", pairs)
    print(f"{len(hard)} misclassified examples, {len(pairs)} augmented copies")
    print(f"wrote {outdir}/augmented.tsv")
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args)
    datasets = pipeline.load_config_datasets(config, need=("train", "validation", "test"))
    rows = pipeline.ablation_suite(
        config, datasets["train"], datasets["validation"], datasets["test"]
    )
    table = pipeline.ablation_table(rows)
    print(table)
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "ablation.txt").write_text(table + "\n", encoding="utf-8")
        payload = {name: metrics.report_to_dict(rep) for name, rep in rows}
        (outdir / "ablation.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        print(f"wrote ablation.txt and ablation.json to {outdir}/")
    return 0


def cmd_top_split_tokens(args) -> int:
    inputs = _require(args, "input")
    vocab_path = _require(args, "vocab")
    vocab = tokenizer.load_vocab(vocab_path)
    stop = load_stopwords(args.stopwords)
    texts = []
    for path in inputs:
        cleaned = clean_dataset(load_dataset(path, format=args.format), stop)
        texts.extend(ex.tokens_text for ex in cleaned)
    rows = tokenizer.top_split_tokens(texts, vocab, k=args.k)
    print("word\tfrequency\tsubtokens")
    for word, freq, n_sub in rows:
        print(f"{word}\t{freq}\t{n_sub}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newsclf",
        description="Train and evaluate small fake-news classifiers with "
        "vocabulary extension, temperature-scheduled loss, adversarial "
        "training, and score-level fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, outdir=True, seed=True):
        p.add_argument("--debug", action="store_true", help="raise full tracebacks")
        if config:
            p.add_argument("--config", help="run config file (.toml or .json)")
            p.add_argument(
                "--override",
                action="append",
                default=[],
                metavar="KEY=VALUE",
                help="dotted config override, e.g. adv.epsilon=0.1 (repeatable)",
            )
        if outdir:
            p.add_argument("--outdir", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("preprocess", help="clean a dataset file")
    common(p, config=False, outdir=False, seed=False)
    p.add_argument("--input", help="TSV/CSV with id, text, label columns")
    p.add_argument("--format", choices=("tsv", "csv"), help="delimiter (default: by extension)")
    p.add_argument("--stopwords", help="stop-word list file (default: packaged English list)")
    p.add_argument("--output", help="cleaned TSV path")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-vocab", help="build a subword vocabulary from datasets")
    common(p, config=False, outdir=False, seed=False)
    p.add_argument("--input", action="append", help="dataset file (repeatable)")
    p.add_argument("--format", choices=("tsv", "csv"))
    p.add_argument("--stopwords")
    p.add_argument("--target-size", type=int, default=200)
    p.add_argument("--domain-tokens", help="comma-separated tokens to append (default: shipped six)")
    p.add_argument("--no-domain-tokens", action="store_true", help="skip the extension step")
    p.add_argument("--output", help="vocabulary file path")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train a model per the run config")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labelled dataset")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--input", help="labelled TSV/CSV")
    p.add_argument("--format", choices=("tsv", "csv"))
    p.add_argument(
        "--divide-by-classes",
        action="store_true",
        help="divide weighted sums by the class count (audit mode; halves binary scores)",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict labels for new text")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--input", help="TSV/CSV with a text column (id optional)")
    p.add_argument("--format", choices=("tsv", "csv"))
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fuse", help="train a fusion head over two checkpoints")
    common(p)
    p.add_argument("--checkpoint-a")
    p.add_argument("--checkpoint-b")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("augment", help="harvest misclassified examples and augment them")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--lexicon", help="synonym lexicon file (default: packaged list)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("ablate", help="run the six-row toggle ablation")
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("top-split-tokens", help="most frequent words split into 2+ subwords")
    common(p, config=False, outdir=False, seed=False)
    p.add_argument("--input", action="append", help="dataset file (repeatable)")
    p.add_argument("--format", choices=("tsv", "csv"))
    p.add_argument("--stopwords")
    p.add_argument("--vocab", help="vocabulary file written by build-vocab")
    p.add_argument("--k", type=int, default=6)
    p.set_defaults(func=cmd_top_split_tokens)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        if args.debug:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        if args.debug:
            raise
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
