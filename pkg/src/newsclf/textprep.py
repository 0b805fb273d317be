"""Dataset ingestion and text cleaning.

Cleaning lowercases, strips URLs and everything outside [a-z0-9 space
hyphen], and removes a fixed English stop-word list shipped with the
package. The hyphen survives so tokens like "covid-19" stay intact.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")

_URL_RE = re.compile(r"(?:https?://|www\.)\S*")
_BAD_CHAR_RE = re.compile(r"[^a-z0-9 \-]")


class EmptyAfterCleaning(ValueError):
    """Cleaning removed every token of the input."""


class MalformedRow(ValueError):
    def __init__(self, row: int, detail: str):
        super().__init__(f"row {row}: {detail}")
        self.row = row


class UnknownLabel(ValueError):
    def __init__(self, row: int, value: str):
        super().__init__(f"row {row}: unknown label {value!r}")
        self.row = row
        self.value = value


@dataclass(frozen=True)
class NewsExample:
    """One raw labelled sentence. Labels: fake=0, real=1."""

    id: str
    raw_text: str
    label: int
    split: str = "train"


@dataclass(frozen=True)
class CleanedExample:
    id: str
    tokens_text: str
    label: int


@dataclass(frozen=True)
class DatasetStats:
    split_counts: dict
    label_counts: dict
    mean_tokens: float


def load_stopwords(path=None) -> frozenset:
    """Read one word per line; default is the packaged English list."""
    if path is None:
        text = (
            resources.files("newsclf").joinpath("data/stopwords_en.txt").read_text("utf-8")
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def clean_text(raw: str, stopwords: frozenset) -> str:
    """Lowercase, drop URLs and out-of-alphabet characters, remove stop words.

    Idempotent for a fixed stop-word set. Raises EmptyAfterCleaning when
    nothing survives; callers decide whether to drop or keep a sentinel.
    """
    s = raw.lower()
    s = _URL_RE.sub(" ", s)
    s = _BAD_CHAR_RE.sub(" ", s)
    # the URL regex needs a scheme or www. prefix; anything else that still
    # carries "http" is a mangled link and goes too
    words = [w for w in s.split() if "http" not in w and w not in stopwords]
    out = " ".join(words)
    if not out:
        raise EmptyAfterCleaning(f"nothing left of {raw[:40]!r}")
    return out


def clean_example(ex: NewsExample, stopwords: frozenset) -> CleanedExample:
    return CleanedExample(id=ex.id, tokens_text=clean_text(ex.raw_text, stopwords), label=ex.label)


def clean_dataset(examples: Iterable[NewsExample], stopwords: frozenset) -> list:
    """Clean every example, dropping (with a warning) any that clean to empty."""
    out = []
    dropped = 0
    for ex in examples:
        try:
            out.append(clean_example(ex, stopwords))
        except EmptyAfterCleaning:
            dropped += 1
            log.warning("dropping example %s: empty after cleaning", ex.id)
    if dropped:
        log.warning("dropped %d/%d examples that cleaned to empty", dropped, dropped + len(out))
    return out


_LABELS = {"fake": 0, "real": 1, "0": 0, "1": 1}


def load_dataset(path, format: str | None = None, split: str = "train") -> list:
    """Parse a delimited file with header columns id, text, label.

    Delimiter comes from the extension (.tsv tab, .csv comma) unless
    `format` overrides it. Label values are case-insensitive fake/real or
    0/1. Error row indices are 1-based over data rows.
    """
    path = str(path)
    if format is None:
        format = "tsv" if path.lower().endswith(".tsv") else "csv"
    if format not in ("tsv", "csv"):
        raise ValueError(f"format must be tsv or csv, got {format!r}")
    delim = "\t" if format == "tsv" else ","
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")

    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delim)
        header = next(reader, None)
        if header is None:
            raise MalformedRow(0, "missing header row")
        names = [h.strip().lower() for h in header]
        try:
            id_col = names.index("id")
            text_col = names.index("text")
            label_col = names.index("label")
        except ValueError:
            raise MalformedRow(0, f"header must name id, text, label; got {names}") from None
        for i, row in enumerate(reader, start=1):
            if len(row) != len(names):
                raise MalformedRow(i, f"expected {len(names)} columns, got {len(row)}")
            raw_label = row[label_col].strip().lower()
            if raw_label not in _LABELS:
                raise UnknownLabel(i, row[label_col])
            text = row[text_col]
            if not text.strip():
                raise MalformedRow(i, "empty text")
            out.append(
                NewsExample(id=row[id_col], raw_text=text, label=_LABELS[raw_label], split=split)
            )
    return out


def save_dataset(examples: Iterable[NewsExample], path, format: str | None = None) -> None:
    """Inverse of load_dataset: header id/text/label, labels as fake/real."""
    path = str(path)
    if format is None:
        format = "tsv" if path.lower().endswith(".tsv") else "csv"
    delim = "\t" if format == "tsv" else ","
    names = {0: "fake", 1: "real"}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delim, lineterminator="\n")
        writer.writerow(["id", "text", "label"])
        for ex in examples:
            writer.writerow([ex.id, ex.raw_text, names[ex.label]])


def dataset_stats(examples: Sequence) -> DatasetStats:
    """Counts per split and label plus mean whitespace-token count.

    Works on raw and cleaned examples alike; cleaned ones count tokens of
    the cleaned text and fall under a single "train" split bucket.
    """
    split_counts: dict = {}
    label_counts: dict = {}
    total_tokens = 0
    n = 0
    for ex in examples:
        text = getattr(ex, "tokens_text", None)
        if text is None:
            text = ex.raw_text
        split = getattr(ex, "split", "train")
        split_counts[split] = split_counts.get(split, 0) + 1
        label_counts[ex.label] = label_counts.get(ex.label, 0) + 1
        total_tokens += len(text.split())
        n += 1
    mean = total_tokens / n if n else 0.0
    return DatasetStats(split_counts=split_counts, label_counts=label_counts, mean_tokens=mean)
