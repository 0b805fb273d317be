"""Weighted precision/recall/F1, accuracy, and confusion counts.

The weighted average uses support fractions w_i = support_i / total:
weighted P = sum(w_i * P_i), same for recall, and weighted F1 is the
harmonic mean 2PR/(P+R) of those two weighted values (not the per-class-F1
weighted mean; the two differ in general). An optional divide_by_classes
mode additionally divides the weighted sums by the class count, for audits
of the alternative reading of the formula; it is not the default because
it halves every score in the binary case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

N_CLASSES = 2


class LengthMismatch(ValueError):
    pass


class EmptyCounts(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    support: np.ndarray
    total: int


@dataclass(frozen=True)
class ClassificationReport:
    """Plain result record; construction does not validate, so rows copied
    from external tables can be rendered as-is."""

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    weights: np.ndarray
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float
    undefined_precision: tuple = ()
    undefined_recall: tuple = ()


def _validate_binary(name: str, values: np.ndarray) -> None:
    bad = ~np.isin(values, (0, 1))
    if bad.any():
        raise ValueError(f"{name} must contain only 0/1, got {values[bad][:5]}")


def confusion_counts(predictions: Sequence, labels: Sequence) -> ConfusionCounts:
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.ndim != 1:
        raise LengthMismatch(f"predictions {preds.shape} vs labels {labs.shape}")
    if preds.size == 0:
        raise EmptyCounts("no examples")
    _validate_binary("predictions", preds)
    _validate_binary("labels", labs)
    tp = np.zeros(N_CLASSES, dtype=np.int64)
    fp = np.zeros(N_CLASSES, dtype=np.int64)
    fn = np.zeros(N_CLASSES, dtype=np.int64)
    support = np.zeros(N_CLASSES, dtype=np.int64)
    for c in range(N_CLASSES):
        tp[c] = int(((preds == c) & (labs == c)).sum())
        fp[c] = int(((preds == c) & (labs != c)).sum())
        fn[c] = int(((preds != c) & (labs == c)).sum())
        support[c] = int((labs == c).sum())
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, support=support, total=int(preds.size))


def weighted_report(counts: ConfusionCounts, divide_by_classes: bool = False) -> ClassificationReport:
    """Support-weighted report from confusion counts.

    Zero-denominator precision or recall scores 0 and the class index is
    recorded in the report's undefined_* fields.
    """
    if counts.total <= 0:
        raise EmptyCounts("total must be positive")
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = np.zeros(N_CLASSES)
    recall = np.zeros(N_CLASSES)
    undef_p = []
    undef_r = []
    for c in range(N_CLASSES):
        dp = tp[c] + fp[c]
        dr = tp[c] + fn[c]
        if dp == 0:
            undef_p.append(c)
        else:
            precision[c] = tp[c] / dp
        if dr == 0:
            undef_r.append(c)
        else:
            recall[c] = tp[c] / dr
    f1 = np.zeros(N_CLASSES)
    for c in range(N_CLASSES):
        s = precision[c] + recall[c]
        if s > 0:
            f1[c] = 2 * precision[c] * recall[c] / s

    weights = counts.support / counts.total
    wp = float(weights @ precision)
    wr = float(weights @ recall)
    if divide_by_classes:
        wp /= N_CLASSES
        wr /= N_CLASSES
    wf1 = 2 * wp * wr / (wp + wr) if (wp + wr) > 0 else 0.0
    accuracy = float(counts.tp.sum() / counts.total)
    return ClassificationReport(
        precision=precision,
        recall=recall,
        f1=f1,
        weights=weights,
        weighted_precision=wp,
        weighted_recall=wr,
        weighted_f1=wf1,
        accuracy=accuracy,
        undefined_precision=tuple(undef_p),
        undefined_recall=tuple(undef_r),
    )


def report_to_table(report: ClassificationReport) -> str:
    """One row, six decimals, column order Accuracy Precision Recall F1."""
    return (
        f"{report.accuracy:.6f} {report.weighted_precision:.6f} "
        f"{report.weighted_recall:.6f} {report.weighted_f1:.6f}"
    )


def report_to_dict(report: ClassificationReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "weighted_precision": report.weighted_precision,
        "weighted_recall": report.weighted_recall,
        "weighted_f1": report.weighted_f1,
        "per_class": {
            str(c): {
                "precision": float(report.precision[c]),
                "recall": float(report.recall[c]),
                "f1": float(report.f1[c]),
                "weight": float(report.weights[c]),
            }
            for c in range(N_CLASSES)
        },
        "undefined_precision": list(report.undefined_precision),
        "undefined_recall": list(report.undefined_recall),
    }
