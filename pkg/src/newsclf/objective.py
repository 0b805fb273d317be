"""Temperature-scaled softmax cross entropy and the phase schedule for it.

The loss exponentiates alpha * z (alpha is the inverse temperature, alpha
= 1/T). Large alpha sharpens the distribution, which boosts the gradient
magnitude on misclassified examples relative to easy ones; the schedule
anneals alpha downward over training. alpha = 1 is exactly the standard
cross entropy, on the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from newsclf.ndtensor import (
    NonPositiveAlpha,
    Tensor,
    logsumexp,
    mean_all,
    mul,
    softmax_scaled,
    sub,
    take_per_row,
)
from newsclf.ndtensor.tensor import _softmax_np


class EmptyBatch(ValueError):
    """batch_loss needs at least one example."""


@dataclass(frozen=True)
class TemperatureSchedule:
    """Piecewise-constant alpha over epochs: ((start, end_or_None, alpha), ...).

    Phases are contiguous from epoch 0 and the last phase is open-ended.
    """

    phases: tuple

    def __post_init__(self):
        if not self.phases:
            raise ValueError("schedule needs at least one phase")
        expected_start = 0
        for i, (start, end, alpha) in enumerate(self.phases):
            if start != expected_start:
                raise ValueError(f"phase {i} starts at {start}, expected {expected_start}")
            if alpha <= 0:
                raise NonPositiveAlpha(f"phase {i} alpha must be > 0, got {alpha}")
            last = i == len(self.phases) - 1
            if last:
                if end is not None:
                    raise ValueError("last phase must be open-ended (end None)")
            else:
                if end is None or end <= start:
                    raise ValueError(f"phase {i} end must exceed its start")
                expected_start = end

    @classmethod
    def default(cls) -> "TemperatureSchedule":
        return cls(phases=((0, 10, 4.0), (10, 20, 1.0), (20, None, 0.5)))

    @classmethod
    def from_pairs(cls, pairs: Sequence) -> "TemperatureSchedule":
        """Build from [[start_epoch, alpha], ...] as written in config files."""
        if not pairs:
            raise ValueError("empty schedule")
        starts = [int(p[0]) for p in pairs]
        if starts != sorted(set(starts)):
            raise ValueError("start epochs must be strictly increasing")
        phases = []
        for i, (start, alpha) in enumerate(pairs):
            end = starts[i + 1] if i + 1 < len(pairs) else None
            phases.append((int(start), end, float(alpha)))
        return cls(phases=tuple(phases))


def schedule_alpha(schedule: TemperatureSchedule, epoch: int) -> float:
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    for start, end, alpha in schedule.phases:
        if end is None or epoch < end:
            return alpha
    raise AssertionError("unreachable: last phase is open-ended")


@dataclass(frozen=True)
class LossValue:
    loss: float
    probs: np.ndarray
    grad: np.ndarray


def _as_array(logits) -> np.ndarray:
    return np.asarray(getattr(logits, "data", logits), dtype=np.float64)


def _lse(a: np.ndarray) -> np.ndarray:
    # loss goes through log-sum-exp rather than -log(p) so that extreme
    # logit gaps yield a large finite value instead of overflowing to inf
    m = a.max(axis=-1)
    return m + np.log(np.exp(a - m[..., None]).sum(axis=-1))


def heated_ce_loss(logits, label: int, alpha: float) -> LossValue:
    """-log softmax(alpha*z)[label]; gradient is alpha * (p - onehot(label))."""
    if alpha <= 0:
        raise NonPositiveAlpha(f"alpha must be > 0, got {alpha}")
    z = _as_array(logits)
    if z.ndim != 1:
        raise ValueError(f"expected a single logit row, got shape {z.shape}")
    if not (0 <= label < z.shape[0]):
        raise ValueError(f"label {label} out of range for {z.shape[0]} classes")
    p = _softmax_np(z, alpha)
    loss = _lse(alpha * z) - alpha * z[label]
    grad = alpha * p.copy()
    grad[label] -= alpha
    return LossValue(loss=float(loss), probs=p, grad=grad)


def batch_loss(logits, labels: Sequence, alpha: float) -> LossValue:
    """Mean of per-example losses; gradients carry the 1/B factor."""
    z = _as_array(logits)
    if z.ndim != 2:
        raise ValueError(f"expected B x classes logits, got shape {z.shape}")
    if z.shape[0] == 0:
        raise EmptyBatch("no examples")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (z.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match batch {z.shape[0]}")
    if alpha <= 0:
        raise NonPositiveAlpha(f"alpha must be > 0, got {alpha}")
    p = _softmax_np(z, alpha)
    b = z.shape[0]
    az = alpha * z
    loss = float((_lse(az) - az[np.arange(b), y]).mean())
    grad = alpha * p.copy()
    grad[np.arange(b), y] -= alpha
    grad /= b
    return LossValue(loss=loss, probs=p, grad=grad)


def batch_loss_tensor(logits: Tensor, labels: Sequence, alpha: float) -> Tensor:
    """Graph-building batch loss for end-to-end backprop.

    Uses the shift-stable identity -log p[y] = logsumexp(alpha*z) -
    (alpha*z)[y], so values and gradients agree with batch_loss.
    """
    if alpha <= 0:
        raise NonPositiveAlpha(f"alpha must be > 0, got {alpha}")
    if logits.data.ndim != 2 or logits.data.shape[0] == 0:
        raise EmptyBatch(f"expected non-empty B x classes logits, got {logits.data.shape}")
    y = np.asarray(labels, dtype=np.int64)
    az = mul(logits, Tensor(np.float64(alpha)))
    per_example = sub(logsumexp(az), take_per_row(az, y))
    return mean_all(per_example)
