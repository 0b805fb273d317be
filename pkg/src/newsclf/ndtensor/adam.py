"""Adam with bias correction and a linear learning-rate warmup."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from newsclf.ndtensor.tensor import Tensor


class MissingGrad(RuntimeError):
    """adam_step was called before gradients were populated."""


@dataclass
class AdamState:
    """Per-parameter moment buffers plus the optimizer hyperparameters.

    Buffers are keyed by parameter name so the state survives checkpointing
    and stays aligned even if the parameter dict is rebuilt.
    """

    lr: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup: float = 0.1
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def warmup_lr(base_lr: float, global_step: int, total_steps: int, warmup: float) -> float:
    """Ramp linearly from 0 to base_lr over the first ``warmup`` fraction of steps."""
    ramp_steps = warmup * total_steps
    if ramp_steps <= 0:
        return base_lr
    return base_lr * min(1.0, global_step / ramp_steps)


def adam_step(
    params: dict[str, Tensor],
    state: AdamState,
    global_step: int,
    total_steps: int,
) -> float:
    """Apply one Adam update in place; returns the effective learning rate used."""
    lr = warmup_lr(state.lr, global_step, total_steps, state.warmup)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        if p.grad is None:
            raise MissingGrad(f"parameter {name!r} has no gradient")
        g = p.grad
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return lr
