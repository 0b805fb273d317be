"""Fast-gradient-method perturbation of the embedding layer.

One training step runs a clean forward/backward, builds the perturbation
r_adv = -epsilon * g / ||g||_2 from the log-likelihood gradient g at the
embedding output (so r_adv points up the loss surface), reruns the same
batch on the perturbed embeddings with identical dropout masks, and blends
the two parameter gradients. Parameters themselves are never touched here;
the optimizer owns updates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from newsclf import encoder as enc
from newsclf.ndtensor import Tensor, add, backward, zero_grad
from newsclf.objective import batch_loss_tensor

DEGENERATE_NORM = 1e-12


class DegenerateGradient(ArithmeticError):
    """Gradient too small to define a perturbation direction."""


@dataclass(frozen=True)
class AdvConfig:
    """epsilon = 0 is allowed and yields a zero perturbation (useful for
    A/B tests); negative budgets are rejected."""

    enabled: bool = False
    epsilon: float = 0.5
    combine_weight: float = 0.5
    per_token_norm: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not (0.0 <= self.combine_weight <= 1.0):
            raise ValueError(f"combine_weight must be in [0, 1], got {self.combine_weight}")


@dataclass(frozen=True)
class PerturbationRecord:
    r_adv: np.ndarray
    gradient_norm: float


def fgm_perturbation(grad_embed, epsilon: float, per_token: bool = False) -> PerturbationRecord:
    """r_adv = -epsilon * g / ||g||_2 over the whole tensor.

    grad_embed is the log-likelihood gradient (the negated loss gradient).
    With per_token=True each position's vector is normalized separately to
    length epsilon; zero rows stay zero.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    g = np.asarray(getattr(grad_embed, "data", grad_embed), dtype=np.float64)
    norm = float(np.linalg.norm(g))
    if norm < DEGENERATE_NORM:
        raise DegenerateGradient(f"gradient norm {norm:.3e} below {DEGENERATE_NORM:.0e}")
    if per_token:
        row_norms = np.linalg.norm(g, axis=-1, keepdims=True)
        safe = np.where(row_norms < DEGENERATE_NORM, 1.0, row_norms)
        r = -epsilon * np.where(row_norms < DEGENERATE_NORM, 0.0, g / safe)
    else:
        r = -epsilon * g / norm
    return PerturbationRecord(r_adv=r, gradient_norm=norm)


@dataclass(frozen=True)
class Batch:
    """Encoded minibatch: (B, L) ids and mask, (B,) labels."""

    ids: np.ndarray
    mask: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.ids.shape[0]


@dataclass(frozen=True)
class StepResult:
    clean_loss: float
    adv_loss: Optional[float]
    gradient_norm: Optional[float]
    skipped_adv: bool


def adversarial_training_step(
    model,
    batch: Batch,
    alpha: float,
    adv: AdvConfig,
    dropout_seed: Optional[int] = None,
) -> StepResult:
    """Populate parameter gradients for one batch.

    With adv.enabled the gradients are (1-w) * clean + w * adversarial;
    otherwise they are the plain clean gradients. A degenerate clean
    gradient skips the adversarial pass and leaves the clean gradients in
    place with skipped_adv set.
    """
    params = model.params
    if dropout_seed is None:
        dropout_seed = int(np.random.SeedSequence().entropy % (2 ** 32))

    def run_pass(extra: Optional[np.ndarray]):
        # fresh rng per pass, same seed: identical dropout masks, so the
        # loss difference is attributable to the perturbation alone
        rng = np.random.default_rng(dropout_seed)
        zero_grad(params)
        emb = enc.embed_batch(model, batch.ids)
        if extra is not None:
            emb = add(emb, Tensor(extra))
        feats = enc.forward(model, emb, batch.mask, train=True, rng=rng)
        loss = batch_loss_tensor(feats.logits, batch.labels, alpha)
        backward(loss)
        return loss.item(), emb

    clean_loss, emb = run_pass(None)
    if not adv.enabled:
        return StepResult(clean_loss=clean_loss, adv_loss=None, gradient_norm=None, skipped_adv=False)

    clean_grads = {k: p.grad.copy() for k, p in params.items()}
    try:
        # backward stored d(loss)/d(emb); the log-likelihood gradient is its negation
        rec = fgm_perturbation(-emb.grad, adv.epsilon, per_token=adv.per_token_norm)
    except DegenerateGradient:
        for k, p in params.items():
            p.grad = clean_grads[k]
        return StepResult(clean_loss=clean_loss, adv_loss=None, gradient_norm=None, skipped_adv=True)

    adv_loss, _ = run_pass(rec.r_adv)
    w = adv.combine_weight
    for k, p in params.items():
        p.grad = (1.0 - w) * clean_grads[k] + w * p.grad
    return StepResult(
        clean_loss=clean_loss,
        adv_loss=adv_loss,
        gradient_norm=rec.gradient_norm,
        skipped_adv=False,
    )
