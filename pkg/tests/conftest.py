"""Shared helpers: finite-difference gradients and miniature fixtures."""

import numpy as np
import pytest

from newsclf import encoder
from newsclf.textprep import NewsExample


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function, element by element.

    Deliberately independent of the autodiff engine: plain loops, no Tensor.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * h)
    return g


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # absolute floor keeps FD noise on near-zero elements from dominating
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def tiny_model(seed: int = 0, vocab_size: int = 12, hidden: int = 4,
               layers: int = 1, heads: int = 2, ff: int = 8,
               max_len: int = 6) -> encoder.EncoderModel:
    cfg = encoder.ModelConfig(
        vocab_size=vocab_size, max_len=max_len, hidden_dim=hidden,
        num_layers=layers, num_heads=heads, ff_dim=ff,
        num_classes=2, dropout=0.0, seed=seed)
    return encoder.init_model(cfg)


@pytest.fixture
def micro_examples():
    """Tiny keyword-separable dataset; fake=0, real=1."""
    fake_words = ["hoax", "scam", "miracle"]
    real_words = ["official", "confirmed", "report"]
    filler = ["virus", "city", "water", "people", "news", "doctor"]
    rng = np.random.default_rng(7)
    out = []
    for i in range(40):
        label = i % 2
        pool = real_words if label else fake_words
        words = [str(rng.choice(pool))] + list(rng.choice(filler, size=4, replace=False))
        rng.shuffle(words)
        out.append(NewsExample(id=f"m{i}", raw_text=" ".join(words), label=label,
                               split="train" if i < 30 else "validation"))
    return out[:30], out[30:]
