"""Miniature pre-norm transformer encoder classifier and the fusion head.

Desk-scale stand-in for the large pretrained encoders: token + learned
position embeddings, a stack of pre-norm multi-head self-attention and
feed-forward blocks, final layer norm, position-0 pooling, and a linear
classifier. A separate one-hidden-layer head fuses the predicted features
of two trained models at the score level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from newsclf.ndtensor import (
    ShapeMismatch,
    Tensor,
    add,
    concat,
    dropout,
    embedding,
    gelu_tanh_approx,
    layer_norm,
    matmul,
    mul,
    relu,
    reshape,
    slice_,
    softmax_scaled,
    transpose,
)

MASK_SCORE = -1e9  # low enough that softmax underflows masked slots to exact 0


class InvalidConfig(ValueError):
    pass


class IdOutOfRange(IndexError):
    pass


class WidthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int = 128
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 2
    ff_dim: int = 128
    num_classes: int = 2
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 4:
            raise InvalidConfig("vocab_size must cover the three specials plus text")
        if self.max_len < 2:
            raise InvalidConfig("max_len must be >= 2")
        if self.hidden_dim % self.num_heads != 0:
            raise InvalidConfig(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}"
            )
        if self.num_classes != 2:
            raise InvalidConfig("this task is binary; num_classes must be 2")
        if not (0.0 <= self.dropout < 1.0):
            raise InvalidConfig(f"dropout must be in [0, 1), got {self.dropout}")
        if min(self.num_layers, self.hidden_dim, self.ff_dim) < 1:
            raise InvalidConfig("num_layers, hidden_dim, ff_dim must be >= 1")


def parameter_count(config: ModelConfig) -> int:
    """Closed-form trainable-parameter count for a config.

    V*H + L*H embeddings; per layer 4*(H*H + H) attention + two layer norms
    (2H each) + H*F + F + F*H + H feed-forward; final norm 2H; classifier
    H*C + C.
    """
    v, l, h, f, c = (
        config.vocab_size,
        config.max_len,
        config.hidden_dim,
        config.ff_dim,
        config.num_classes,
    )
    per_layer = 4 * (h * h + h) + 2 * (2 * h) + (h * f + f) + (f * h + h)
    return v * h + l * h + config.num_layers * per_layer + 2 * h + h * c + c


@dataclass
class EncoderModel:
    """Named parameter tensors plus the config that shaped them."""

    config: ModelConfig
    params: dict

    @property
    def n_params(self) -> int:
        return sum(p.data.size for p in self.params.values())


def init_model(config: ModelConfig) -> EncoderModel:
    """Deterministic init from config.seed: weight matrices from N(0, 0.02),
    biases zero, layer-norm gains one."""
    rng = np.random.default_rng(config.seed)
    h, f = config.hidden_dim, config.ff_dim

    def w(*shape):
        return Tensor(rng.normal(0.0, 0.02, size=shape), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape), requires_grad=True)

    params = {
        "tok_emb": w(config.vocab_size, h),
        "pos_emb": w(config.max_len, h),
    }
    for i in range(config.num_layers):
        pre = f"layer{i}."
        params[pre + "ln1.gain"] = ones(h)
        params[pre + "ln1.bias"] = zeros(h)
        for name in ("wq", "wk", "wv", "wo"):
            params[pre + "attn." + name] = w(h, h)
        for name in ("bq", "bk", "bv", "bo"):
            params[pre + "attn." + name] = zeros(h)
        params[pre + "ln2.gain"] = ones(h)
        params[pre + "ln2.bias"] = zeros(h)
        params[pre + "ff.w1"] = w(h, f)
        params[pre + "ff.b1"] = zeros(f)
        params[pre + "ff.w2"] = w(f, h)
        params[pre + "ff.b2"] = zeros(h)
    params["final_ln.gain"] = ones(h)
    params["final_ln.bias"] = zeros(h)
    params["cls.w"] = w(h, config.num_classes)
    params["cls.b"] = zeros(config.num_classes)

    model = EncoderModel(config=config, params=params)
    assert model.n_params == parameter_count(config)
    return model


def _check_ids(ids: np.ndarray, config: ModelConfig) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise IdOutOfRange(
            f"token ids must lie in [0, {config.vocab_size}), got "
            f"[{ids.min()}, {ids.max()}]"
        )
    if ids.shape[-1] > config.max_len:
        raise IdOutOfRange(f"sequence length {ids.shape[-1]} exceeds max_len {config.max_len}")
    return ids


def embed(model: EncoderModel, seq) -> Tensor:
    """Token + position embedding for one sequence: (len, hidden).

    This output is the adversarial perturbation site; pass the (possibly
    perturbed) result to forward.
    """
    ids = _check_ids(getattr(seq, "ids", seq), model.config)
    tok = embedding(model.params["tok_emb"], ids)
    pos = slice_(model.params["pos_emb"], slice(0, ids.shape[-1]))
    return add(tok, pos)


def embed_batch(model: EncoderModel, ids_batch: np.ndarray) -> Tensor:
    """Batched embed: (batch, len) ids to (batch, len, hidden)."""
    ids = _check_ids(ids_batch, model.config)
    if ids.ndim != 2:
        raise ShapeMismatch(f"expected (batch, len) ids, got {ids.shape}")
    tok = embedding(model.params["tok_emb"], ids)
    pos = slice_(model.params["pos_emb"], slice(0, ids.shape[-1]))
    return add(tok, pos)


@dataclass(frozen=True)
class PredictedFeatures:
    """Pre-softmax logits and the pooled position-0 vector; batched when the
    forward input was batched."""

    logits: Tensor
    pooled: Tensor


def forward(model: EncoderModel, embeddings: Tensor, mask, train: bool = False, rng=None) -> PredictedFeatures:
    """Run the encoder stack over embedded input.

    mask is 1 for real tokens, 0 for padding; masked key positions get a
    -1e9 attention score, which underflows to an exactly-zero weight, so
    padding content cannot reach any real position. Dropout runs only when
    train=True with an rng; reusing a seed reproduces the masks exactly,
    which the adversarial step relies on.
    """
    cfg = model.config
    x = embeddings
    squeeze = x.data.ndim == 2
    if squeeze:
        x = reshape(x, (1,) + x.data.shape)
    if x.data.ndim != 3 or x.data.shape[-1] != cfg.hidden_dim:
        raise ShapeMismatch(f"embeddings must be (batch, len, {cfg.hidden_dim}), got {x.data.shape}")
    b, L, h = x.data.shape
    mask = np.asarray(mask, dtype=np.float64).reshape(b, L)
    if not mask[:, 0].all():
        raise ShapeMismatch("position 0 must be unmasked in every row")

    n_heads = cfg.num_heads
    dh = h // n_heads
    scale = 1.0 / np.sqrt(dh)
    # additive score bias: 0 on real keys, -1e9 on padding keys
    score_bias = Tensor((mask - 1.0).reshape(b, 1, 1, L) * -MASK_SCORE)
    rate = cfg.dropout if train else 0.0
    if rate > 0.0 and rng is None:
        raise ValueError("train=True with nonzero dropout requires an rng")

    def maybe_drop(t: Tensor) -> Tensor:
        if rate > 0.0 and rng is not None:
            return dropout(t, rate, rng)
        return t

    def heads_split(t: Tensor) -> Tensor:
        return transpose(reshape(t, (b, L, n_heads, dh)), (0, 2, 1, 3))

    p = model.params
    for i in range(cfg.num_layers):
        pre = f"layer{i}."
        hn = layer_norm(x, p[pre + "ln1.gain"], p[pre + "ln1.bias"])
        q = heads_split(add(matmul(hn, p[pre + "attn.wq"]), p[pre + "attn.bq"]))
        k = heads_split(add(matmul(hn, p[pre + "attn.wk"]), p[pre + "attn.bk"]))
        v = heads_split(add(matmul(hn, p[pre + "attn.wv"]), p[pre + "attn.bv"]))
        scores = add(mul(matmul(q, transpose(k, (0, 1, 3, 2))), Tensor(np.float64(scale))), score_bias)
        attn = softmax_scaled(scores, 1.0)
        ctx = reshape(transpose(matmul(attn, v), (0, 2, 1, 3)), (b, L, h))
        out = add(matmul(ctx, p[pre + "attn.wo"]), p[pre + "attn.bo"])
        x = add(x, maybe_drop(out))

        hn = layer_norm(x, p[pre + "ln2.gain"], p[pre + "ln2.bias"])
        ff = add(matmul(gelu_tanh_approx(add(matmul(hn, p[pre + "ff.w1"]), p[pre + "ff.b1"])), p[pre + "ff.w2"]), p[pre + "ff.b2"])
        x = add(x, maybe_drop(ff))

    x = layer_norm(x, p["final_ln.gain"], p["final_ln.bias"])
    pooled = slice_(x, (slice(None), 0, slice(None)))
    logits = add(matmul(pooled, p["cls.w"]), p["cls.b"])
    if squeeze:
        pooled = reshape(pooled, (h,))
        logits = reshape(logits, (cfg.num_classes,))
    return PredictedFeatures(logits=logits, pooled=pooled)


FUSION_MODES = ("logits", "logits+pooled")


@dataclass
class FusionHead:
    """One-hidden-layer relu MLP over the concatenated source features."""

    mode: str
    in_width: int
    params: dict = field(repr=False)


def fusion_in_width(mode: str, hidden_a: int = 0, hidden_b: int = 0, num_classes: int = 2) -> int:
    if mode == "logits":
        return 2 * num_classes
    if mode == "logits+pooled":
        return 2 * num_classes + hidden_a + hidden_b
    raise InvalidConfig(f"fusion mode must be one of {FUSION_MODES}, got {mode!r}")


def init_fusion_head(
    mode: str = "logits",
    hidden_a: int = 0,
    hidden_b: int = 0,
    fusion_hidden: int = 16,
    num_classes: int = 2,
    seed: int = 0,
    passthrough: bool = True,
    passthrough_source: int = 0,
) -> FusionHead:
    """Build the fusion MLP.

    With passthrough=True (the default) the weights start out computing
    exactly one source's logits — relu(z) - relu(-z) = z wiring, source
    chosen by passthrough_source — so an untrained fused model already
    matches that source; training can only move away from that if the loss
    improves. Requires fusion_hidden >= 2 * num_classes.
    passthrough=False gives N(0, 0.02) weights instead.
    """
    in_width = fusion_in_width(mode, hidden_a, hidden_b, num_classes)
    rng = np.random.default_rng(seed)
    if passthrough:
        if fusion_hidden < 2 * num_classes:
            raise InvalidConfig(
                f"passthrough wiring needs fusion_hidden >= {2 * num_classes}, got {fusion_hidden}"
            )
        if passthrough_source not in (0, 1):
            raise InvalidConfig("passthrough_source must be 0 or 1")
        off = passthrough_source * num_classes
        w1 = np.zeros((in_width, fusion_hidden))
        w2 = np.zeros((fusion_hidden, num_classes))
        for c in range(num_classes):
            w1[off + c, 2 * c] = 1.0
            w1[off + c, 2 * c + 1] = -1.0
            w2[2 * c, c] = 1.0
            w2[2 * c + 1, c] = -1.0
    else:
        w1 = rng.normal(0.0, 0.02, size=(in_width, fusion_hidden))
        w2 = rng.normal(0.0, 0.02, size=(fusion_hidden, num_classes))
    params = {
        "fusion.w1": Tensor(w1, requires_grad=True),
        "fusion.b1": Tensor(np.zeros(fusion_hidden), requires_grad=True),
        "fusion.w2": Tensor(w2, requires_grad=True),
        "fusion.b2": Tensor(np.zeros(num_classes), requires_grad=True),
    }
    return FusionHead(mode=mode, in_width=in_width, params=params)


def _feature_vector(head: FusionHead, fa: PredictedFeatures, fb: PredictedFeatures) -> Tensor:
    parts = [fa.logits, fb.logits]
    if head.mode == "logits+pooled":
        parts += [fa.pooled, fb.pooled]
    return concat(parts, axis=-1)


def fuse(head: FusionHead, fa: PredictedFeatures, fb: PredictedFeatures) -> Tensor:
    """Score-level fusion: concatenated features through relu MLP to logits."""
    x = _feature_vector(head, fa, fb)
    if x.data.shape[-1] != head.in_width:
        raise WidthMismatch(
            f"fusion head expects width {head.in_width}, features give {x.data.shape[-1]}"
        )
    squeeze = x.data.ndim == 1
    if squeeze:
        x = reshape(x, (1, head.in_width))
    h = relu(add(matmul(x, head.params["fusion.w1"]), head.params["fusion.b1"]))
    out = add(matmul(h, head.params["fusion.w2"]), head.params["fusion.b2"])
    if squeeze:
        out = reshape(out, (out.data.shape[-1],))
    return out
