"""Reverse-mode automatic differentiation over dense float64 arrays.

Every op builds a node recording its parents and a backward closure;
``backward`` walks the recorded graph in reverse topological order and
accumulates gradients into every reachable tensor that requires them.
All values are stored row-major as numpy float64.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible for the requested op."""


class NotScalarLoss(ValueError):
    """backward() was handed a non-scalar output."""


class GraphAlreadyConsumed(RuntimeError):
    """backward() was called twice on the same output without a new forward."""


class NonPositiveAlpha(ValueError):
    """Temperature must be strictly positive."""


_GRAD_ENABLED = True
DEBUG_CHECK_FINITE = False


def set_debug_check_finite(enabled: bool) -> None:
    """Toggle NaN/Inf assertions after every forward op (slow; for debugging)."""
    global DEBUG_CHECK_FINITE
    DEBUG_CHECK_FINITE = enabled


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block. Safe to nest."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A shape-tagged float64 array, optionally tracked by the autodiff graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        backward(self)

    # operator sugar; everything routes through the module-level ops
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Create an op output, recording the backward rule when grads are enabled."""
    if DEBUG_CHECK_FINITE and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite value produced by a forward op")
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    a, b = _wrap(a), _wrap(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}") from exc

    def backward_fn(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    a, b = _wrap(a), _wrap(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}") from exc

    def backward_fn(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference with numpy broadcasting."""
    a, b = _wrap(a), _wrap(b)
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}") from exc

    def backward_fn(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _node(data, (a, b), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product, batched over leading axes: dA = dC @ Bᵀ, dB = Aᵀ @ dC."""
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeMismatch(f"matmul needs >=2-D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeMismatch(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward_fn(g: np.ndarray) -> None:
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _node(data, (a, b), backward_fn)


def relu(x: Tensor) -> Tensor:
    x = _wrap(x)
    data = np.maximum(x.data, 0.0)

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * (x.data > 0.0))

    return _node(data, (x,), backward_fn)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu_tanh_approx(x: Tensor) -> Tensor:
    """gelu(x) ~= 0.5 x (1 + tanh(c (x + 0.044715 x^3))), c = sqrt(2/pi)."""
    x = _wrap(x)
    inner = _GELU_C * (x.data + 0.044715 * x.data**3)
    t = np.tanh(inner)
    data = 0.5 * x.data * (1.0 + t)

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
            local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t**2) * d_inner
            _accumulate(x, g * local)

    return _node(data, (x,), backward_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then scale and shift.

    A constant vector normalizes to zeros (variance guarded by eps), so the
    output there is exactly ``bias``.
    """
    x, gain, bias = _wrap(x), _wrap(gain), _wrap(bias)
    n = x.data.shape[-1]
    if gain.data.shape != (n,) or bias.data.shape != (n,):
        raise ShapeMismatch(f"layer_norm affine params must be shape ({n},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gain.data + bias.data

    def backward_fn(g: np.ndarray) -> None:
        if gain.requires_grad:
            _accumulate(gain, (g * xhat).reshape(-1, n).sum(axis=0))
        if bias.requires_grad:
            _accumulate(bias, g.reshape(-1, n).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv * (dxhat - m1 - xhat * m2))

    return _node(data, (x, gain, bias), backward_fn)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout. rate 0 is the identity; eval mode is simply not calling it."""
    x = _wrap(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    data = x.data * keep

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * keep)

    return _node(data, (x,), backward_fn)


def _softmax_np(z: np.ndarray, alpha: float, axis: int = -1) -> np.ndarray:
    """Shared stable softmax of alpha*z; the single code path for all callers."""
    a = alpha * z
    a = a - a.max(axis=axis, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_scaled(z: Tensor, alpha: float, axis: int = -1) -> Tensor:
    """p_m = exp(alpha*z_m) / sum_j exp(alpha*z_j), computed with max-subtraction."""
    z = _wrap(z)
    if alpha <= 0.0:
        raise NonPositiveAlpha(f"temperature scale must be > 0, got {alpha}")
    p = _softmax_np(z.data, alpha, axis=axis)

    def backward_fn(g: np.ndarray) -> None:
        if z.requires_grad:
            dot = (g * p).sum(axis=axis, keepdims=True)
            _accumulate(z, alpha * p * (g - dot))

    return _node(p, (z,), backward_fn)


def logsumexp(x: Tensor) -> Tensor:
    """log sum exp over the last axis (axis dropped); backward is the softmax."""
    x = _wrap(x)
    m = x.data.max(axis=-1, keepdims=True)
    s = np.exp(x.data - m).sum(axis=-1, keepdims=True)
    data = (m + np.log(s))[..., 0]

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            p = np.exp(x.data - m) / s
            _accumulate(x, g[..., None] * p)

    return _node(data, (x,), backward_fn)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: out[..., :] = table[ids[...], :]."""
    table = _wrap(table)
    ids = np.asarray(ids)
    data = table.data[ids]

    def backward_fn(g: np.ndarray) -> None:
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, ids, g)
            _accumulate(table, gt)

    return _node(data, (table,), backward_fn)


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [_wrap(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g: np.ndarray) -> None:
        moved = np.moveaxis(g, axis, 0)
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                _accumulate(p, np.moveaxis(moved[lo:hi], 0, axis))

    return _node(data, tuple(parts), backward_fn)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _wrap(x)
    data = x.data.reshape(shape)

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g.reshape(x.data.shape))

    return _node(data, (x,), backward_fn)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    x = _wrap(x)
    data = np.transpose(x.data, axes)
    inverse = np.argsort(axes)

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, np.transpose(g, inverse))

    return _node(data, (x,), backward_fn)


def slice_(x: Tensor, key) -> Tensor:
    """Basic slicing/indexing; gradient scatters back into a zero buffer."""
    x = _wrap(x)
    data = x.data[key]

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[key] = g
            _accumulate(x, gx)

    return _node(data, (x,), backward_fn)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _wrap(x)
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            if axis is None:
                _accumulate(x, np.broadcast_to(g, x.data.shape).copy())
            else:
                ge = g if keepdims else np.expand_dims(g, axis)
                _accumulate(x, np.broadcast_to(ge, x.data.shape).copy())

    return _node(data, (x,), backward_fn)


def mean_all(x: Tensor) -> Tensor:
    """Arithmetic mean over every element, as a scalar node."""
    x = _wrap(x)
    n = x.data.size
    data = x.data.mean()

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, np.full(x.data.shape, float(g) / n))

    return _node(data, (x,), backward_fn)


def take_per_row(x: Tensor, idx: np.ndarray) -> Tensor:
    """out[i] = x[i, idx[i]] for a 2-D input; used to pick per-example logits."""
    x = _wrap(x)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(x.data.shape[0])
    data = x.data[rows, idx]

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[rows, idx] = g
            _accumulate(x, gx)

    return _node(data, (x,), backward_fn)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


class Graph:
    """Topologically ordered closure of one output's compute history.

    Node inputs always precede the node itself; the recording is acyclic by
    construction (an op's parents exist before its output).
    """

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, output: Tensor) -> "Graph":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad tensor reachable from ``loss``.

    Raises NotScalarLoss for non-scalar outputs and GraphAlreadyConsumed if the
    same output is differentiated twice without a fresh forward pass.
    """
    if loss.data.size != 1:
        raise NotScalarLoss(f"loss must be scalar, got shape {loss.data.shape}")
    if loss._consumed:
        raise GraphAlreadyConsumed("backward() already ran for this output")
    loss._consumed = True
    if not loss.requires_grad:
        return
    graph = Graph.trace(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(graph.nodes):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grad(params) -> None:
    """Clear gradients on an iterable (or mapping) of tensors."""
    values = params.values() if hasattr(params, "values") else params
    for p in values:
        p.grad = None
