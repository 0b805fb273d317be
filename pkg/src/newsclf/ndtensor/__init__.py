"""Dense float64 tensors with reverse-mode autodiff, Adam, and checkpoint IO."""

from newsclf.ndtensor.tensor import (
    DEBUG_CHECK_FINITE,
    Graph,
    GraphAlreadyConsumed,
    NonPositiveAlpha,
    NotScalarLoss,
    ShapeMismatch,
    Tensor,
    add,
    backward,
    concat,
    dropout,
    embedding,
    gelu_tanh_approx,
    layer_norm,
    logsumexp,
    matmul,
    mean_all,
    mul,
    no_grad,
    relu,
    reshape,
    set_debug_check_finite,
    slice_,
    softmax_scaled,
    sub,
    sum_,
    take_per_row,
    transpose,
    zero_grad,
)
from newsclf.ndtensor.adam import AdamState, MissingGrad, adam_step, warmup_lr
from newsclf.ndtensor.checkpoint import (
    CHECKPOINT_MAGIC,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Tensor",
    "Graph",
    "ShapeMismatch",
    "NotScalarLoss",
    "GraphAlreadyConsumed",
    "NonPositiveAlpha",
    "no_grad",
    "set_debug_check_finite",
    "DEBUG_CHECK_FINITE",
    "add",
    "sub",
    "mul",
    "matmul",
    "relu",
    "gelu_tanh_approx",
    "layer_norm",
    "dropout",
    "softmax_scaled",
    "logsumexp",
    "embedding",
    "concat",
    "reshape",
    "transpose",
    "slice_",
    "sum_",
    "mean_all",
    "take_per_row",
    "backward",
    "zero_grad",
    "AdamState",
    "MissingGrad",
    "adam_step",
    "warmup_lr",
    "CheckpointError",
    "CHECKPOINT_MAGIC",
    "save_checkpoint",
    "load_checkpoint",
]
