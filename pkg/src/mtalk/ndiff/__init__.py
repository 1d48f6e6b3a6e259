"""Minimal reverse-mode differentiable array engine on float64 numpy arrays."""

from .core import Array, ShapeError, as_array, backward, grad_enabled, no_grad, record, zero_grads
from .gradcheck import grad_check, numeric_grad
from .linalg import (
    concat,
    conv1d,
    conv_output_length,
    layer_norm,
    linear,
    log_softmax,
    matmul,
    softmax,
    split,
    stack,
    swapaxes,
    transpose,
)
from .losses import l1, mse, nll
from .nn import Conv1d, Embedding, LayerNorm, Linear, Module, Parameter
from .ops import (
    abs_,
    add,
    clip,
    div,
    exp,
    exprel,
    getitem,
    leaky_relu,
    log,
    mean,
    mul,
    neg,
    power,
    relu,
    repeat,
    reshape,
    safe_arccos,
    sigmoid,
    silu,
    softplus,
    sqrt,
    stop_gradient,
    sub,
    sum_,
    tanh,
)
from .optim import Adam, AdamConfig, clip_by_global_norm, global_norm, optimizer_step

__all__ = [name for name in dir() if not name.startswith("_")]
