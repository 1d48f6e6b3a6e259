"""Elementwise arithmetic, activations, reductions and shape manipulation."""

from __future__ import annotations

import numpy as np
from scipy import special

from .core import Array, ShapeError, as_array, record


def _broadcast_shape(a: Array, b: Array, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- binary -------------------------------------------------------------------

def add(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    _broadcast_shape(a, b, "add")

    def bw(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return record(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    _broadcast_shape(a, b, "sub")

    def bw(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return record(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    _broadcast_shape(a, b, "mul")

    def bw(g):
        ga = unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return record(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    _broadcast_shape(a, b, "div")
    out = a.data / b.data

    def bw(g):
        ga = unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return record(out, (a, b), bw, "div")


def neg(a) -> Array:
    a = as_array(a)
    return record(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, exponent: float) -> Array:
    a = as_array(a)
    p = float(exponent)

    def bw(g):
        return (g * p * a.data ** (p - 1.0),)

    return record(a.data ** p, (a,), bw, "pow")


# -- unary elementwise --------------------------------------------------------

def exp(a) -> Array:
    a = as_array(a)
    out = np.exp(a.data)
    return record(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Array:
    a = as_array(a)
    return record(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Array:
    a = as_array(a)
    out = np.sqrt(a.data)
    return record(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def abs_(a) -> Array:
    a = as_array(a)
    return record(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def sigmoid(a) -> Array:
    a = as_array(a)
    out = special.expit(a.data)
    return record(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a) -> Array:
    a = as_array(a)
    out = np.tanh(a.data)
    return record(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def silu(a) -> Array:
    a = as_array(a)
    s = special.expit(a.data)
    out = a.data * s

    def bw(g):
        return (g * (s + out * (1.0 - s)),)

    return record(out, (a,), bw, "silu")


def softplus(a) -> Array:
    """log(1 + exp(a)), evaluated without overflow."""
    a = as_array(a)
    out = np.logaddexp(0.0, a.data)
    return record(out, (a,), lambda g: (g * special.expit(a.data),), "softplus")


def relu(a) -> Array:
    a = as_array(a)
    mask = a.data > 0
    return record(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a, slope: float = 0.2) -> Array:
    a = as_array(a)
    factor = np.where(a.data > 0, 1.0, slope)
    return record(a.data * factor, (a,), lambda g: (g * factor,), "leaky_relu")


def clip(a, lo: float, hi: float) -> Array:
    a = as_array(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return record(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clip")


def safe_arccos(a, eps: float = 1e-6) -> Array:
    """arccos on [-1, 1]; the derivative is evaluated at the input clamped
    to [-1+eps, 1-eps] so it stays finite at exact alignment."""
    a = as_array(a)
    out = np.arccos(np.clip(a.data, -1.0, 1.0))
    c = np.clip(a.data, -1.0 + eps, 1.0 - eps)
    d = -1.0 / np.sqrt(1.0 - c * c)
    return record(out, (a,), lambda g: (g * d,), "arccos")


def exprel(a) -> Array:
    """(exp(a) - 1) / a with the removable singularity at 0 filled by 1."""
    a = as_array(a)
    x = a.data
    out = special.exprel(x)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    d = np.where(small, 0.5 + x / 3.0 + x * x / 8.0,
                 (np.exp(xs) * (xs - 1.0) + 1.0) / (xs * xs))
    return record(out, (a,), lambda g: (g * d,), "exprel")


def stop_gradient(a) -> Array:
    return Array(as_array(a).data)


# -- reductions ---------------------------------------------------------------

def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum_(a, axis=None, keepdims: bool = False) -> Array:
    a = as_array(a)
    axes = _norm_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record(out, (a,), bw, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Array:
    a = as_array(a)
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return sum_(a, axes, keepdims) * (1.0 / count)


# -- shape --------------------------------------------------------------------

def reshape(a, shape) -> Array:
    a = as_array(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from None
    return record(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis
               for i in items)


def getitem(a, index) -> Array:
    a = as_array(a)
    out = a.data[index]
    basic = _is_basic_index(index)

    def bw(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return record(np.array(out, dtype=np.float64), (a,), bw, "getitem")


def repeat(a, repeats: int, axis: int) -> Array:
    """np.repeat along one axis (nearest-neighbour upsampling)."""
    a = as_array(a)
    axis = axis % a.ndim
    out = np.repeat(a.data, repeats, axis=axis)

    def bw(g):
        shape = a.shape[:axis] + (a.shape[axis], repeats) + a.shape[axis + 1:]
        return (g.reshape(shape).sum(axis=axis + 1),)

    return record(out, (a,), bw, "repeat")
