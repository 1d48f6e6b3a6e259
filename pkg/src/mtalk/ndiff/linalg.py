"""Matrix products, convolution, joins/splits and normalizations."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Array, ShapeError, as_array, record
from .ops import add, getitem, unbroadcast


def matmul(a, b) -> Array:
    """Batched matrix product with numpy broadcasting over leading axes."""
    a, b = as_array(a), as_array(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        out = a.data @ b.data
    except ValueError:
        raise ShapeError(f"matmul: cannot broadcast {a.shape} @ {b.shape}") from None

    def bw(g):
        ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            if a.ndim > 2 and b.ndim == 2:
                # fold the batch axes into one big product instead of a 3-D temp
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return record(out, (a, b), bw, "matmul")


def linear(x, weight, bias=None) -> Array:
    """x @ weight + bias with ``weight`` stored as (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def transpose(a, axes=None) -> Array:
    a = as_array(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inv = np.argsort(axes)
    return record(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),), "transpose")


def swapaxes(a, ax1: int, ax2: int) -> Array:
    a = as_array(a)
    axes = list(range(a.ndim))
    axes[ax1], axes[ax2] = axes[ax2], axes[ax1]
    return transpose(a, axes)


def concat(arrays: Sequence, axis: int = -1) -> Array:
    arrays = [as_array(x) for x in arrays]
    try:
        out = np.concatenate([x.data for x in arrays], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[x.shape for x in arrays]} "
                         f"along axis {axis}") from None
    axis = axis % out.ndim
    bounds = np.cumsum([0] + [x.shape[axis] for x in arrays])

    def bw(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis)
                     for lo, hi in zip(bounds[:-1], bounds[1:]))

    return record(out, arrays, bw, "concat")


def stack(arrays: Sequence, axis: int = 0) -> Array:
    arrays = [as_array(x) for x in arrays]
    out = np.stack([x.data for x in arrays], axis=axis)
    axis = axis % out.ndim

    def bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(arrays)))

    return record(out, arrays, bw, "stack")


def split(a, sizes: Sequence[int], axis: int = -1) -> list[Array]:
    a = as_array(a)
    axis = axis % a.ndim
    if sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover axis {axis} of {a.shape}")
    parts, start = [], 0
    for n in sizes:
        index = (slice(None),) * axis + (slice(start, start + n),)
        parts.append(getitem(a, index))
        start += n
    return parts


def softmax(a, axis: int = -1) -> Array:
    a = as_array(a)
    if a.shape[axis] == 0:
        raise ShapeError(f"softmax over zero-length axis {axis} of {a.shape}")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record(out, (a,), bw, "softmax")


def log_softmax(a, axis: int = -1) -> Array:
    a = as_array(a)
    if a.shape[axis] == 0:
        raise ShapeError(f"log_softmax over zero-length axis {axis} of {a.shape}")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
    p = np.exp(out)

    def bw(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return record(out, (a,), bw, "log_softmax")


def layer_norm(a, gamma=None, beta=None, eps: float = 1e-5) -> Array:
    """Normalize over the last axis, then apply optional affine terms."""
    a = as_array(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    n = a.shape[-1]

    def bw(g):
        gx = inv * (g - g.mean(axis=-1, keepdims=True)
                    - xhat * (g * xhat).sum(axis=-1, keepdims=True) / n)
        return (gx,)

    out = record(xhat, (a,), bw, "layer_norm")
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta
    return out


def conv_output_length(length: int, kernel: int, stride: int = 1, padding=0) -> int:
    pl, pr = (padding, padding) if isinstance(padding, int) else padding
    return (length + pl + pr - kernel) // stride + 1


def conv1d(x, weight, bias=None, stride: int = 1, padding=0, groups: int = 1) -> Array:
    """Temporal convolution on channels-last input.

    x: (B, T, C_in); weight: (C_out, C_in // groups, K); output (B, T_out, C_out)
    with T_out = floor((T + pad_left + pad_right - K) / stride) + 1. ``padding``
    is an int (symmetric) or a (left, right) pair.
    """
    x, weight = as_array(x), as_array(weight)
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d expects x (B,T,C) and w (O,I,K), got {x.shape}, {weight.shape}")
    bsz, length, cin = x.shape
    cout, cin_g, k = weight.shape
    if cin % groups or cout % groups or cin // groups != cin_g:
        raise ShapeError(f"conv1d: input channels {cin} / groups {groups} do not match "
                         f"weight {weight.shape}")
    pl, pr = (padding, padding) if isinstance(padding, int) else tuple(padding)
    tout = conv_output_length(length, k, stride, (pl, pr))
    if tout <= 0:
        raise ShapeError(f"conv1d: input length {length} too short for kernel {k}")
    xp = np.pad(x.data, ((0, 0), (pl, pr), (0, 0))) if pl or pr else x.data
    win = sliding_window_view(xp, k, axis=1)[:, : stride * (tout - 1) + 1: stride]
    # win: (B, T_out, C_in, K)
    if groups == 1:
        cols = win.reshape(bsz * tout, cin * k)
        w2 = weight.data.reshape(cout, cin * k)
        out = (cols @ w2.T).reshape(bsz, tout, cout)
    else:
        og = cout // groups
        wg = win.reshape(bsz, tout, groups, cin_g, k)
        w5 = weight.data.reshape(groups, og, cin_g, k)
        if cin_g == 1 and og == 1:
            out = (wg[:, :, :, 0, :] * w5[None, None, :, 0, 0, :]).sum(-1)
        else:
            out = np.einsum("btgck,gock->btgo", wg, w5).reshape(bsz, tout, cout)

    def bw(g):
        gx = gw = None
        if groups == 1:
            g2 = g.reshape(bsz * tout, cout)
            if weight.requires_grad:
                gw = (g2.T @ cols).reshape(weight.shape)
            if x.requires_grad:
                gcol = (g2 @ w2).reshape(bsz, tout, cin, k)
        else:
            gg = g.reshape(bsz, tout, groups, og)
            if cin_g == 1 and og == 1:
                if weight.requires_grad:
                    gw = np.einsum("btg,btgk->gk", gg[..., 0], wg[:, :, :, 0, :]).reshape(weight.shape)
                if x.requires_grad:
                    gcol = (gg[..., 0][..., None] * w5[None, None, :, 0, 0, :])[:, :, :, :]
                    gcol = gcol.reshape(bsz, tout, cin, k)
            else:
                if weight.requires_grad:
                    gw = np.einsum("btgo,btgck->gock", gg, wg).reshape(weight.shape)
                if x.requires_grad:
                    gcol = np.einsum("btgo,gock->btgck", gg, w5).reshape(bsz, tout, cin, k)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            span = stride * (tout - 1) + 1
            for j in range(k):
                gxp[:, j: j + span: stride] += gcol[..., j]
            gx = gxp[:, pl: pl + length]
        return gx, gw

    out_arr = record(out, (x, weight), bw, "conv1d")
    return out_arr if bias is None else add(out_arr, bias)
