"""Mean-reduced scalar losses."""

from __future__ import annotations

import numpy as np

from .core import Array, ShapeError, as_array, record
from .ops import abs_, mean, sub


def _check(pred: Array, target: Array, name: str) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"{name}: prediction {pred.shape} and target {target.shape} differ")


def mse(pred, target) -> Array:
    pred, target = as_array(pred), as_array(target)
    _check(pred, target, "mse")
    d = sub(pred, target)
    return mean(d * d)


def l1(pred, target) -> Array:
    pred, target = as_array(pred), as_array(target)
    _check(pred, target, "l1")
    return mean(abs_(sub(pred, target)))


def nll(log_probs, target) -> Array:
    """Negative log-likelihood of integer class targets.

    ``log_probs`` has classes on the last axis; ``target`` holds one index per
    leading position.
    """
    log_probs = as_array(log_probs)
    target = np.asarray(target)
    n_classes = log_probs.shape[-1]
    if target.shape != log_probs.shape[:-1]:
        raise ShapeError(f"nll: targets {target.shape} do not match {log_probs.shape[:-1]}")
    if not np.issubdtype(target.dtype, np.integer):
        raise TypeError("nll: targets must be integer class indices")
    if target.size and (target.min() < 0 or target.max() >= n_classes):
        raise IndexError(f"nll: class index out of range [0, {n_classes})")
    flat = log_probs.data.reshape(-1, n_classes)
    rows = np.arange(flat.shape[0])
    idx = target.reshape(-1)
    count = flat.shape[0]
    out = -flat[rows, idx].mean()

    def bw(g):
        full = np.zeros_like(flat)
        full[rows, idx] = -g / count
        return (full.reshape(log_probs.shape),)

    return record(np.asarray(out), (log_probs,), bw, "nll")
