"""Central-difference gradient verification."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import Array, backward, no_grad


def numeric_grad(f: Callable[..., Array], inputs: Sequence[Array], step: float = 1e-5):
    grads = []
    with no_grad():
        for x in inputs:
            g = np.zeros_like(x.data)
            flat = x.data.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                hi = float(f(*inputs).data)
                flat[i] = orig - step
                lo = float(f(*inputs).data)
                flat[i] = orig
                gflat[i] = (hi - lo) / (2.0 * step)
            grads.append(g)
    return grads


def grad_check(f: Callable[..., Array], inputs: Sequence[Array], step: float = 1e-5) -> float:
    """Max over all coordinates of |analytic - numeric| / max(1, |numeric|)."""
    for x in inputs:
        x.data = np.ascontiguousarray(x.data)
        x.requires_grad = True
        x.grad = None
    backward(f(*inputs))
    analytic = [x.grad if x.grad is not None else np.zeros_like(x.data) for x in inputs]
    numeric = numeric_grad(f, inputs, step)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size:
            err = np.abs(a - n) / np.maximum(1.0, np.abs(n))
            worst = max(worst, float(err.max()))
    for x in inputs:
        x.grad = None
    return worst
