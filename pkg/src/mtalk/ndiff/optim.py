"""Adam with global gradient-norm clipping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Array

DEFAULT_LR = 2.5e-4
DEFAULT_CLIP = 0.99


@dataclass
class AdamConfig:
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = DEFAULT_CLIP


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads)))


def clip_by_global_norm(grads: Sequence[np.ndarray], max_norm: float):
    """Scale all grads by max_norm / norm when the joint norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return list(grads), norm


class Adam:
    def __init__(self, params: Sequence[Array], config: AdamConfig | None = None):
        self.params = list(params)
        self.config = config or AdamConfig()
        self.lr = self.config.lr
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.last_norm = 0.0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, grads: Sequence[np.ndarray] | None = None) -> None:
        if grads is None:
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} grads for {len(self.params)} params")
        cfg = self.config
        if cfg.clip_norm is not None:
            grads, self.last_norm = clip_by_global_norm(grads, cfg.clip_norm)
        else:
            self.last_norm = global_norm(grads)
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}


def optimizer_step(params: Sequence[Array], grads: Sequence[np.ndarray], optimizer: Adam) -> None:
    """Apply one clipped Adam update of ``grads`` to ``params`` in place."""
    if [id(p) for p in params] != [id(p) for p in optimizer.params]:
        raise ValueError("optimizer was built for a different parameter list")
    optimizer.step(grads)
