"""Multi-head self- and cross-attention without positional encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndiff as nd
from .ndiff import Array, Linear, Module


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int = 64
    heads: int = 4

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError(f"model_dim {self.model_dim} not divisible by heads {self.heads}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads


class MultiHeadAttention(Module):
    def __init__(self, cfg: AttentionConfig, rng: np.random.Generator):
        d = cfg.model_dim
        self.query = Linear(d, d, rng)
        self.key = Linear(d, d, rng)
        self.value = Linear(d, d, rng)
        self.out = Linear(d, d, rng)
        self._cfg = cfg

    @property
    def config(self) -> AttentionConfig:
        return self._cfg

    def _heads(self, x: Array) -> Array:
        bsz, length, _ = x.shape
        cfg = self._cfg
        return nd.transpose(x.reshape(bsz, length, cfg.heads, cfg.head_dim), (0, 2, 1, 3))

    def attend(self, q, kv, return_weights: bool = False):
        q, kv = nd.as_array(q), nd.as_array(kv)
        bsz, mq, d = q.shape
        qh = self._heads(self.query(q))
        kh = self._heads(self.key(kv))
        vh = self._heads(self.value(kv))
        scores = nd.matmul(qh, nd.swapaxes(kh, -1, -2)) * (1.0 / np.sqrt(self._cfg.head_dim))
        weights = nd.softmax(scores, axis=-1)
        ctx = nd.transpose(nd.matmul(weights, vh), (0, 2, 1, 3)).reshape(bsz, mq, d)
        out = self.out(ctx) + q
        return (out, weights) if return_weights else out


def mhsa(x, block: MultiHeadAttention, return_weights: bool = False):
    """Self-attention over the sequence axis plus residual; (B, M, D) -> (B, M, D)."""
    return block.attend(x, x, return_weights)


def mhca(q, kv, block: MultiHeadAttention, return_weights: bool = False):
    """Queries from ``q`` attend to ``kv``; the residual adds ``q``."""
    return block.attend(q, kv, return_weights)


def attention_baseline(x: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Plain single-head softmax attention, O(M^2) time, O(chunk * M) memory.

    Used only as the quadratic reference in latency benchmarks.
    """
    length, dim = x.shape[-2:]
    out = np.empty_like(x)
    scale = 1.0 / np.sqrt(dim)
    for start in range(0, length, chunk):
        s = x[..., start:start + chunk, :] @ np.swapaxes(x, -1, -2) * scale
        s -= s.max(axis=-1, keepdims=True)
        np.exp(s, out=s)
        s /= s.sum(axis=-1, keepdims=True)
        out[..., start:start + chunk, :] = s @ x
    return out
