"""Clip-level distances: diversity, face vertex MSE and velocity difference."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..motion_vq.layout import DEFAULT_LAYOUT, BodyLayout
from ..motion_vq.rotation import rot6d_to_matrix


class JointPositions:
    """Proxy joint positions: each joint's rotation applied to a fixed unit
    bone vector, plus root translation. Stands in for body-model kinematics."""

    def __init__(self, layout: BodyLayout = DEFAULT_LAYOUT, seed: int = 0):
        bones = np.random.default_rng(seed).normal(size=(layout.n_joints, 3))
        self.bones = bones / np.linalg.norm(bones, axis=-1, keepdims=True)
        self.layout = layout

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        lead = frames.shape[:-1]
        rot = frames[..., self.layout.rot_channels()].reshape(lead + (self.layout.n_joints, 6))
        pos = np.einsum("...jab,jb->...ja", rot6d_to_matrix(rot), self.bones)
        pos = pos + frames[..., None, self.layout.translation_channels()]
        return pos.reshape(lead + (-1,))


def diversity(clips: Sequence[np.ndarray] | np.ndarray,
              adapter: Callable[[np.ndarray], np.ndarray] | None = None,
              translation: Sequence[int] | np.ndarray = ()) -> float:
    """Normalized mean pairwise L1 distance between clips.

    Sums ||p_t^i - p_t^j||_1 over frames and over all ordered pairs i != j,
    then divides by 2 N (N - 1). Translation channels are zeroed before the
    adapter maps frames to joint positions.
    """
    x = np.array(clips, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"diversity needs at least two clips, got {n}")
    x[..., np.asarray(translation, dtype=np.int64)] = 0.0
    pos = adapter(x) if adapter is not None else x
    pos = pos.reshape(n, -1)
    total = 0.0
    for i in range(n):
        total += np.abs(pos[i][None, :] - pos).sum()
    return total / (2.0 * n * (n - 1))


def body_diversity(clips, layout: BodyLayout = DEFAULT_LAYOUT) -> float:
    return diversity(clips, JointPositions(layout), layout.translation_channels())


def _pair(f, f_hat):
    f = np.asarray(f, dtype=np.float64)
    f_hat = np.asarray(f_hat, dtype=np.float64)
    if f.shape != f_hat.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {f_hat.shape}")
    return f, f_hat


def vertex_mse(f, f_hat) -> float:
    f, f_hat = _pair(f, f_hat)
    return float(((f - f_hat) ** 2).mean())


def lvd(f, f_hat) -> float:
    """Mean absolute difference of per-vertex speeds (first differences over frames)."""
    f, f_hat = _pair(f, f_hat)
    if f.shape[0] < 2:
        raise ValueError("lvd needs at least two frames")
    return float(np.abs(np.diff(f, axis=0) - np.diff(f_hat, axis=0)).mean())
