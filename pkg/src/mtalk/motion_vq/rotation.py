"""Rot6D conversions and geodesic distances (numpy and differentiable forms)."""

from __future__ import annotations

import numpy as np

from .. import ndiff as nd
from ..ndiff import Array


class DegenerateRotationError(ValueError):
    """The two Rot6D column vectors do not span a plane."""


def axis_angle_to_matrix(aa: np.ndarray) -> np.ndarray:
    """Rodrigues formula; aa (..., 3) -> (..., 3, 3)."""
    aa = np.asarray(aa, dtype=np.float64)
    theta = np.linalg.norm(aa, axis=-1, keepdims=True)
    safe = np.where(theta > 1e-12, theta, 1.0)
    k = aa / safe
    kx, ky, kz = k[..., 0], k[..., 1], k[..., 2]
    zero = np.zeros_like(kx)
    K = np.stack([np.stack([zero, -kz, ky], -1),
                  np.stack([kz, zero, -kx], -1),
                  np.stack([-ky, kx, zero], -1)], -2)
    s = np.sin(theta)[..., None]
    c = (1.0 - np.cos(theta))[..., None]
    return np.eye(3) + s * K + c * (K @ K)


def matrix_to_rot6d(R: np.ndarray) -> np.ndarray:
    """First two columns of R, concatenated: (..., 3, 3) -> (..., 6)."""
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def rot6d_to_matrix(r: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Gram-Schmidt on the two 3-vectors; columns of the result are b1, b2, b1 x b2."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != 6:
        raise ValueError(f"Rot6D needs a trailing axis of 6, got {r.shape}")
    a1, a2 = r[..., :3], r[..., 3:]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < tol):
        raise DegenerateRotationError("first Rot6D vector has (near) zero length")
    b1 = a1 / n1
    u2 = a2 - (b1 * a2).sum(-1, keepdims=True) * b1
    n2 = np.linalg.norm(u2, axis=-1, keepdims=True)
    if np.any(n2 < tol * np.maximum(1.0, np.linalg.norm(a2, axis=-1, keepdims=True))):
        raise DegenerateRotationError("Rot6D vectors are (near) parallel or zero")
    b2 = u2 / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def geodesic_angle(R1: np.ndarray, R2: np.ndarray) -> np.ndarray:
    """Rotation angle of R1^T R2, in [0, pi]."""
    tr = np.einsum("...ij,...ij->...", R1, R2)
    return np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))


def _normalize(v: Array, eps: float = 1e-24) -> Array:
    return v / nd.sqrt((v * v).sum(axis=-1, keepdims=True) + eps)


def rot6d_to_matrix_diff(r) -> Array:
    """Differentiable Gram-Schmidt; (..., 6) -> (..., 3, 3)."""
    r = nd.as_array(r)
    a1, a2 = r[..., 0:3], r[..., 3:6]
    b1 = _normalize(a1)
    b2 = _normalize(a2 - (b1 * a2).sum(axis=-1, keepdims=True) * b1)
    x1, y1, z1 = b1[..., 0], b1[..., 1], b1[..., 2]
    x2, y2, z2 = b2[..., 0], b2[..., 1], b2[..., 2]
    b3 = nd.stack([y1 * z2 - z1 * y2, z1 * x2 - x1 * z2, x1 * y2 - y1 * x2], axis=-1)
    return nd.stack([b1, b2, b3], axis=-1)


def geodesic_loss(R1, R2, eps: float = 1e-6) -> Array:
    """Mean angle between paired rotations; the arccos slope is clamped at 1 - eps."""
    R1, R2 = nd.as_array(R1), nd.as_array(R2)
    cos = ((R1 * R2).sum(axis=(-1, -2)) - 1.0) * 0.5
    return nd.safe_arccos(cos, eps).mean()
