"""Frechet distance between Gaussians fitted to feature sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray


def fit_gaussian(features: np.ndarray, eps: float = 1e-6) -> GaussianStats:
    """Sample mean and (ddof=1) covariance with ``eps`` added to the diagonal."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("cannot fit a Gaussian to an empty sample set")
    mu = x.mean(axis=0)
    if x.shape[0] > 1:
        xc = x - mu
        cov = xc.T @ xc / (x.shape[0] - 1)
    else:
        cov = np.zeros((x.shape[1], x.shape[1]))
    cov = 0.5 * (cov + cov.T) + eps * np.eye(x.shape[1])
    return GaussianStats(mu, cov)


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The trace of the product root is taken from the symmetric matrix
    S_a^(1/2) S_b S_a^(1/2), which has the same eigenvalues as S_a S_b.
    """
    root_a = _sqrt_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    w = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    tr_root = np.sqrt(np.clip(w, 0.0, None)).sum()
    diff = a.mean - b.mean
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_root)
    return max(value, 0.0)


def fgd(real: np.ndarray, generated: np.ndarray) -> float:
    return frechet_distance(fit_gaussian(real), fit_gaussian(generated))
