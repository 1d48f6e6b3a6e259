"""Composite VQ-VAE objective: reconstruction, velocity, acceleration, codebook terms."""

from __future__ import annotations

import numpy as np

from .. import ndiff as nd
from ..ndiff import Array
from .layout import PartLayout
from .rotation import geodesic_loss, rot6d_to_matrix, rot6d_to_matrix_diff


def temporal_diff(x, order: int = 1):
    for _ in range(order):
        x = x[:, 1:] - x[:, :-1]
    return x


def _motion_channels(part: PartLayout) -> list[slice]:
    return [s for s in (part.rot, part.face, part.trans) if s.stop > s.start]


def vq_loss(m, m_hat, z_e, z_q, part: PartLayout, use_vel_acc: bool = True):
    """Returns (total, terms) where ``terms`` maps each component to a float.

    m, m_hat: (B, T, width) part slices; z_e: encoder output; z_q: codebook
    rows. Body parts use the geodesic angle on Rot6D plus L1 on translation
    for reconstruction and L1 for velocity/acceleration; the face uses MSE
    throughout. Foot contacts add an MSE term. Squared-norm code terms are
    averaged per element.
    """
    m = np.asarray(m.data if isinstance(m, Array) else m, dtype=np.float64)
    m_hat = nd.as_array(m_hat)
    if m.ndim == 2:
        m = m[None]
    if m_hat.ndim == 2:
        m_hat = m_hat.reshape((1,) + m_hat.shape)
    if m.shape != m_hat.shape:
        raise nd.ShapeError(f"vq_loss: target {m.shape} vs reconstruction {m_hat.shape}")
    if m.shape[1] < 3:
        raise ValueError(f"vq_loss needs at least 3 frames, got {m.shape[1]}")
    bsz, length, _ = m.shape
    terms: dict[str, Array] = {}

    rec = []
    if part.n_rot_joints:
        shape = (bsz, length, part.n_rot_joints, 6)
        target_R = rot6d_to_matrix(m[..., part.rot].reshape(shape))
        pred_R = rot6d_to_matrix_diff(m_hat[..., part.rot].reshape(shape))
        rec.append(geodesic_loss(pred_R, target_R))
    if part.n_face:
        rec.append(nd.mse(m_hat[..., part.face], m[..., part.face]))
    if part.n_trans:
        rec.append(nd.l1(m_hat[..., part.trans], m[..., part.trans]))
    terms["rec"] = sum(rec[1:], rec[0])
    if part.n_contact:
        terms["contact"] = nd.mse(m_hat[..., part.contact], m[..., part.contact])

    if use_vel_acc:
        dist = nd.mse if part.kind == "face" else nd.l1
        chans = _motion_channels(part)
        pred = nd.concat([m_hat[..., s] for s in chans], axis=-1)
        target = np.concatenate([m[..., s] for s in chans], axis=-1)
        terms["vel"] = dist(temporal_diff(pred, 1), temporal_diff(target, 1))
        terms["acc"] = dist(temporal_diff(pred, 2), temporal_diff(target, 2))

    z_e, z_q = nd.as_array(z_e), nd.as_array(z_q)
    terms["codebook"] = nd.mse(z_q, nd.stop_gradient(z_e))
    terms["commit"] = nd.mse(z_e, nd.stop_gradient(z_q))

    names = list(terms)
    total = terms[names[0]]
    for name in names[1:]:
        total = total + terms[name]
    return total, {name: float(v.data) for name, v in terms.items()}
