"""Saving and loading per-part VQ-VAE checkpoints."""

from __future__ import annotations

import hashlib

import numpy as np

from .. import checkpoint
from ..ndiff import Module
from .layout import DEFAULT_LAYOUT, BodyLayout
from .model import MotionVQVAE, VQConfig


def save_vqvae(path, model: MotionVQVAE, extra: dict | None = None) -> None:
    config = {"model": model.config.to_dict(), **(extra or {})}
    checkpoint.save(path, checkpoint.VQ_MAGIC, model.part.name, config, model.state_dict())


def load_vqvae(path, layout: BodyLayout = DEFAULT_LAYOUT, part: str | None = None) -> MotionVQVAE:
    ckpt = checkpoint.load(path, checkpoint.VQ_MAGIC)
    if part is not None and ckpt.tag != part:
        raise checkpoint.CheckpointError(f"{path}: holds part {ckpt.tag!r}, expected {part!r}")
    try:
        model = MotionVQVAE(layout.part(ckpt.tag), VQConfig(**ckpt.config["model"]))
        model.load_state_dict(ckpt.tensors)
    except (KeyError, TypeError, ValueError) as exc:
        raise checkpoint.CheckpointError(f"{path}: {exc}") from None
    return model


def parameter_digest(module: Module) -> str:
    """sha256 over every parameter's name, shape and bytes."""
    h = hashlib.sha256()
    for name, value in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(np.asarray(value.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return h.hexdigest()
