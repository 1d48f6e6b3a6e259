"""Stage-1 training loop for one body part."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .. import ndiff as nd
from ..ndiff import Adam, AdamConfig
from .layout import PartLayout
from .losses import temporal_diff, vq_loss
from .model import MotionVQVAE, VQConfig

log = logging.getLogger(__name__)


@dataclass
class VQTrainConfig:
    epochs: int = 200
    lr: float = 2.5e-4
    lr_final: float = 2.5e-5
    final_fraction: float = 0.025
    batch_size: int = 4
    window: int = 64
    seed: int = 0
    use_vel_acc: bool = True
    model: VQConfig = field(default_factory=VQConfig)

    @property
    def final_epochs(self) -> int:
        """Epochs at the reduced rate: 5 of 200 at full scale."""
        return max(1, int(round(self.epochs * self.final_fraction))) if self.epochs > 1 else 0

    def to_dict(self) -> dict:
        return asdict(self)


def eval_windows(clips: Sequence[np.ndarray], window: int) -> np.ndarray:
    """Non-overlapping windows tiling every clip, stacked (K, window, width)."""
    out = [clip[s:s + window] for clip in clips
           for s in range(0, clip.shape[0] - window + 1, window)]
    return np.stack(out)


def _sample_windows(clips: Sequence[np.ndarray], window: int, rng: np.random.Generator):
    starts = [int(rng.integers(0, clip.shape[0] - window + 1)) for clip in clips]
    return np.stack([clip[s:s + window] for clip, s in zip(clips, starts)])


def reconstruct(model: MotionVQVAE, windows: np.ndarray, batch: int = 64):
    """Reconstructions and code indices for stacked windows, without recording a graph."""
    recons, idxs = [], []
    with nd.no_grad():
        for start in range(0, len(windows), batch):
            out = model(windows[start:start + batch])
            recons.append(out["recon"].data)
            idxs.append(out["idx"])
    return np.concatenate(recons), np.concatenate(idxs)


def mean_abs_acceleration(frames: np.ndarray, part: PartLayout) -> float:
    """Mean |second difference| over the non-contact channels of (K, T, width) windows."""
    chans = np.concatenate([np.arange(s.start, s.stop) for s in (part.rot, part.face, part.trans)])
    return float(np.abs(temporal_diff(frames[..., chans], 2)).mean())


def evaluate(model: MotionVQVAE, windows: np.ndarray, use_vel_acc: bool = True) -> dict:
    recon, idx = reconstruct(model, windows)
    with nd.no_grad():
        z_e = model.encode(windows)
        z_q, _ = model.quantize(z_e)
        _, terms = vq_loss(windows, recon, z_e, z_q, model.part, use_vel_acc)
    terms["utilization"] = len(np.unique(idx)) / model.config.codebook_size
    terms["mean_abs_acc"] = mean_abs_acceleration(recon, model.part)
    terms["l1"] = float(np.abs(recon - windows).mean())
    return terms


def train_vqvae(clips: Sequence[np.ndarray], part: PartLayout,
                cfg: VQTrainConfig | None = None) -> tuple[MotionVQVAE, list[dict]]:
    """Fit one part's VQ-VAE on part-slice clips (T, width).

    Each epoch draws one random window per clip. The learning rate drops to
    ``lr_final`` for the last ``final_epochs`` epochs. Returns the model and
    one stats dict per epoch.
    """
    cfg = cfg or VQTrainConfig()
    if not clips:
        raise ValueError("training corpus is empty")
    if any(c.shape[0] < cfg.window for c in clips):
        raise ValueError(f"every clip needs at least {cfg.window} frames")
    rng = np.random.default_rng(cfg.seed)
    model = MotionVQVAE(part, cfg.model, rng)
    opt = Adam(model.parameters(), AdamConfig(lr=cfg.lr))
    history = []
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_final if epoch >= cfg.epochs - cfg.final_epochs else cfg.lr
        windows = _sample_windows(clips, cfg.window, rng)
        order = rng.permutation(len(windows))
        sums: dict[str, float] = {}
        used = np.zeros(cfg.model.codebook_size, dtype=bool)
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = windows[order[start:start + cfg.batch_size]]
            opt.zero_grad()
            out = model(batch)
            loss, terms = vq_loss(batch, out["recon"], out["z_e"], out["z_q"], part,
                                  cfg.use_vel_acc)
            loss.backward()
            opt.step()
            used[out["idx"].ravel()] = True
            terms["loss"] = float(loss.data)
            for k, v in terms.items():
                sums[k] = sums.get(k, 0.0) + v
            n_batches += 1
        stats = {k: v / n_batches for k, v in sums.items()}
        stats["epoch"] = epoch + 1
        stats["lr"] = opt.lr
        stats["utilization"] = float(used.mean())
        history.append(stats)
        log.debug("vq %s epoch %d loss %.5f rec %.5f util %.2f", part.name, epoch + 1,
                  stats["loss"], stats["rec"], stats["utilization"])
    return model, history
