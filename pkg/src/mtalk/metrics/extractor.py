"""Small convolutional autoencoder whose pooled latent feeds the FGD."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .. import ndiff as nd
from ..motion_vq.layout import DEFAULT_LAYOUT, BodyLayout
from ..ndiff import Adam, AdamConfig, Conv1d, Module


class UntrainedExtractorError(RuntimeError):
    pass


@dataclass
class ExtractorConfig:
    latent: int = 32
    hidden: int = 64
    window: int = 64
    epochs: int = 40
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class FeatureExtractor(Module):
    """Encodes body rotation channels (T, 330) to a (T/2, latent) sequence and
    mean-pools it to one vector per clip."""

    def __init__(self, cfg: ExtractorConfig | None = None, layout: BodyLayout = DEFAULT_LAYOUT):
        cfg = cfg or ExtractorConfig()
        rng = np.random.default_rng(cfg.seed)
        width = len(layout.rot_channels())
        h = cfg.hidden
        self.enc_in = Conv1d(width, h, 3, rng, padding=1)
        self.enc_down = Conv1d(h, h, 4, rng, stride=2, padding=1)
        self.enc_out = Conv1d(h, cfg.latent, 3, rng, padding=1)
        self.dec_in = Conv1d(cfg.latent, h, 3, rng, padding=1)
        self.dec_out = Conv1d(h, width, 3, rng, padding=1)
        self._cfg = cfg
        self._chans = layout.rot_channels()
        self._mean = np.zeros(width)
        self.trained = False
        self.recon_l1: float | None = None

    @property
    def config(self) -> ExtractorConfig:
        return self._cfg

    def _inputs(self, frames: np.ndarray) -> np.ndarray:
        x = np.asarray(frames, dtype=np.float64)[..., self._chans] - self._mean
        return x[None] if x.ndim == 2 else x

    def encode(self, x):
        h = nd.leaky_relu(self.enc_in(x))
        h = nd.leaky_relu(self.enc_down(h))
        return self.enc_out(h)

    def decode(self, z):
        h = nd.leaky_relu(self.dec_in(nd.repeat(z, 2, axis=1)))
        return self.dec_out(h)

    def fit(self, clips: Sequence[np.ndarray]) -> list[float]:
        """Train on full-body clips with an L1 reconstruction objective."""
        cfg = self._cfg
        rng = np.random.default_rng(cfg.seed + 1)
        self._mean = np.concatenate([c[:, self._chans] for c in clips]).mean(axis=0)
        opt = Adam(self.parameters(), AdamConfig(lr=cfg.lr))
        curve = []
        for _ in range(cfg.epochs):
            starts = [int(rng.integers(0, c.shape[0] - cfg.window + 1)) for c in clips]
            windows = self._inputs(np.stack([c[s:s + cfg.window] for c, s in zip(clips, starts)]))
            order = rng.permutation(len(windows))
            total = 0.0
            for b in range(0, len(order), cfg.batch_size):
                x = windows[order[b:b + cfg.batch_size]]
                opt.zero_grad()
                loss = nd.l1(self.decode(self.encode(x)), x)
                loss.backward()
                opt.step()
                total += float(loss.data) * len(x)
            curve.append(total / len(windows))
        self.trained = True
        self.recon_l1 = self.reconstruction_l1(clips)
        return curve

    def reconstruction_l1(self, clips: Sequence[np.ndarray]) -> float:
        with nd.no_grad():
            errs = [float(np.abs(self.decode(self.encode(x)).data - x).mean())
                    for x in (self._inputs(c[: c.shape[0] - c.shape[0] % 2]) for c in clips)]
        return float(np.mean(errs))

    def features(self, clips: Sequence[np.ndarray]) -> np.ndarray:
        """One pooled latent per clip, (N, latent)."""
        if not self.trained:
            raise UntrainedExtractorError("feature extractor has not been trained")
        with nd.no_grad():
            return np.stack([self.encode(self._inputs(c)).data[0].mean(axis=0) for c in clips])

    def state(self) -> dict[str, np.ndarray]:
        out = self.state_dict()
        out["_mean"] = self._mean.copy()
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        state = dict(state)
        self._mean = np.asarray(state.pop("_mean"), dtype=np.float64)
        self.load_state_dict(state)
        self.trained = True


def fgd_features(clips: Sequence[np.ndarray], extractor: FeatureExtractor) -> np.ndarray:
    return extractor.features(clips)
