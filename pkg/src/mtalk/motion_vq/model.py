"""Per-part convolutional VQ-VAE: encoder, codebook quantization, decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import ndiff as nd
from ..ndiff import Array, Conv1d, Module, Parameter
from .layout import PartLayout


@dataclass(frozen=True)
class VQConfig:
    codebook_size: int = 64
    code_dim: int = 32
    hidden: int = 128
    downsample: int = 4

    def __post_init__(self):
        if self.codebook_size < 2:
            raise ValueError("codebook needs at least two entries")
        if self.downsample < 1 or self.downsample & (self.downsample - 1):
            raise ValueError(f"downsample factor must be a power of two, got {self.downsample}")

    @property
    def n_stages(self) -> int:
        return int(np.log2(self.downsample))

    def to_dict(self) -> dict:
        return asdict(self)


FULL_SCALE = VQConfig(codebook_size=256, code_dim=512)


class Codebook(Module):
    def __init__(self, size: int, dim: int, rng: np.random.Generator):
        self.entries = Parameter(rng.uniform(-1.0 / size, 1.0 / size, size=(size, dim)))

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def nearest_codes(z: np.ndarray, entries: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """argmin_k ||z_i - e_k||_2 per row, lowest index on ties."""
    flat = z.reshape(-1, z.shape[-1])
    idx = np.empty(flat.shape[0], dtype=np.int64)
    for start in range(0, flat.shape[0], chunk):
        diff = flat[start:start + chunk, None, :] - entries[None, :, :]
        idx[start:start + chunk] = np.argmin(np.einsum("ikc,ikc->ik", diff, diff), axis=1)
    return idx.reshape(z.shape[:-1])


def quantize(z_e, codebook: Codebook) -> tuple[Array, np.ndarray]:
    """Replace each latent vector with its nearest codebook row.

    The returned rows are differentiable with respect to the codebook only.
    """
    z_e = nd.as_array(z_e)
    if z_e.shape[-1] != codebook.entries.shape[1]:
        raise nd.ShapeError(f"latent width {z_e.shape[-1]} does not match codebook "
                            f"width {codebook.entries.shape[1]}")
    idx = nearest_codes(z_e.data, codebook.entries.data)
    return nd.getitem(codebook.entries, idx), idx


def straight_through(z_e, z_q) -> Array:
    """Forward value of ``z_q``; the backward pass copies the gradient to ``z_e``."""
    z_e, z_q = nd.as_array(z_e), nd.as_array(z_q)
    if z_e.shape != z_q.shape:
        raise nd.ShapeError(f"straight_through: {z_e.shape} vs {z_q.shape}")
    return nd.record(z_q.data.copy(), (z_e,), lambda g: (g,), "straight_through")


class Encoder(Module):
    def __init__(self, width: int, cfg: VQConfig, rng: np.random.Generator):
        h = cfg.hidden
        self.conv_in = Conv1d(width, h, 3, rng, padding=1)
        self.down = [Conv1d(h, h, 4, rng, stride=2, padding=1) for _ in range(cfg.n_stages)]
        self.mix = Conv1d(h, h, 3, rng, padding=1)
        self.conv_out = Conv1d(h, cfg.code_dim, 3, rng, padding=1)

    def __call__(self, x) -> Array:
        h = nd.leaky_relu(self.conv_in(x))
        for conv in self.down:
            h = nd.leaky_relu(conv(h))
        h = h + nd.leaky_relu(self.mix(h))
        return self.conv_out(h)


class Decoder(Module):
    def __init__(self, width: int, cfg: VQConfig, rng: np.random.Generator):
        h = cfg.hidden
        self.conv_in = Conv1d(cfg.code_dim, h, 3, rng, padding=1)
        self.mix = Conv1d(h, h, 3, rng, padding=1)
        self.up = [Conv1d(h, h, 3, rng, padding=1) for _ in range(cfg.n_stages)]
        self.conv_out = Conv1d(h, width, 3, rng, padding=1)

    def __call__(self, z) -> Array:
        h = nd.leaky_relu(self.conv_in(z))
        h = h + nd.leaky_relu(self.mix(h))
        for conv in self.up:
            h = nd.leaky_relu(conv(nd.repeat(h, 2, axis=1)))
        return self.conv_out(h)


class MotionVQVAE(Module):
    """One body part's encoder, codebook and decoder.

    Inputs and outputs are part slices (B, T, width); latents are (B, T/P, C).
    """

    def __init__(self, part: PartLayout, cfg: VQConfig | None = None,
                 rng: np.random.Generator | None = None):
        cfg = cfg or VQConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.encoder = Encoder(part.width, cfg, rng)
        self.codebook = Codebook(cfg.codebook_size, cfg.code_dim, rng)
        self.decoder = Decoder(part.width, cfg, rng)
        self._part = part
        self._cfg = cfg
        self._rest = part.rest_pose()

    @property
    def part(self) -> PartLayout:
        return self._part

    @property
    def config(self) -> VQConfig:
        return self._cfg

    def check_length(self, length: int) -> None:
        p = self._cfg.downsample
        if length % p:
            pad = (-length) % p
            raise ValueError(f"sequence length {length} is not divisible by the downsample "
                             f"factor {p}; pad {pad} frame(s) to reach {length + pad}")

    def encode(self, m) -> Array:
        m = nd.as_array(m)
        if m.ndim == 2:
            m = m.reshape((1,) + m.shape)
        self.check_length(m.shape[1])
        return self.encoder(m - self._rest)

    def quantize(self, z_e) -> tuple[Array, np.ndarray]:
        return quantize(z_e, self.codebook)

    def decode(self, z_q) -> Array:
        return self.decoder(z_q) + self._rest

    def decode_indices(self, idx: np.ndarray) -> Array:
        return self.decode(nd.getitem(self.codebook.entries, np.asarray(idx)))

    def __call__(self, m) -> dict:
        z_e = self.encode(m)
        z_q, idx = self.quantize(z_e)
        recon = self.decode(straight_through(z_e, z_q))
        return {"z_e": z_e, "z_q": z_q, "idx": idx, "recon": recon}
