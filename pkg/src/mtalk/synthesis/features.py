"""Learnable stand-ins for the speech encoders, and the fusion gates.

Audio features are computed per motion frame. Channel 0 is the RMS envelope
of the frame's sample window; an amplitude CNN runs over sub-frame RMS
profiles; the face stream additionally gets a strided CNN over raw samples,
resampled from its own rate to the frame rate.
"""

from __future__ import annotations

import numpy as np

from .. import ndiff as nd
from ..ndiff import Array, Conv1d, Embedding, Linear, Module
from .config import GeneratorConfig


def frame_span(n_frames: int, samples_per_frame: float) -> int:
    """Samples covered by ``n_frames`` frames, robust to rounding in the rate ratio."""
    return int(np.ceil(n_frames * samples_per_frame - 1e-6))


def frame_windows(audio: np.ndarray, n_frames: int, samples_per_frame: float,
                  sub_frames: int = 1) -> np.ndarray:
    """(n_frames, sub_frames, L) sample windows; frame k covers
    [k * spf, (k + 1) * spf)."""
    audio = np.asarray(audio, dtype=np.float64)
    span = frame_span(n_frames, samples_per_frame)
    if audio.shape[-1] < span:
        raise ValueError(f"audio has {audio.shape[-1]} samples but {n_frames} frames "
                         f"need {span}")
    width = int(np.floor(samples_per_frame / sub_frames))
    starts = (np.arange(n_frames)[:, None] * samples_per_frame
              + np.arange(sub_frames)[None, :] * (samples_per_frame / sub_frames))
    idx = np.floor(starts).astype(np.int64)[..., None] + np.arange(width)
    return audio[..., idx]


def envelope(audio: np.ndarray, n_frames: int, samples_per_frame: float,
             sub_frames: int = 1) -> np.ndarray:
    """RMS per frame (and sub-frame): (..., n_frames, sub_frames)."""
    w = frame_windows(audio, n_frames, samples_per_frame, sub_frames)
    return np.sqrt((w ** 2).mean(axis=-1))


def resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) linear interpolation between sequence centres."""
    pos = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    pos = np.clip(pos, 0.0, n_in - 1.0)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    m = np.zeros((n_out, n_in))
    m[np.arange(n_out), lo] += 1.0 - frac
    m[np.arange(n_out), hi] += frac
    return m


class AudioEncoder(Module):
    """Per-frame audio features of width D; ``raw`` adds the raw-sample CNN."""

    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator, raw: bool):
        d = cfg.model_dim
        amp_out = (d // 2 if raw else d) - 1
        self.amp_in = Conv1d(cfg.sub_frames + 1, d, 3, rng, padding=1)
        self.amp_out = Conv1d(d, amp_out, 3, rng, padding=1)
        if raw:
            self.raw_in = Conv1d(cfg.raw_block, d, 3, rng, stride=2, padding=1)
            self.raw_out = Conv1d(d, d // 2, 3, rng, stride=2, padding=1)
        self._cfg = cfg
        self._raw = raw

    def __call__(self, audio: np.ndarray, n_frames: int) -> Array:
        cfg = self._cfg
        audio = np.asarray(audio, dtype=np.float64)
        if audio.ndim == 1:
            audio = audio[None]
        sub = envelope(audio, n_frames, cfg.samples_per_frame, cfg.sub_frames)
        env = envelope(audio, n_frames, cfg.samples_per_frame)
        amp = np.concatenate([sub, env], axis=-1)
        h = self.amp_out(nd.leaky_relu(self.amp_in(amp)))
        feats = [Array(env), h]
        if self._raw:
            span = frame_span(n_frames, cfg.samples_per_frame)
            n_blocks = span // cfg.raw_block
            blocks = audio[:, : n_blocks * cfg.raw_block].reshape(audio.shape[0], n_blocks,
                                                                   cfg.raw_block)
            r = self.raw_out(nd.leaky_relu(self.raw_in(blocks)))
            feats.append(nd.matmul(Array(resample_matrix(r.shape[1], n_frames)), r))
        return nd.concat(feats, axis=-1)


class TextEncoder(Module):
    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator):
        self.embed = Embedding(cfg.vocab_size, cfg.model_dim, rng)
        self.proj = Linear(cfg.model_dim, cfg.model_dim, rng)

    def __call__(self, tokens) -> Array:
        tokens = np.asarray(tokens)
        if tokens.ndim == 1:
            tokens = tokens[None]
        return self.proj(self.embed(tokens))


class FusionGates(Module):
    """Per-channel two-way softmax gates mixing audio and text features."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.gate_T = Linear(2 * dim, 2 * dim, rng)
        self.gate_A = Linear(2 * dim, 2 * dim, rng)
        self._dim = dim

    def weights(self, f_A, f_T, s_id) -> tuple[Array, Array]:
        f_A, f_T, s_id = nd.as_array(f_A), nd.as_array(f_T), nd.as_array(s_id)
        # one speaker vector per sequence, broadcast over time
        s = s_id.reshape((s_id.shape[0], 1, s_id.shape[-1]))
        u = nd.concat([f_A + s, f_T + s], axis=-1)
        out = []
        for gate in (self.gate_T, self.gate_A):
            logits = gate(u)
            pairs = logits.reshape(logits.shape[:-1] + (self._dim, 2))
            out.append(nd.softmax(pairs, axis=-1)[..., 0])
        return out[0], out[1]

    def __call__(self, f_A, f_T, s_id) -> tuple[Array, Array]:
        return fuse_features(f_A, f_T, s_id, self)


def fuse_features(f_A, f_T, s_id, gates: FusionGates, weights=None) -> tuple[Array, Array]:
    """Returns (f_bar_A, f_bar_T), each a per-channel convex mix of f_A and f_T.

    ``weights`` = (w_T, w_A) overrides the learned gates.
    """
    f_A, f_T = nd.as_array(f_A), nd.as_array(f_T)
    if f_A.shape != f_T.shape:
        raise nd.ShapeError(f"fuse_features: f_A {f_A.shape} vs f_T {f_T.shape}")
    w_T, w_A = weights if weights is not None else gates.weights(f_A, f_T, s_id)
    w_T, w_A = nd.as_array(w_T), nd.as_array(w_A)
    f_bar_T = w_T * f_A + (1.0 - w_T) * f_T
    f_bar_A = w_A * f_A + (1.0 - w_A) * f_T
    return f_bar_A, f_bar_T


def temporal_pool(x, factor: int) -> Array:
    """Average non-overlapping groups of ``factor`` frames: (B, T, D) -> (B, T/factor, D)."""
    x = nd.as_array(x)
    bsz, length, dim = x.shape
    if length % factor:
        raise ValueError(f"length {length} is not divisible by {factor}")
    return x.reshape(bsz, length // factor, factor, dim).mean(axis=2)


class SpeakerTable(Module):
    def __init__(self, n_speakers: int, dim: int, rng: np.random.Generator):
        self.table = Embedding(n_speakers, dim, rng)

    def __call__(self, speaker_ids) -> Array:
        return self.table(np.atleast_1d(np.asarray(speaker_ids)))
