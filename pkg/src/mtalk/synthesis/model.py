"""Stage-2 generator: fusion, global scan, query refinement, local scans.

Two feature streams run in parallel up to the local scan: ``face`` (audio
features include the raw-sample CNN) and ``body`` (amplitude only). Latent
sequences have length M = T / P for T motion frames.
"""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np

from .. import ndiff as nd
from ..attention import AttentionConfig, MultiHeadAttention, mhca, mhsa
from ..motion_vq.layout import BODY_PARTS, PART_NAMES
from ..ndiff import Array, Linear, Module, Parameter
from ..ssm import SsmParams, gated_scan, mamba_block
from .config import GeneratorConfig
from .features import AudioEncoder, FusionGates, SpeakerTable, TextEncoder, fuse_features, temporal_pool

STREAMS = ("face", "body")


def stream_of(part: str) -> str:
    return "face" if part == "face" else "body"


class Timer:
    """Accumulates wall-clock seconds per named span."""

    def __init__(self):
        self.spans: dict[str, float] = {}

    @contextmanager
    def span(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.spans[name] = self.spans.get(name, 0.0) + time.perf_counter() - t0


@contextmanager
def _maybe(timer: Timer | None, name: str):
    if timer is None:
        yield
    else:
        with timer.span(name):
            yield


class GlobalScan(Module):
    """Learnable queries, their self-attention, and the per-stream scans."""

    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator):
        d = cfg.model_dim
        att = AttentionConfig(d, cfg.heads)
        self.queries = Parameter(rng.normal(0.0, 0.5, size=(cfg.query_len, d)))
        self.query_attn = MultiHeadAttention(att, rng)
        self.speech_ssm = {s: _ssm(cfg, rng) for s in STREAMS}
        self.query_ssm = {s: _ssm(cfg, rng) for s in STREAMS}
        self.merge = {s: Linear(3 * d, d, rng) for s in STREAMS}
        self.refine = {s: MultiHeadAttention(att, rng) for s in STREAMS}

    def tiled_queries(self, length: int, batch: int) -> Array:
        """Queries repeated cyclically to ``length`` tokens, broadcast to the batch."""
        idx = np.arange(length) % self.queries.shape[0]
        q = nd.getitem(self.queries, idx)
        return q.reshape((1, length, q.shape[-1])) + np.zeros((batch, 1, 1))


def _ssm(cfg: GeneratorConfig, rng, project_out: bool = True) -> SsmParams:
    return SsmParams(cfg.model_dim, cfg.inner_dim, cfg.state_dim, rng, cfg.conv_kernel,
                     cfg.ssm_mode, project_out=project_out)


def global_scan(f_bar_A, f_bar_T, q_global, gs: GlobalScan, stream: str):
    """Returns (f_global, f_bar_global) for one stream.

    f_bar_global = mhsa(Q); the speech scan runs over [f_bar_T, f_bar_A]
    joined along the sequence axis (length 2M), whose two halves are then
    stacked along channels to realign with the M query tokens before the
    merging linear layer.
    """
    f_bar_A, f_bar_T = nd.as_array(f_bar_A), nd.as_array(f_bar_T)
    if f_bar_A.shape != f_bar_T.shape:
        raise nd.ShapeError(f"global_scan: {f_bar_A.shape} vs {f_bar_T.shape}")
    m = f_bar_A.shape[1]
    f_bar_global = mhsa(q_global, gs.query_attn)
    f_speech = mamba_block(nd.concat([f_bar_T, f_bar_A], axis=1), gs.speech_ssm[stream])
    f_hat_global = mamba_block(f_bar_global, gs.query_ssm[stream])
    folded = nd.concat([f_speech[:, :m], f_speech[:, m:]], axis=-1)
    f_global = gs.merge[stream](nd.concat([folded, f_hat_global], axis=-1))
    return f_global, f_bar_global


def refine_queries(f_bar_global, f_bar_T, f_bar_A, block: MultiHeadAttention,
                   return_weights: bool = False):
    """Queries attend to the sequence-joined speech features."""
    kv = nd.concat([nd.as_array(f_bar_T), nd.as_array(f_bar_A)], axis=1)
    return mhca(f_bar_global, kv, block, return_weights)


class LocalScan(Module):
    """Per-part selective scans merged into one residual token stream, then
    per-part latent and code-logit heads."""

    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator):
        d, e = cfg.model_dim, cfg.inner_dim
        att = AttentionConfig(d, cfg.heads)
        self.body_attn = {o: MultiHeadAttention(att, rng) for o in BODY_PARTS}
        self.paths = {o: _ssm(cfg, rng, project_out=False) for o in PART_NAMES}
        self.merge = Linear(e, d, rng)
        self.latent_head = {o: Linear(d + e, cfg.code_dim, rng) for o in PART_NAMES}
        self.logit_head = {o: Linear(d + e, cfg.codebook_size, rng) for o in PART_NAMES}

    def zero_heads(self) -> None:
        for heads in (self.latent_head, self.logit_head):
            for lin in heads.values():
                lin.weight.data[:] = 0.0
                lin.bias.data[:] = 0.0


def apply_mask(x, mask) -> Array:
    """Zero the time steps where ``mask`` (B, M) is True."""
    x = nd.as_array(x)
    if mask is None:
        return x
    keep = 1.0 - np.asarray(mask, dtype=np.float64)[..., None]
    return x * keep


def local_scan(f_refine: dict, f_global: dict, ls: LocalScan, mask=None) -> dict:
    """Per-stream inputs T_s = f_refine_s + f_global_s. The face path scans
    T_face directly; body paths scan self-attended T_body. The gated outputs
    y'_o are summed, projected, and added to T_face + T_body; each part's
    heads read that shared stream alongside its own y'_o.

    Returns {"latents": {o: (B, M, C)}, "logits": {o: (B, M, N)}, "paths": {o: y'_o},
    "tokens": shared stream}.
    """
    streams = {s: apply_mask(f_refine[s], mask) + f_global[s] for s in STREAMS}
    paths = {}
    for o in PART_NAMES:
        u = streams["face"] if o == "face" else mhsa(streams["body"], ls.body_attn[o])
        paths[o] = gated_scan(u, ls.paths[o])
    total = paths[PART_NAMES[0]]
    for o in PART_NAMES[1:]:
        total = total + paths[o]
    tokens = ls.merge(total) + streams["face"] + streams["body"]
    latents, logits = {}, {}
    for o in PART_NAMES:
        h = nd.concat([tokens, paths[o]], axis=-1)
        latents[o] = ls.latent_head[o](h)
        logits[o] = ls.logit_head[o](h)
    return {"latents": latents, "logits": logits, "paths": paths, "tokens": tokens}


class Generator(Module):
    def __init__(self, cfg: GeneratorConfig | None = None):
        cfg = cfg or GeneratorConfig()
        rng = np.random.default_rng([cfg.seed, 2])
        self.audio = {"face": AudioEncoder(cfg, rng, raw=True),
                      "body": AudioEncoder(cfg, rng, raw=False)}
        self.text = TextEncoder(cfg, rng)
        self.speaker = SpeakerTable(cfg.n_speakers, cfg.model_dim, rng)
        self.fusion = {s: FusionGates(cfg.model_dim, rng) for s in STREAMS}
        self.global_scan = GlobalScan(cfg, rng)
        self.local_scan = LocalScan(cfg, rng)
        self._cfg = cfg

    @property
    def config(self) -> GeneratorConfig:
        return self._cfg

    def __call__(self, audio, tokens, speaker, n_frames: int, mask=None,
                 timer: Timer | None = None) -> dict:
        """audio (B, S) samples, tokens (B, n_frames) ids, speaker (B,) ids."""
        cfg = self._cfg
        if n_frames % cfg.downsample:
            raise ValueError(f"{n_frames} frames not divisible by {cfg.downsample}")
        tokens = np.asarray(tokens)
        if tokens.ndim == 1:
            tokens = tokens[None]
        if tokens.shape[-1] != n_frames:
            raise ValueError(f"expected {n_frames} token ids per sequence, got {tokens.shape[-1]}")
        with _maybe(timer, "audio_encoders"):
            f_A = {s: temporal_pool(self.audio[s](audio, n_frames), cfg.downsample)
                   for s in STREAMS}
        with _maybe(timer, "text_encoders"):
            f_T = temporal_pool(self.text(tokens), cfg.downsample)
        with _maybe(timer, "global_scan"):
            s_id = self.speaker(speaker)
            bsz, m = f_T.shape[0], f_T.shape[1]
            q = self.global_scan.tiled_queries(m, bsz)
            f_global, f_refine = {}, {}
            for s in STREAMS:
                f_bar_A, f_bar_T = fuse_features(f_A[s], f_T, s_id, self.fusion[s])
                f_global[s], f_bar_global = global_scan(f_bar_A, f_bar_T, q, self.global_scan, s)
                f_refine[s] = refine_queries(f_bar_global, f_bar_T, f_bar_A,
                                             self.global_scan.refine[s])
        with _maybe(timer, "local_scan"):
            return local_scan(f_refine, f_global, self.local_scan, mask)
