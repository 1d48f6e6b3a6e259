"""Stage-2 training against frozen stage-1 targets, and held-out evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import ndiff as nd
from ..corpus import Clip
from ..motion_vq.layout import DEFAULT_LAYOUT, PART_NAMES, BodyLayout
from ..motion_vq.model import MotionVQVAE
from ..ndiff import Adam, AdamConfig
from .config import GeneratorConfig
from .features import frame_span
from .losses import generator_loss
from .model import Generator

log = logging.getLogger(__name__)


class MissingStage1Error(FileNotFoundError):
    pass


@dataclass
class PreparedClip:
    audio: np.ndarray      # padded samples
    tokens: np.ndarray     # (T,)
    speaker: int
    latents: dict          # part -> (M, C) quantized targets
    idx: dict              # part -> (M,)
    n_frames: int


def encode_targets(vq: dict[str, MotionVQVAE], motion: np.ndarray,
                   layout: BodyLayout = DEFAULT_LAYOUT) -> tuple[dict, dict]:
    """Frozen encode + quantize of every part: (latents, indices)."""
    latents, idx = {}, {}
    with nd.no_grad():
        for o in PART_NAMES:
            z_q, i = vq[o].quantize(vq[o].encode(layout.extract(motion, o)))
            latents[o], idx[o] = z_q.data[0], i[0]
    return latents, idx


def check_stage1(vq: dict) -> None:
    missing = [o for o in PART_NAMES if vq.get(o) is None]
    if missing:
        raise MissingStage1Error(f"missing stage-1 checkpoint(s) for {missing}")


def prepare_clips(clips: Sequence[Clip], vq: dict, cfg: GeneratorConfig,
                  layout: BodyLayout = DEFAULT_LAYOUT) -> list[PreparedClip]:
    out = []
    pad = int(np.ceil(cfg.samples_per_frame)) + 1
    for clip in clips:
        n = clip.motion.shape[0] - clip.motion.shape[0] % cfg.downsample
        latents, idx = encode_targets(vq, clip.motion[:n], layout)
        out.append(PreparedClip(np.pad(clip.audio, (0, pad)), clip.tokens[:n], clip.speaker,
                                latents, idx, n))
    return out


def sample_batch(clips: Sequence[PreparedClip], cfg: GeneratorConfig, rng: np.random.Generator):
    """One window per clip, starting on a latent boundary."""
    p, w = cfg.downsample, cfg.window
    m = w // p
    span = frame_span(w, cfg.samples_per_frame)
    audio, tokens, speakers = [], [], []
    latents = {o: [] for o in PART_NAMES}
    idx = {o: [] for o in PART_NAMES}
    for c in clips:
        k = int(rng.integers(0, (c.n_frames - w) // p + 1))
        a0 = int(round(k * p * cfg.samples_per_frame))
        audio.append(c.audio[a0:a0 + span])
        tokens.append(c.tokens[k * p:k * p + w])
        speakers.append(c.speaker)
        for o in PART_NAMES:
            latents[o].append(c.latents[o][k:k + m])
            idx[o].append(c.idx[o][k:k + m])
    return (np.stack(audio), np.stack(tokens), np.array(speakers),
            {o: np.stack(v) for o, v in latents.items()}, {o: np.stack(v) for o, v in idx.items()})


def train_stage2(clips: Sequence[Clip], vq: dict, cfg: GeneratorConfig | None = None,
                 layout: BodyLayout = DEFAULT_LAYOUT) -> tuple[Generator, list[dict]]:
    """Fit the generator on frozen stage-1 targets.

    Each epoch draws one window per training clip; a random ``mask_ratio``
    of latent steps have their refined queries zeroed. Returns the generator
    and per-epoch loss / accuracy statistics.
    """
    cfg = cfg or GeneratorConfig()
    check_stage1(vq)
    if not clips:
        raise ValueError("training corpus is empty")
    data = prepare_clips(clips, vq, cfg, layout)
    gen = Generator(cfg)
    opt = Adam(gen.parameters(), AdamConfig(lr=cfg.lr))
    rng = np.random.default_rng([cfg.seed, 3])
    m = cfg.window // cfg.downsample
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        sums: dict[str, float] = {}
        hits = {o: 0 for o in PART_NAMES}
        count = 0
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [data[i] for i in order[start:start + cfg.batch_size]]
            audio, tokens, speakers, lat, idx = sample_batch(batch, cfg, rng)
            mask = rng.random((len(batch), m)) < cfg.mask_ratio
            opt.zero_grad()
            out = gen(audio, tokens, speakers, cfg.window, mask=mask)
            loss, terms = generator_loss(out["latents"], out["logits"], lat, idx, cfg)
            loss.backward()
            opt.step()
            terms["loss"] = float(loss.data)
            for k, v in terms.items():
                sums[k] = sums.get(k, 0.0) + v
            for o in PART_NAMES:
                hits[o] += int((out["logits"][o].data.argmax(-1) == idx[o]).sum())
            count += idx[PART_NAMES[0]].size
            n_batches += 1
        stats = {k: v / n_batches for k, v in sums.items()}
        stats.update({f"{o}_acc": hits[o] / count for o in PART_NAMES})
        stats["epoch"] = epoch + 1
        history.append(stats)
        log.debug("stage2 epoch %d loss %.5f", epoch + 1, stats["loss"])
    return gen, history


def evaluate_generator(gen: Generator, clips: Sequence[Clip], vq: dict,
                       layout: BodyLayout = DEFAULT_LAYOUT) -> dict:
    """Full-clip code accuracy, latent MSE and target latent variance per part."""
    cfg = gen.config
    data = prepare_clips(clips, vq, cfg, layout)
    preds = {o: [] for o in PART_NAMES}
    logits = {o: [] for o in PART_NAMES}
    with nd.no_grad():
        for c in data:
            out = gen(c.audio[None], c.tokens[None], [c.speaker], c.n_frames)
            for o in PART_NAMES:
                preds[o].append(out["latents"][o].data[0])
                logits[o].append(out["logits"][o].data[0])
    report = {}
    for o in PART_NAMES:
        target = np.concatenate([c.latents[o] for c in data])
        idx = np.concatenate([c.idx[o] for c in data])
        pred = np.concatenate(preds[o])
        report[o] = {
            "accuracy": float((np.concatenate(logits[o]).argmax(-1) == idx).mean()),
            "latent_mse": float(((pred - target) ** 2).mean()),
            "target_variance": float(target.var(axis=0).mean()),
        }
    return report
