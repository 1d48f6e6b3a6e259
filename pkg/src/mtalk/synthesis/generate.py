"""End-to-end generation through the frozen per-part decoders, and the
generator checkpoint format."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import checkpoint
from .. import ndiff as nd
from ..motion_vq.layout import DEFAULT_LAYOUT, PART_NAMES, BodyLayout
from ..motion_vq.model import MotionVQVAE
from .config import GeneratorConfig
from .model import Generator, Timer

MODULE_ROWS = ("audio_encoders", "text_encoders", "global_scan", "local_scan",
               "face_vq_decoder", "hands_vq_decoder", "upper_vq_decoder", "lower_vq_decoder",
               "total")


@dataclass
class Models:
    generator: Generator
    vq: dict[str, MotionVQVAE]
    layout: BodyLayout = DEFAULT_LAYOUT


@dataclass
class Generated:
    motion: np.ndarray          # (T, D) frames
    fps: int
    latents: dict
    timings: dict = field(default_factory=dict)   # seconds per module for this call

    @property
    def duration(self) -> float:
        return self.motion.shape[0] / self.fps


def output_frames(n_audio: int, n_tokens: int, cfg: GeneratorConfig) -> int:
    """Largest multiple of the downsample factor covered by both inputs."""
    n = min(n_tokens, int(np.floor(n_audio / cfg.samples_per_frame + 1e-6)))
    return n - n % cfg.downsample


def generate(audio: np.ndarray, tokens: np.ndarray, speaker_id: int, models: Models) -> Generated:
    """Speech to full-body motion: T' latent steps per part decoded to T'*P frames."""
    gen = models.generator
    cfg = gen.config
    audio = np.asarray(audio, dtype=np.float64).reshape(-1)
    tokens = np.asarray(tokens).reshape(-1)
    n = output_frames(audio.size, tokens.size, cfg)
    if n <= 0:
        raise ValueError("inputs are too short to produce one latent step")
    if not 0 <= speaker_id < cfg.n_speakers:
        raise IndexError(f"speaker {speaker_id} outside [0, {cfg.n_speakers})")
    timer = Timer()
    t0 = time.perf_counter()
    with nd.no_grad():
        out = gen(audio[None], tokens[None, :n], [speaker_id], n, timer=timer)
        parts = {}
        for o in PART_NAMES:
            with timer.span(f"{o}_vq_decoder"):
                parts[o] = models.vq[o].decode(out["latents"][o]).data[0]
    motion = models.layout.assemble(parts)
    timer.spans["total"] = time.perf_counter() - t0
    latents = {o: out["latents"][o].data[0] for o in PART_NAMES}
    return Generated(motion, cfg.fps, latents, dict(timer.spans))


def save_generator(path, gen: Generator, extra: dict | None = None) -> None:
    config = {"generator": gen.config.to_flat(), **(extra or {})}
    checkpoint.save(path, checkpoint.GEN_MAGIC, "", config, gen.state_dict())


def load_generator(path) -> Generator:
    ckpt = checkpoint.load(path, checkpoint.GEN_MAGIC)
    try:
        gen = Generator(GeneratorConfig.from_flat(ckpt.config["generator"]))
        gen.load_state_dict(ckpt.tensors)
    except (KeyError, TypeError, ValueError) as exc:
        raise checkpoint.CheckpointError(f"{path}: {exc}") from None
    return gen
