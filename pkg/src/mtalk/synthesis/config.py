"""Stage-2 generator configuration and its key=value mapping."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..config import ConfigError, apply_overrides, coerce
from ..motion_vq.layout import BODY_PARTS, PART_NAMES

DEFAULT_ALPHA = {"face": 0.0, "upper": 1.0, "hands": 1.0, "lower": 1.0}
DEFAULT_BETA = {"face": 3.0, "upper": 3.0, "hands": 3.0, "lower": 3.0}


@dataclass
class GeneratorConfig:
    model_dim: int = 64
    heads: int = 4
    inner_dim: int = 128
    state_dim: int = 8
    conv_kernel: int = 4
    ssm_mode: str = "euler"
    vocab_size: int = 24
    n_speakers: int = 2
    codebook_size: int = 64
    code_dim: int = 32
    downsample: int = 4
    fps: int = 30
    audio_rate: int = 16000
    sub_frames: int = 8
    raw_block: int = 80
    query_len: int = 16
    mask_ratio: float = 1.0 / 3.0
    epochs: int = 100
    lr: float = 2.5e-4
    batch_size: int = 8
    window: int = 64
    seed: int = 0
    alpha: dict = field(default_factory=lambda: dict(DEFAULT_ALPHA))
    beta: dict = field(default_factory=lambda: dict(DEFAULT_BETA))

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.model_dim % 2:
            raise ConfigError("model_dim must be even (face audio splits it in halves)")
        if self.window % self.downsample:
            raise ConfigError(f"window {self.window} not divisible by downsample {self.downsample}")
        if not 0.0 <= self.mask_ratio < 1.0:
            raise ConfigError(f"mask_ratio must lie in [0, 1), got {self.mask_ratio}")
        for name in ("alpha", "beta"):
            weights = getattr(self, name)
            if set(weights) != set(PART_NAMES):
                raise ConfigError(f"{name} needs one weight per part {PART_NAMES}")

    @property
    def samples_per_frame(self) -> float:
        return self.audio_rate / self.fps

    def to_flat(self) -> dict:
        """Flat key=value view; per-part weights become alpha_<part> / beta_<part>."""
        out = asdict(self)
        for name in ("alpha", "beta"):
            for part, w in out.pop(name).items():
                out[f"{name}_{part}"] = w
        return out

    @classmethod
    def from_flat(cls, values: dict, base: "GeneratorConfig | None" = None) -> "GeneratorConfig":
        cfg = cls(**asdict(base)) if base is not None else cls()
        plain = {}
        for key, value in values.items():
            head, _, part = key.partition("_")
            if head in ("alpha", "beta") and part in PART_NAMES:
                getattr(cfg, head)[part] = coerce(str(value), 0.0)
            else:
                plain[key] = str(value)
        apply_overrides(cfg, plain)
        try:
            cfg.__post_init__()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cfg


__all__ = ["BODY_PARTS", "DEFAULT_ALPHA", "DEFAULT_BETA", "GeneratorConfig"]
