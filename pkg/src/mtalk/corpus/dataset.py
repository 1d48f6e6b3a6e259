"""Reading a generated corpus back from disk."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..motion_vq.layout import BodyLayout
from . import formats
from .synth import MANIFEST, CorpusSpec, clip_stem


@dataclass
class Clip:
    clip_id: int
    speaker: int
    split: str
    motion: np.ndarray
    fps: int
    audio: np.ndarray
    rate: int
    tokens: np.ndarray


class Corpus:
    def __init__(self, root):
        self.root = Path(root)
        path = self.root / MANIFEST
        if not path.exists():
            raise FileNotFoundError(f"{self.root} has no {MANIFEST}; not a corpus directory")
        manifest = json.loads(path.read_text(encoding="utf-8"))
        self.spec = CorpusSpec(**manifest["spec"])
        self.layout = BodyLayout(**manifest["layout"])
        self.entries = manifest["clips"]
        self._cache: dict[int, Clip] = {}

    def ids(self, split: str | None = None) -> list[int]:
        return [e["id"] for e in self.entries if split is None or e["split"] == split]

    def clip(self, clip_id: int) -> Clip:
        if clip_id not in self._cache:
            entry = next(e for e in self.entries if e["id"] == clip_id)
            base = self.root / entry["split"] / clip_stem(clip_id)
            motion = formats.read_motion(base.with_suffix(".mtmo"))
            audio, rate = formats.read_audio(base.with_suffix(".mtau"))
            tokens = formats.read_tokens(base.with_suffix(".txt"))
            self._cache[clip_id] = Clip(clip_id, entry["speaker"], entry["split"], motion.frames,
                                        motion.fps, audio, rate, tokens)
        return self._cache[clip_id]

    def clips(self, split: str | None = None) -> list[Clip]:
        return [self.clip(i) for i in self.ids(split)]
