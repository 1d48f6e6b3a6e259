"""Binary motion/audio files and plain-text token files.

Motion (.mtmo): b"MTMO", version u16, fps u16, T u32, D u32, then T*D float32,
row-major. Audio (.mtau): b"MTAU", rate u32, length u32, then float32 samples.
All integers and floats are little-endian. Tokens (.txt): one decimal id per
line, UTF-8.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MOTION_MAGIC = b"MTMO"
AUDIO_MAGIC = b"MTAU"
MOTION_VERSION = 1

_MOTION_HEADER = struct.Struct("<4sHHII")
_AUDIO_HEADER = struct.Struct("<4sII")


class CorpusFormatError(ValueError):
    pass


class MagicMismatchError(CorpusFormatError):
    pass


class TruncatedFileError(CorpusFormatError):
    def __init__(self, path, expected: int, actual: int):
        super().__init__(f"{path}: truncated, expected {expected} bytes but found {actual}")
        self.expected = expected
        self.actual = actual


class UnsupportedVersionError(CorpusFormatError):
    pass


@dataclass
class Motion:
    frames: np.ndarray
    fps: int

    @property
    def duration(self) -> float:
        return self.frames.shape[0] / self.fps


def _read(path) -> bytes:
    return Path(path).read_bytes()


def _check_header(path, raw: bytes, header: struct.Struct, magic: bytes):
    if len(raw) < header.size:
        if raw[:4] != magic[:len(raw[:4])]:
            raise MagicMismatchError(f"{path}: bad magic {raw[:4]!r}, expected {magic!r}")
        raise TruncatedFileError(path, header.size, len(raw))
    fields = header.unpack_from(raw)
    if fields[0] != magic:
        raise MagicMismatchError(f"{path}: bad magic {fields[0]!r}, expected {magic!r}")
    return fields


def write_motion(path, frames: np.ndarray, fps: int) -> None:
    frames = np.asarray(frames)
    if frames.ndim != 2:
        raise ValueError(f"motion frames must be (T, D), got {frames.shape}")
    t, d = frames.shape
    payload = np.ascontiguousarray(frames, dtype="<f4").tobytes()
    Path(path).write_bytes(_MOTION_HEADER.pack(MOTION_MAGIC, MOTION_VERSION, fps, t, d) + payload)


def read_motion(path) -> Motion:
    raw = _read(path)
    _, version, fps, t, d = _check_header(path, raw, _MOTION_HEADER, MOTION_MAGIC)
    if version != MOTION_VERSION:
        raise UnsupportedVersionError(f"{path}: motion format version {version} is not supported")
    expected = _MOTION_HEADER.size + 4 * t * d
    if len(raw) != expected:
        raise TruncatedFileError(path, expected, len(raw))
    data = np.frombuffer(raw, dtype="<f4", offset=_MOTION_HEADER.size).reshape(t, d)
    return Motion(data.astype(np.float64), fps)


def write_audio(path, samples: np.ndarray, rate: int) -> None:
    samples = np.asarray(samples).reshape(-1)
    payload = np.ascontiguousarray(samples, dtype="<f4").tobytes()
    Path(path).write_bytes(_AUDIO_HEADER.pack(AUDIO_MAGIC, rate, samples.size) + payload)


def read_audio(path) -> tuple[np.ndarray, int]:
    raw = _read(path)
    _, rate, n = _check_header(path, raw, _AUDIO_HEADER, AUDIO_MAGIC)
    expected = _AUDIO_HEADER.size + 4 * n
    if len(raw) != expected:
        raise TruncatedFileError(path, expected, len(raw))
    return np.frombuffer(raw, dtype="<f4", offset=_AUDIO_HEADER.size).astype(np.float64), rate


def write_tokens(path, tokens) -> None:
    text = "".join(f"{int(t)}\n" for t in tokens)
    Path(path).write_text(text, encoding="utf-8")


def read_tokens(path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").split()
    try:
        return np.array([int(x) for x in lines], dtype=np.int64)
    except ValueError as exc:
        raise CorpusFormatError(f"{path}: {exc}") from None
