"""Binary checkpoints: named float64 tensors plus a JSON config blob.

Layout (little-endian): magic (4 bytes), version u16, tag length u16 and
UTF-8 tag, config length u32 and UTF-8 JSON, tensor count u32, then per
tensor: name length u16, UTF-8 name, ndim u8, ndim x u32 dims, float64 data.
Stage-1 files use magic b"MTVQ" with the body part as tag; stage-2 files use
b"MTG2" with an empty tag.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VQ_MAGIC = b"MTVQ"
GEN_MAGIC = b"MTG2"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    magic: bytes
    tag: str
    config: dict
    tensors: dict[str, np.ndarray]


def dumps(magic: bytes, tag: str, config: dict, tensors: dict[str, np.ndarray]) -> bytes:
    tag_b = tag.encode("utf-8")
    cfg_b = json.dumps(config, sort_keys=True).encode("utf-8")
    parts = [magic, struct.pack("<HH", VERSION, len(tag_b)), tag_b,
             struct.pack("<I", len(cfg_b)), cfg_b, struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        name_b = name.encode("utf-8")
        parts += [struct.pack("<H", len(name_b)), name_b, struct.pack("<B", arr.ndim),
                  struct.pack(f"<{arr.ndim}I", *arr.shape), arr.tobytes()]
    return b"".join(parts)


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CheckpointError(f"{self.path}: truncated checkpoint, needed {self.pos + n} "
                                  f"bytes but found {len(self.raw)}")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))


def loads(raw: bytes, magic: bytes, path="<bytes>") -> Checkpoint:
    r = _Reader(raw, path)
    found = r.take(4)
    if found != magic:
        raise CheckpointError(f"{path}: bad magic {found!r}, expected {magic!r}")
    version, tag_len = r.unpack("<HH")
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version} is not supported")
    tag = r.take(tag_len).decode("utf-8")
    (cfg_len,) = r.unpack("<I")
    config = json.loads(r.take(cfg_len).decode("utf-8"))
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        n = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - r.pos} trailing bytes after checkpoint")
    return Checkpoint(magic, tag, config, tensors)


def save(path, magic: bytes, tag: str, config: dict, tensors: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(magic, tag, config, tensors))


def load(path, magic: bytes) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    return loads(path.read_bytes(), magic, path)
