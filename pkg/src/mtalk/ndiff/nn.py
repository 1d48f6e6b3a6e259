"""Parameter containers and the standard layers built on the engine."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .core import Array
from .linalg import conv1d, layer_norm, linear
from .ops import getitem


def Parameter(data) -> Array:
    return Array(np.array(data, dtype=np.float64), requires_grad=True)


class Module:
    """Attribute-registered parameter tree with deterministic naming."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Array]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Array) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")
                    elif isinstance(item, Array) and item.requires_grad:
                        yield f"{full}.{i}", item
            elif isinstance(value, dict):
                for key in value:
                    item = value[key]
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{key}.")
                    elif isinstance(item, Array) and item.requires_grad:
                        yield f"{full}.{key}", item

    def parameters(self) -> list[Array]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{name}: expected shape {p.shape}, got {value.shape}")
            p.data = value.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> Array:
    bound = 1.0 / np.sqrt(fan_in)
    return Parameter(rng.uniform(-bound, bound, size=shape))


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = uniform_init(rng, (n_in, n_out), n_in)
        self.bias = Parameter(np.zeros(n_out)) if bias else None

    def __call__(self, x) -> Array:
        return linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, n_in: int, n_out: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding=0, groups: int = 1):
        self.weight = uniform_init(rng, (n_out, n_in // groups, kernel), n_in // groups * kernel)
        self.bias = Parameter(np.zeros(n_out))
        self._stride, self._padding, self._groups = stride, padding, groups

    def __call__(self, x) -> Array:
        return conv1d(x, self.weight, self.bias, self._stride, self._padding, self._groups)


class Embedding(Module):
    def __init__(self, n_rows: int, dim: int, rng: np.random.Generator):
        self.table = Parameter(rng.normal(0.0, 1.0, size=(n_rows, dim)))

    def __call__(self, ids) -> Array:
        ids = np.asarray(ids)
        n = self.table.shape[0]
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise IndexError(f"embedding id out of range [0, {n})")
        return getitem(self.table, ids)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))

    def __call__(self, x) -> Array:
        return layer_norm(x, self.gamma, self.beta)
