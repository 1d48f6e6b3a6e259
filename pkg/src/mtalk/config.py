"""UTF-8 key=value configuration files.

Blank lines and lines starting with '#' are ignored; keys and values are
stripped. Later keys override earlier ones.
"""

from __future__ import annotations

import hashlib
from dataclasses import fields, is_dataclass
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(values: Mapping[str, Any]) -> str:
    return "".join(f"{k}={_fmt(values[k])}\n" for k in sorted(values))


def write_config(path, values: Mapping[str, Any]) -> None:
    Path(path).write_text(format_config(values), encoding="utf-8")


def config_hash(values: Mapping[str, Any]) -> str:
    return hashlib.sha256(format_config(values).encode("utf-8")).hexdigest()[:12]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def coerce(value: str, like):
    """Convert ``value`` to the type of the default ``like``."""
    try:
        if isinstance(like, bool):
            lowered = value.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return lowered in ("true", "1", "yes")
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"cannot read {value!r} as {type(like).__name__}") from None
    return value


def apply_overrides(obj, values: Mapping[str, str], prefix: str = "", strict: bool = True):
    """Set dataclass fields named ``prefix + field`` from string values."""
    if not is_dataclass(obj):
        raise TypeError("apply_overrides expects a dataclass instance")
    known = {f.name for f in fields(obj)}
    for key, value in values.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name in known and not is_dataclass(getattr(obj, name)):
            setattr(obj, name, coerce(value, getattr(obj, name)))
        elif strict and prefix == "" and name not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
    return obj
