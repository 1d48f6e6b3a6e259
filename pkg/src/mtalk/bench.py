"""Latency measurements: per-module generation cost and scan-vs-attention scaling."""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from . import ndiff as nd
from .attention import attention_baseline
from .ndiff import Array
from .ssm import SsmParams, mamba_block
from .synthesis import MODULE_ROWS, Models, generate


def module_times(models: Models, duration: float, repeats: int, seed: int = 0) -> dict:
    """Seconds per generated second for each pipeline module: {row: (mean, std)}."""
    cfg = models.generator.config
    rng = np.random.default_rng(seed)
    n_frames = int(round(duration * cfg.fps))
    audio = rng.normal(scale=0.1, size=int(np.ceil(n_frames * cfg.samples_per_frame)) + 1)
    tokens = rng.integers(0, cfg.vocab_size, size=n_frames)
    generate(audio, tokens, 0, models)  # warm-up
    samples = {row: [] for row in MODULE_ROWS}
    for _ in range(repeats):
        out = generate(audio, tokens, 0, models)
        for row in MODULE_ROWS:
            samples[row].append(out.timings[row] / out.duration)
    return {row: (float(np.mean(v)), float(np.std(v))) for row, v in samples.items()}


def _best_time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def scaling_table(params: SsmParams, lengths: Sequence[int], repeats: int,
                  seed: int = 0) -> list[dict]:
    """Best-of-``repeats`` seconds for one selective-scan block and for plain
    softmax attention over sequences of each length."""
    dim = params.dims[0]
    rng = np.random.default_rng(seed)
    rows = []
    for m in lengths:
        x = rng.normal(size=(1, int(m), dim))
        with nd.no_grad():
            scan_t = _best_time(lambda: mamba_block(Array(x), params), repeats)
        attn_t = _best_time(lambda: attention_baseline(x[0]), repeats)
        rows.append({"length": int(m), "scan_seconds": scan_t, "attention_seconds": attn_t})
    return rows


def r_squared(x, y, degree: int) -> float:
    """Coefficient of determination of a least-squares polynomial fit."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    coef = np.polyfit(x, y, degree)
    resid = y - np.polyval(coef, x)
    total = ((y - y.mean()) ** 2).sum()
    return float(1.0 - (resid ** 2).sum() / total) if total > 0 else 1.0


def scaling_fits(rows: list[dict]) -> dict:
    lengths = [r["length"] for r in rows]
    out = {}
    for key in ("scan", "attention"):
        y = [r[f"{key}_seconds"] for r in rows]
        out[key] = {"linear_r2": r_squared(lengths, y, 1), "quadratic_r2": r_squared(lengths, y, 2)}
    return out
