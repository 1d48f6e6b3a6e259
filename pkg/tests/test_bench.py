import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mtalk.bench import module_times, r_squared, scaling_fits, scaling_table
from mtalk.ssm import SsmParams
from mtalk.synthesis import MODULE_ROWS, Generator, GeneratorConfig, Models
from mtalk.motion_vq import PART_NAMES, DEFAULT_LAYOUT, MotionVQVAE, VQConfig


def test_r_squared_exact_fits():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert r_squared(x, 3 * x + 1, 1) == pytest.approx(1.0, abs=1e-12)
    assert r_squared(x, x ** 2, 2) == pytest.approx(1.0, abs=1e-12)
    assert r_squared(x, x ** 2, 1) < 1.0


def test_r_squared_hand_example():
    # y = (0, 2, 2, 4) on x = (0, 1, 2, 3): fit 1.2x + 0.2, SSE 0.8, SST 8
    assert r_squared([0, 1, 2, 3], [0, 2, 2, 4], 1) == pytest.approx(0.9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=12), st.integers(0, 2 ** 31))
def test_linear_r_squared_matches_pearson(ys, seed):
    y = np.array(ys)
    if np.ptp(y) < 1e-6:
        return
    x = np.sort(np.random.default_rng(seed).uniform(0, 100, size=len(y))) + np.arange(len(y))
    r = stats.pearsonr(x, y).statistic
    assert r_squared(x, y, 1) == pytest.approx(r ** 2, abs=1e-9)


def test_scaling_fits_prefer_quadratic_for_quadratic_costs():
    rows = [{"length": m, "scan_seconds": 1e-5 * m, "attention_seconds": 1e-8 * m * m}
            for m in (256, 512, 1024, 2048)]
    fits = scaling_fits(rows)
    assert fits["scan"]["linear_r2"] == pytest.approx(1.0)
    assert fits["attention"]["quadratic_r2"] > fits["attention"]["linear_r2"]


def test_scaling_table_shape():
    p = SsmParams(8, 16, 4, rng=np.random.default_rng(0))
    rows = scaling_table(p, [16, 32, 64], repeats=1)
    assert [r["length"] for r in rows] == [16, 32, 64]
    assert all(r["scan_seconds"] > 0 and r["attention_seconds"] > 0 for r in rows)


def test_module_times_rows():
    cfg = GeneratorConfig(model_dim=16, inner_dim=32, heads=2, codebook_size=16, code_dim=8)
    vq = {o: MotionVQVAE(DEFAULT_LAYOUT.part(o), VQConfig(16, 8, 16, 4)) for o in PART_NAMES}
    times = module_times(Models(Generator(cfg), vq), duration=1.0, repeats=2)
    assert tuple(times) == MODULE_ROWS
    assert all(m >= 0 and s >= 0 for m, s in times.values())
    parts = sum(m for row, (m, _) in times.items() if row != "total")
    assert parts <= times["total"][0] * 1.05
