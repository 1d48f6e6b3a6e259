"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criteria 4, 5, 7 and 8 share one desk-scale corpus and the stage-1/stage-2
models trained on it, so the expensive training happens once per session.
"""

import math
import time

import numpy as np
import pytest

from mtalk import cli
from mtalk import ndiff as nd
from mtalk.attention import AttentionConfig, MultiHeadAttention, mhca, mhsa
from mtalk.bench import module_times, scaling_fits, scaling_table
from mtalk.corpus import Corpus, CorpusSpec, generate_corpus
from mtalk.metrics import (
    GaussianStats,
    beat_constancy,
    diversity,
    fgd,
    frechet_distance,
    lvd,
    vertex_mse,
)
from mtalk.motion_vq import (
    DEFAULT_LAYOUT,
    PART_NAMES,
    Codebook,
    MotionVQVAE,
    PartLayout,
    VQConfig,
    VQTrainConfig,
    axis_angle_to_matrix,
    eval_windows,
    evaluate,
    matrix_to_rot6d,
    parameter_digest,
    quantize,
    save_vqvae,
    straight_through,
    train_vqvae,
    vq_loss,
)
from mtalk.ndiff import Array
from mtalk.ssm import SsmParams, discretize, mamba_block, scan
from mtalk.synthesis import (
    MODULE_ROWS,
    FusionGates,
    GeneratorConfig,
    Models,
    evaluate_generator,
    fuse_features,
    generator_loss,
    save_generator,
    train_stage2,
)

CHANCE = 1.0 / 64


@pytest.fixture
def verdict(request, acceptance_report):
    """Records and prints ``criterion N: PASS|FAIL  detail``."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        acceptance_report[number] = line
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return passed

    return record


# -- shared desk-scale training --------------------------------------------------------

@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk") / "corpus"
    generate_corpus(CorpusSpec(seed=0), root)
    return Corpus(root)


@pytest.fixture(scope="session")
def stage1(desk_corpus):
    """Per part: the model trained with velocity/acceleration terms, its
    ablation without them, histories, held-out stats and wall times."""
    out = {}
    for name in PART_NAMES:
        part = DEFAULT_LAYOUT.part(name)
        train = [DEFAULT_LAYOUT.extract(c.motion, name) for c in desk_corpus.clips("train")]
        held = eval_windows([DEFAULT_LAYOUT.extract(c.motion, name)
                             for c in desk_corpus.clips("test")], 64)
        runs = {}
        for use_terms in (True, False):
            cfg = VQTrainConfig(epochs=200, use_vel_acc=use_terms,
                                model=VQConfig(codebook_size=64, code_dim=32))
            t0 = time.perf_counter()
            model, history = train_vqvae(train, part, cfg)
            seconds = time.perf_counter() - t0
            runs[use_terms] = {"model": model, "history": history, "seconds": seconds,
                               "held": evaluate(model, held, use_terms)}
        out[name] = runs
    return out


@pytest.fixture(scope="session")
def stage2(desk_corpus, stage1):
    vq = {o: stage1[o][True]["model"] for o in PART_NAMES}
    before = {o: parameter_digest(m) for o, m in vq.items()}
    t0 = time.perf_counter()
    gen, history = train_stage2(desk_corpus.clips("train"), vq, GeneratorConfig())
    seconds = time.perf_counter() - t0
    after = {o: parameter_digest(m) for o, m in vq.items()}
    held = evaluate_generator(gen, desk_corpus.clips("test"), vq, desk_corpus.layout)
    return {"generator": gen, "vq": vq, "history": history, "seconds": seconds,
            "frozen": before == after, "held": held}


# -- criterion 1 ---------------------------------------------------------------------

def unrolled_scan(a_bar, b_bar, c, x):
    """y_t = sum_{s<=t} C_t . (prod_{r=s+1..t} A_r) B_s x_s, accumulated in O(M^2)."""
    bsz, length, inner, state = a_bar.shape
    y = np.zeros((bsz, length, inner))
    for t in range(length):
        carry = np.ones((bsz, inner, state))
        for s in range(t, -1, -1):
            contrib = carry * b_bar[:, s] * x[:, s, :, None]
            y[:, t] += np.einsum("ben,bn->be", contrib, c[:, t])
            carry = carry * a_bar[:, s]
    return y


def test_criterion_1_scan_oracle(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        b, m, e, n = (int(rng.integers(1, k + 1)) for k in (2, 32, 8, 4))
        a_bar = rng.uniform(0.3, 1.0, size=(b, m, e, n))
        b_bar = rng.normal(size=(b, m, e, n))
        c = rng.normal(size=(b, m, n))
        x = rng.normal(size=(b, m, e))
        got = scan(Array(a_bar), Array(b_bar), Array(c), Array(x)).data
        worst = max(worst, float(np.abs(got - unrolled_scan(a_bar, b_bar, c, x)).max()))
    seconds = time.perf_counter() - t0
    ok = worst < 1e-10 and seconds < 10.0
    verdict(1, ok, f"100 cases, max abs error {worst:.2e} (< 1e-10), {seconds:.1f} s (< 10 s)")
    assert ok


# -- criterion 2 ---------------------------------------------------------------------

def _primitive_cases(rng):
    r = lambda *s: Array(rng.normal(size=s))  # noqa: E731
    w = rng.normal(size=(3, 4))
    unary = {
        "exp": nd.exp, "log": lambda a: nd.log(a * a + 0.5), "sqrt": lambda a: nd.sqrt(a * a + 0.5),
        "abs": lambda a: nd.abs_(a + 3.0), "sigmoid": nd.sigmoid, "tanh": nd.tanh,
        "silu": nd.silu, "softplus": nd.softplus, "relu": lambda a: nd.relu(a + 3.0),
        "leaky_relu": lambda a: nd.leaky_relu(a - 3.0), "clip": lambda a: nd.clip(a * 0.1, -1, 1),
        "safe_arccos": lambda a: nd.safe_arccos(nd.tanh(a) * 0.9), "exprel": nd.exprel,
        "power": lambda a: (a * a + 1.0) ** 1.5, "neg": nd.neg,
        "softmax": lambda a: nd.softmax(a, axis=-1), "log_softmax": lambda a: nd.log_softmax(a),
        "layer_norm": lambda a: nd.layer_norm(a), "mean": lambda a: nd.mean(a, axis=0),
        "sum": lambda a: nd.sum_(a, axis=1), "reshape": lambda a: a.reshape(4, 3),
        "transpose": nd.transpose, "getitem": lambda a: a[1:, ::2],
        "repeat": lambda a: nd.repeat(a, 2, axis=1),
    }
    cases = {k: (lambda f: lambda a: (f(a) ** 2).sum())(f) for k, f in unary.items()}
    cases = {k: (f, [r(3, 4)]) for k, f in cases.items()}
    binary = {
        "add": lambda a, b: ((a + b) ** 2).sum(), "sub": lambda a, b: ((a - b) * a).sum(),
        "mul": lambda a, b: (a * b).sum(), "div": lambda a, b: (a / (b * b + 1.0)).sum(),
        "matmul": lambda a, b: (nd.matmul(a, nd.transpose(b)) ** 2).sum(),
        "linear": lambda a, b: (nd.linear(a, nd.transpose(b), b[0, :3]) ** 2).sum(),
        "concat": lambda a, b: (nd.concat([a, b], axis=0) ** 2 * 1.5).sum(),
        "stack": lambda a, b: (nd.stack([a, b], axis=1) ** 2).sum(),
        "split": lambda a, b: (nd.split(a * b, [1, 3], axis=1)[1] ** 2).sum(),
        "mse": nd.mse, "l1": lambda a, b: nd.l1(a, b + 5.0),
    }
    cases.update({k: (f, [r(3, 4), r(3, 4)]) for k, f in binary.items()})
    target = rng.integers(0, 4, size=3)
    cases["nll"] = (lambda a: nd.nll(nd.log_softmax(a), target), [r(3, 4)])
    cases["conv1d"] = (lambda a, k, bb: (nd.conv1d(a, k, bb, 2, 1, 1) ** 2).sum(),
                       [r(2, 7, 4), r(4, 4, 3), r(4)])
    cases["conv1d_grouped"] = (lambda a, k: (nd.conv1d(a, k, None, 1, (2, 0), 4) ** 2).sum(),
                               [r(2, 7, 4), r(4, 1, 3)])
    cases["weighted"] = (lambda a: (nd.tanh(a) * Array(w)).sum(), [r(3, 4)])
    return cases


def _block_cases(rng):
    cases = {}
    p = SsmParams(4, 6, 3, rng)
    tok = Array(rng.normal(size=(1, 5, 4)))
    wy = rng.normal(size=(1, 5, 4))
    cases["mamba_block"] = (lambda t, *_: (mamba_block(t, p) * wy).sum(), [tok] + p.parameters())
    block = MultiHeadAttention(AttentionConfig(model_dim=4, heads=2), rng)
    x, kv = Array(rng.normal(size=(1, 3, 4))), Array(rng.normal(size=(1, 4, 4)))
    wa = rng.normal(size=(1, 3, 4))
    cases["mhsa"] = (lambda a, *_: (mhsa(a, block) * wa).sum(), [x] + block.parameters())
    cases["mhca"] = (lambda a, b, *_: (mhca(a, b, block) * wa).sum(),
                     [x, kv] + block.parameters())
    gates = FusionGates(3, rng)
    f_A, f_T = Array(rng.normal(size=(2, 4, 3))), Array(rng.normal(size=(2, 4, 3)))
    s_id = Array(rng.normal(size=(2, 3)))
    wf = rng.normal(size=(2, 4, 3))

    def fused(a, t, s, *_):
        fa, ft = fuse_features(a, t, s, gates)
        return (fa * wf + ft * ft).sum()

    cases["fuse_features"] = (fused, [f_A, f_T, s_id] + gates.parameters())
    cfg = GeneratorConfig(codebook_size=5, code_dim=3)
    lat = {o: rng.normal(size=(2, 3, 3)) for o in PART_NAMES}
    idx = {o: rng.integers(0, 5, size=(2, 3)) for o in PART_NAMES}
    pred = {o: Array(rng.normal(size=(2, 3, 3))) for o in PART_NAMES}
    logits = {o: Array(rng.normal(size=(2, 3, 5))) for o in PART_NAMES}
    cases["generator_loss"] = (lambda *_: generator_loss(pred, logits, lat, idx, cfg)[0],
                               list(pred.values()) + list(logits.values()))
    part = PartLayout("upper", n_rot_joints=1)
    model = MotionVQVAE(part, VQConfig(4, 2, hidden=3), rng)
    m = matrix_to_rot6d(axis_angle_to_matrix(rng.normal(scale=0.3, size=(1, 8, 3))))

    def vq(*_):
        out = model(m)
        return vq_loss(m, out["recon"], out["z_e"], out["z_q"], part)[0]

    # encoder parameters sit behind the argmin, whose finite differences are
    # zero almost everywhere; the estimator contract is asserted exactly below
    cases["vq_loss"] = (vq, model.decoder.parameters())
    return cases


def _ste_contract_holds(rng) -> bool:
    cb = Codebook(8, 4, rng)
    z_e = Array(rng.normal(scale=0.1, size=(2, 5, 4)), requires_grad=True)
    z_q, _ = quantize(z_e, cb)
    w = Array(rng.normal(size=(4, 3)))
    (nd.tanh(nd.matmul(straight_through(z_e, z_q), w)) ** 2).sum().backward()
    probe = Array(z_q.data.copy(), requires_grad=True)
    (nd.tanh(nd.matmul(probe, w)) ** 2).sum().backward()
    return bool(np.array_equal(z_e.grad, probe.grad))


def test_criterion_2_gradient_suite(verdict):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    cases = {**_primitive_cases(rng), **_block_cases(rng)}
    errors = {name: nd.grad_check(f, inputs) for name, (f, inputs) in cases.items()}
    ste = _ste_contract_holds(rng)
    seconds = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    ok = errors[worst] < 1e-4 and ste and seconds < 120.0
    verdict(2, ok, f"{len(errors)} grad checks, worst {worst} {errors[worst]:.2e} (< 1e-4); "
                   f"STE grad equality exact: {ste}; {seconds:.1f} s (< 120 s)")
    assert ok, {k: v for k, v in errors.items() if v >= 1e-4}


# -- criterion 3 ---------------------------------------------------------------------

def test_criterion_3_discretization_order(verdict):
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(20):
        delta = rng.uniform(0.01, 0.1, size=(2, 5))
        A = -rng.uniform(0.5, 4.0, size=(5, 3))
        Bm = rng.normal(size=(2, 3))

        def gap(d):
            _, exact = discretize(Array(d), Array(A), Array(Bm), "zoh")
            _, euler = discretize(Array(d), Array(A), Array(Bm), "euler")
            return np.abs(exact.data - euler.data).max()

        ratios.append(gap(delta) / gap(delta / 2.0))
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    verdict(3, ok, f"gap ratio on halving the step: min {min(ratios):.3f}, max {max(ratios):.3f} "
                   "(within [3.5, 4.5])")
    assert ok


# -- criterion 4 ---------------------------------------------------------------------

def test_criterion_4_stage1_training(verdict, stage1):
    lines, ok = [], True
    for name, runs in stage1.items():
        hist = runs[True]["history"]
        ratio = hist[-1]["rec"] / hist[0]["rec"]
        util = hist[-1]["utilization"]
        acc_with = runs[True]["held"]["mean_abs_acc"]
        acc_without = runs[False]["held"]["mean_abs_acc"]
        seconds = runs[True]["seconds"]
        part_ok = ratio <= 0.2 and util >= 0.3 and acc_with <= acc_without and seconds < 600
        ok &= part_ok
        lines.append(f"{name}: rec ratio {ratio:.3f}, util {util:.0%}, |acc| {acc_with:.4f} vs "
                     f"{acc_without:.4f} ablation, {seconds:.0f} s")
    verdict(4, ok, "; ".join(lines))
    assert ok


# -- criterion 5 ---------------------------------------------------------------------

def test_criterion_5_stage2_training(verdict, stage2):
    held = stage2["held"]
    accs = {o: held[o]["accuracy"] for o in ("hands", "upper", "lower")}
    mse_ok = {o: held[o]["latent_mse"] < held[o]["target_variance"] for o in held}
    ok = (all(a > 5 * CHANCE for a in accs.values()) and all(mse_ok.values())
          and stage2["frozen"] and stage2["seconds"] < 900)
    acc_txt = ", ".join(f"{o} {a:.1%}" for o, a in accs.items())
    mse_txt = ", ".join(f"{o} {held[o]['latent_mse']:.4f}<{held[o]['target_variance']:.4f}"
                        for o in held)
    verdict(5, ok, f"held-out accuracy {acc_txt} (> {5 * CHANCE:.1%}); latent MSE vs target "
                   f"variance {mse_txt}; stage-1 frozen: {stage2['frozen']}; "
                   f"{stage2['seconds']:.0f} s (< 900 s)")
    assert ok


# -- criterion 6 ---------------------------------------------------------------------

def test_criterion_6_metric_correctness(verdict):
    rng = np.random.default_rng(6)
    x = rng.normal(size=(200, 5)) @ rng.normal(size=(5, 5))
    checks = {"fgd_self": fgd(x, x) <= 1e-6}
    a = rng.normal(0.0, 1.0, 4000)
    b = rng.normal(3.0, 2.0, 4000)
    closed = (a.mean() - b.mean()) ** 2 + (a.std(ddof=1) - b.std(ddof=1)) ** 2
    checks["fgd_1d_samples"] = abs(fgd(a, b) - closed) < 1e-6
    exact = frechet_distance(GaussianStats(np.array([0.0]), np.array([[1.0]])),
                             GaussianStats(np.array([3.0]), np.array([[4.0]])))
    checks["fgd_1d_closed_form"] = abs(exact - 10.0) < 1e-6
    clip = rng.normal(size=(6, 4))
    checks["diversity_identical"] = diversity(np.stack([clip] * 3)) == 0.0
    checks["diversity_hand"] = abs(diversity(np.array([[[0.0]], [[4.0]]])) - 2.0) < 1e-12
    beats = np.array([0.5, 1.0, 2.0])
    checks["bc_coincident"] = beat_constancy(beats, beats, 0.1) == 1.0
    checks["bc_offset_sigma"] = abs(beat_constancy(np.array([1.1]), np.array([1.0]), 0.1)
                                    - math.exp(-0.5)) <= 1e-9
    f = np.array([[0.0, 1.0], [2.0, 3.0]])
    f_hat = np.array([[1.0, 1.0], [2.0, 5.0]])
    checks["vertex_mse"] = abs(vertex_mse(f, f_hat) - 1.25) < 1e-12
    checks["lvd"] = abs(lvd(f, f_hat) - 1.5) < 1e-12
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    verdict(6, ok, f"{len(checks)} metric identities hold" if ok else f"failed: {failed}")
    assert ok


# -- criterion 7 ---------------------------------------------------------------------

def test_criterion_7_latency_and_linearity(verdict, stage2):
    models = Models(stage2["generator"], stage2["vq"])
    lengths = [256, 512, 1024, 2048, 4096, 8192]
    fits = None
    for _ in range(3):  # re-measure if a noisy machine spoils the fit
        table = scaling_table(stage2["generator"].global_scan.speech_ssm["body"], lengths,
                              repeats=3, seed=0)
        fits = scaling_fits(table)
        if fits["scan"]["linear_r2"] >= 0.98:
            break
    times = module_times(models, duration=8.0, repeats=5)
    total = times["total"][0]
    rows_ok = tuple(times) == MODULE_ROWS and all(len(v) == 2 for v in times.values())
    attn = fits["attention"]
    ok = (fits["scan"]["linear_r2"] >= 0.98 and attn["quadratic_r2"] > attn["linear_r2"]
          and rows_ok and total < 1.0)
    verdict(7, ok, f"scan linear R^2 {fits['scan']['linear_r2']:.4f} (>= 0.98); attention R^2 "
                   f"quadratic {attn['quadratic_r2']:.4f} vs linear {attn['linear_r2']:.4f}; "
                   f"{len(times)} module rows; total {total:.4f} +/- {times['total'][1]:.4f} s "
                   "per generated second (< 1.0)")
    assert ok


# -- criterion 8 ---------------------------------------------------------------------

SMALL_SPEC = "speakers=2\nclips_per_speaker=8\nduration=4\n"
SMALL_VQ = "epochs=10\ncodebook_size=64\ncode_dim=32\n"
SMALL_GEN = "epochs=3\n"


def _pipeline(root, seed):
    root.mkdir(parents=True)
    (root / "spec.cfg").write_text(SMALL_SPEC)
    (root / "vq.cfg").write_text(SMALL_VQ)
    (root / "gen.cfg").write_text(SMALL_GEN)
    steps = [["gen-corpus", "--spec", root / "spec.cfg", "--out", root / "corpus", "--seed", seed]]
    steps += [["train-vqvae", "--corpus", root / "corpus", "--part", p, "--config", root / "vq.cfg",
               "--out", root / "vq", "--seed", seed] for p in PART_NAMES]
    steps += [["train-gen", "--corpus", root / "corpus", "--vq-dir", root / "vq",
               "--config", root / "gen.cfg", "--out", root / "models", "--seed", seed],
              ["generate", "--models", root / "models", "--corpus", root / "corpus",
               "--split", "train", "--out", root / "generated"],
              ["evaluate", "--corpus", root / "corpus", "--generated", root / "generated",
               "--split", "train", "--report", root / "report", "--seed", seed]]
    for step in steps:
        assert cli.main([str(s) for s in step]) == 0, step


def _outputs(root):
    skip = {"generate_timings.json"}
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name not in skip}


def test_criterion_8_end_to_end_determinism(verdict, tmp_path, desk_corpus, stage1, stage2):
    t0 = time.perf_counter()
    _pipeline(tmp_path / "a", 11)
    _pipeline(tmp_path / "b", 11)
    small_seconds = time.perf_counter() - t0
    a, b = _outputs(tmp_path / "a"), _outputs(tmp_path / "b")
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))

    # desk-scale wall time: both training stages as measured above, plus a
    # CLI generate + evaluate pass over the desk test split
    models = tmp_path / "desk_models"
    models.mkdir()
    for o, m in stage2["vq"].items():
        save_vqvae(models / f"{o}.mtvq", m)
    save_generator(models / cli.GENERATOR_FILE, stage2["generator"])
    t1 = time.perf_counter()
    assert cli.main(["generate", "--models", str(models), "--corpus", str(desk_corpus.root),
                     "--split", "test", "--out", str(tmp_path / "desk_gen")]) == 0
    assert cli.main(["evaluate", "--corpus", str(desk_corpus.root), "--generated",
                     str(tmp_path / "desk_gen"), "--report", str(tmp_path / "desk_report")]) == 0
    gen_eval = time.perf_counter() - t1
    desk_total = (sum(stage1[o][True]["seconds"] for o in PART_NAMES) + stage2["seconds"]
                  + gen_eval)
    ok = not differing and len(a) > 20 and desk_total < 45 * 60 and gen_eval < 15 * 60
    verdict(8, ok, f"two seeded CLI runs at reduced scale: {len(a)} files, "
                   f"{len(differing)} differ ({small_seconds:.0f} s); desk pipeline "
                   f"{desk_total / 60:.1f} min (< 45), generate+evaluate {gen_eval:.0f} s (< 900)")
    assert ok, differing
