import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mtalk.ndiff as nd
from mtalk.motion_vq import (
    DEFAULT_LAYOUT,
    PART_NAMES,
    Codebook,
    DegenerateRotationError,
    MotionVQVAE,
    PartLayout,
    VQConfig,
    VQTrainConfig,
    axis_angle_to_matrix,
    geodesic_angle,
    geodesic_loss,
    matrix_to_rot6d,
    nearest_codes,
    quantize,
    rot6d_to_matrix,
    rot6d_to_matrix_diff,
    straight_through,
    train_vqvae,
    vq_loss,
)
from mtalk.ndiff import Array

TINY = VQConfig(codebook_size=8, code_dim=4, hidden=8)


def quat_to_matrix(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def test_layout_covers_full_frame_once():
    chans = np.concatenate([DEFAULT_LAYOUT.channels(p) for p in PART_NAMES])
    assert DEFAULT_LAYOUT.width == 437
    assert sorted(chans) == list(range(437))
    widths = {p: DEFAULT_LAYOUT.part(p).width for p in PART_NAMES}
    assert widths == {"face": 100, "upper": 78, "hands": 180, "lower": 79}


def test_layout_extract_assemble_round_trip():
    frames = np.random.default_rng(0).normal(size=(5, 437))
    parts = {p: DEFAULT_LAYOUT.extract(frames, p) for p in PART_NAMES}
    np.testing.assert_array_equal(DEFAULT_LAYOUT.assemble(parts), frames)


def test_rot6d_identity_and_scaling():
    np.testing.assert_array_equal(rot6d_to_matrix(np.array([1.0, 0, 0, 0, 1, 0])), np.eye(3))
    r = np.random.default_rng(1).normal(size=6)
    np.testing.assert_allclose(rot6d_to_matrix(5 * r), rot6d_to_matrix(r), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_rot6d_gives_proper_rotation(values):
    r = np.array(values)
    try:
        R = rot6d_to_matrix(r)
    except DegenerateRotationError:
        return
    assert np.abs(R.T @ R - np.eye(3)).max() < 1e-10
    assert abs(np.linalg.det(R) - 1.0) < 1e-10


def test_rot6d_rejects_degenerate():
    with pytest.raises(DegenerateRotationError):
        rot6d_to_matrix(np.array([0.0, 0, 0, 0, 1, 0]))
    with pytest.raises(DegenerateRotationError):
        rot6d_to_matrix(np.array([1.0, 2, 3, 2, 4, 6]))


def test_rot6d_matches_matrix_round_trip_and_diff_path():
    R = axis_angle_to_matrix(np.random.default_rng(2).normal(size=(10, 3)))
    r6 = matrix_to_rot6d(R)
    np.testing.assert_allclose(rot6d_to_matrix(r6), R, atol=1e-12)
    np.testing.assert_allclose(rot6d_to_matrix_diff(Array(r6)).data, R, atol=1e-12)


def test_rot6d_diff_gradient():
    r = Array(np.random.default_rng(3).normal(size=(4, 6)))
    w = np.random.default_rng(4).normal(size=(4, 3, 3))
    assert nd.grad_check(lambda a: (rot6d_to_matrix_diff(a) * w).sum(), [r]) < 1e-6


def test_geodesic_loss_identity_and_half_turn():
    eye = np.eye(3)[None]
    assert geodesic_loss(Array(eye), Array(eye)).item() <= 1e-6
    Rz = axis_angle_to_matrix(np.array([[0.0, 0.0, math.pi]]))
    assert geodesic_loss(Array(Rz), Array(eye)).item() == pytest.approx(math.pi, abs=1e-12)


def test_geodesic_matches_quaternion_angle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        q1, q2 = rng.normal(size=4), rng.normal(size=4)
        q1, q2 = q1 / np.linalg.norm(q1), q2 / np.linalg.norm(q2)
        expected = 2 * math.acos(min(1.0, abs(q1 @ q2)))
        R1, R2 = quat_to_matrix(q1), quat_to_matrix(q2)
        assert geodesic_angle(R1, R2) == pytest.approx(expected, abs=1e-7)
        assert geodesic_loss(Array(R1[None]), Array(R2[None])).item() == pytest.approx(expected, abs=1e-7)


def test_geodesic_loss_range():
    R = axis_angle_to_matrix(np.random.default_rng(6).normal(scale=3.0, size=(50, 2, 3)))
    value = geodesic_loss(Array(R[:, 0]), Array(R[:, 1])).item()
    assert 0.0 <= value <= math.pi


def test_codebook_init_range():
    cb = Codebook(64, 32, np.random.default_rng(0))
    assert cb.entries.data.min() >= -1 / 64 and cb.entries.data.max() < 1 / 64


def test_quantize_exact_entry():
    cb = Codebook(16, 4, np.random.default_rng(1))
    z = cb.entries.data[7][None, None]
    z_q, idx = quantize(Array(z), cb)
    assert idx[0, 0] == 7
    np.testing.assert_array_equal(z_q.data[0, 0], cb.entries.data[7])


def test_quantize_tie_picks_lowest_index():
    entries = np.zeros((12, 2))
    entries[:] = 10.0
    entries[3] = [1.0, 0.0]
    entries[9] = [-1.0, 0.0]
    assert nearest_codes(np.zeros((1, 2)), entries)[0] == 3


def test_quantize_matches_brute_force():
    rng = np.random.default_rng(2)
    cb = Codebook(64, 8, rng)
    z = rng.normal(scale=0.02, size=(3, 20, 8))
    z_q, idx = quantize(Array(z), cb)
    for b in range(3):
        for t in range(20):
            d = [np.sum((z[b, t] - e) ** 2) for e in cb.entries.data]
            assert idx[b, t] == int(np.argmin(d))
            assert np.array_equal(z_q.data[b, t], cb.entries.data[idx[b, t]])


def test_quantize_width_mismatch():
    with pytest.raises(nd.ShapeError):
        quantize(Array(np.zeros((1, 2, 3))), Codebook(4, 5, np.random.default_rng(0)))


def test_straight_through_forward_and_gradient_copy():
    rng = np.random.default_rng(3)
    cb = Codebook(8, 4, rng)
    z_e = Array(rng.normal(scale=0.1, size=(2, 5, 4)), requires_grad=True)
    z_q, _ = quantize(z_e, cb)
    out = straight_through(z_e, z_q)
    np.testing.assert_array_equal(out.data, z_q.data)

    w = rng.normal(size=(4, 3))

    def downstream(v):
        return (nd.tanh(nd.matmul(v, Array(w))) ** 2).sum()

    downstream(out).backward()
    probe = Array(z_q.data.copy(), requires_grad=True)
    downstream(probe).backward()
    np.testing.assert_array_equal(z_e.grad, probe.grad)
    assert cb.entries.grad is None


def test_encoder_receives_gradient_through_quantization():
    part = DEFAULT_LAYOUT.part("upper")
    model = MotionVQVAE(part, TINY, np.random.default_rng(4))
    m = part.rest_pose() + np.random.default_rng(5).normal(scale=0.1, size=(2, 16, part.width))
    out = model(m)
    w = np.random.default_rng(6).normal(size=out["recon"].shape)
    (out["recon"] * w).sum().backward()
    for _, p in model.encoder.named_parameters():
        assert p.grad is not None and np.abs(p.grad).max() > 0


@pytest.mark.parametrize("name", PART_NAMES)
def test_encode_decode_shapes(name):
    part = DEFAULT_LAYOUT.part(name)
    model = MotionVQVAE(part, TINY, np.random.default_rng(0))
    m = np.zeros((2, 32, part.width))
    out = model(m)
    assert out["z_e"].shape == (2, 8, 4)
    assert out["idx"].shape == (2, 8)
    assert out["recon"].shape == m.shape
    assert np.all(np.isfinite(out["recon"].data))


def test_encode_rejects_indivisible_length():
    model = MotionVQVAE(DEFAULT_LAYOUT.part("face"), TINY, np.random.default_rng(0))
    with pytest.raises(ValueError, match="pad 2"):
        model.encode(np.zeros((1, 30, 100)))


def identity_frames(part, length):
    return np.tile(part.rest_pose(), (1, length, 1))


def test_vq_loss_zero_for_perfect_reconstruction():
    part = DEFAULT_LAYOUT.part("lower")
    m = identity_frames(part, 6)
    z = np.random.default_rng(0).normal(size=(1, 2, 4))
    total, terms = vq_loss(m, Array(m.copy()), Array(z), Array(z.copy()), part)
    assert total.item() <= 1e-6
    assert all(v <= 1e-6 for v in terms.values())


def test_vq_loss_static_sequence_has_no_motion_terms():
    part = DEFAULT_LAYOUT.part("upper")
    m = identity_frames(part, 5)
    R = axis_angle_to_matrix(np.random.default_rng(1).normal(size=(part.n_rot_joints, 3)))
    m_hat = np.tile(matrix_to_rot6d(R).reshape(-1), (1, 5, 1))
    _, terms = vq_loss(m, Array(m_hat), np.zeros((1, 1, 2)), np.zeros((1, 1, 2)), part)
    assert terms["vel"] == 0.0 and terms["acc"] == 0.0
    assert terms["rec"] > 0


def test_vq_loss_three_frame_body_example():
    part = PartLayout("lower", n_trans=1)
    m = np.array([0.0, 1.0, 3.0]).reshape(1, 3, 1)
    m_hat = np.array([0.0, 2.0, 2.0]).reshape(1, 3, 1)
    z_e = np.array([0.5, 1.0]).reshape(1, 1, 2)
    z_q = np.array([0.0, 1.5]).reshape(1, 1, 2)
    total, terms = vq_loss(m, Array(m_hat), Array(z_e), Array(z_q), part)
    # rec |0|+|1|+|1| over 3; vel |1-2|,|2-0|; acc |1-(-2)|; code terms (0.25+0.25)/2
    expected = {"rec": 2 / 3, "vel": 1.5, "acc": 3.0, "codebook": 0.25, "commit": 0.25}
    assert terms == pytest.approx(expected, abs=1e-15)
    assert total.item() == pytest.approx(sum(expected.values()), abs=1e-15)


def test_vq_loss_three_frame_face_example():
    part = PartLayout("face", n_face=1)
    m = np.array([0.0, 1.0, 3.0]).reshape(1, 3, 1)
    m_hat = np.array([0.0, 2.0, 2.0]).reshape(1, 3, 1)
    z = np.zeros((1, 1, 2))
    _, terms = vq_loss(m, Array(m_hat), Array(z), Array(z), part)
    assert terms == pytest.approx({"rec": 2 / 3, "vel": 2.5, "acc": 9.0, "codebook": 0.0,
                                   "commit": 0.0}, abs=1e-15)


def test_vq_loss_contact_term_and_ablation():
    part = DEFAULT_LAYOUT.part("lower")
    m = identity_frames(part, 4)
    m_hat = m.copy()
    m_hat[..., part.contact] += 0.5
    _, terms = vq_loss(m, Array(m_hat), np.zeros((1, 1, 2)), np.zeros((1, 1, 2)), part,
                       use_vel_acc=False)
    assert terms["contact"] == pytest.approx(0.25)
    assert "vel" not in terms and "acc" not in terms


def test_vq_loss_rejects_short_sequences():
    part = PartLayout("face", n_face=2)
    with pytest.raises(ValueError):
        vq_loss(np.zeros((1, 2, 2)), Array(np.zeros((1, 2, 2))), np.zeros((1, 1, 1)),
                np.zeros((1, 1, 1)), part)


def test_stop_gradient_routing():
    rng = np.random.default_rng(7)
    part = PartLayout("face", n_face=3)
    cb = Codebook(6, 4, rng)
    z_e = Array(rng.normal(scale=0.3, size=(1, 5, 4)), requires_grad=True)
    z_q, idx = quantize(z_e, cb)
    m = rng.normal(size=(1, 8, 3))
    total, _ = vq_loss(m, Array(m.copy()), z_e, z_q, part)
    total.backward()
    n = z_e.size
    np.testing.assert_allclose(z_e.grad, 2.0 * (z_e.data - z_q.data) / n, atol=1e-15)
    expected = np.zeros_like(cb.entries.data)
    np.add.at(expected, idx.reshape(-1), (2.0 * (z_q.data - z_e.data) / n).reshape(-1, 4))
    np.testing.assert_allclose(cb.entries.grad, expected, atol=1e-15)


def test_vq_loss_gradient_through_model():
    rng = np.random.default_rng(8)
    part = PartLayout("upper", n_rot_joints=1)
    model = MotionVQVAE(part, VQConfig(4, 2, hidden=3), rng)
    R = axis_angle_to_matrix(rng.normal(scale=0.3, size=(1, 8, 3)))
    m = matrix_to_rot6d(R)

    def loss(*_):
        out = model(m)
        return vq_loss(m, out["recon"], out["z_e"], out["z_q"], part)[0]

    # quantization is piecewise constant in the encoder, and the estimator
    # deliberately withholds the reconstruction gradient from the codebook,
    # so the decoder is the part with a finite-difference reference
    assert nd.grad_check(loss, model.decoder.parameters()) < 1e-4


def smooth_clips(part, n, length, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, length)[:, None]
    clips = []
    for _ in range(n):
        aa = 0.3 * np.sin(2 * np.pi * (t * rng.uniform(0.5, 2, size=3 * part.n_rot_joints)
                                       + rng.uniform(size=3 * part.n_rot_joints)))
        R = axis_angle_to_matrix(aa.reshape(length, part.n_rot_joints, 3))
        clips.append(matrix_to_rot6d(R).reshape(length, -1))
    return clips


def test_training_is_deterministic_and_schedules_lr():
    part = PartLayout("upper", n_rot_joints=2)
    clips = smooth_clips(part, 6, 24, 9)
    cfg = VQTrainConfig(epochs=4, batch_size=3, window=16, final_fraction=0.25, model=TINY)
    m1, h1 = train_vqvae(clips, part, cfg)
    m2, h2 = train_vqvae(clips, part, cfg)
    assert h1 == h2
    for a, b in zip(m1.parameters(), m2.parameters()):
        np.testing.assert_array_equal(a.data, b.data)
    assert [h["lr"] for h in h1] == [2.5e-4] * 3 + [2.5e-5]
    assert all(0 < h["utilization"] <= 1 for h in h1)


def test_full_schedule_has_five_final_epochs():
    assert VQTrainConfig(epochs=200).final_epochs == 5
