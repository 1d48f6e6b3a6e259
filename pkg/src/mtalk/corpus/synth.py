"""Seeded synthetic paired corpus: audio with onset clicks, Markov token
streams, and full-body motion whose velocity dips land on the clicks.

Each token carries a target gesture pose, a face expression, a loudness and a
duration factor. At every click the pose eases (smoothstep) from the previous
token's target to the new one, so joint speed reaches zero exactly at the
beat.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, signal

from ..motion_vq.layout import DEFAULT_LAYOUT, BodyLayout
from ..motion_vq.rotation import axis_angle_to_matrix, matrix_to_rot6d
from . import formats

SPLITS = ("train", "val", "test")
SPLIT_FRACTIONS = (0.85, 0.075, 0.075)
MANIFEST = "corpus.json"


CLICK_LEN = 320
LIFT_ANGLE = 0.4


@dataclass
class CorpusSpec:
    seed: int = 0
    speakers: int = 2
    clips_per_speaker: int = 100
    duration: float = 8.0
    fps: int = 30
    audio_rate: int = 16000
    vocab_size: int = 24

    def __post_init__(self):
        frames = self.duration * self.fps
        if abs(frames - round(frames)) > 1e-9:
            raise ValueError(f"duration * fps must be integral, got {frames}")
        samples = self.duration * self.audio_rate
        if abs(samples - round(samples)) > 1e-6:
            raise ValueError(f"duration * audio_rate must be integral, got {samples}")
        if self.speakers < 1 or self.clips_per_speaker < 1:
            raise ValueError("need at least one speaker and one clip")
        if self.vocab_size < 2:
            raise ValueError("vocabulary needs at least two tokens")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.audio_rate))

    @property
    def n_clips(self) -> int:
        return self.speakers * self.clips_per_speaker


def split_counts(n: int) -> tuple[int, int, int]:
    n_val = int(math.floor(n * SPLIT_FRACTIONS[1] + 0.5))
    n_test = int(math.floor(n * SPLIT_FRACTIONS[2] + 0.5))
    return n - n_val - n_test, n_val, n_test


def assign_splits(n: int, seed: int) -> list[str]:
    """Split label per clip id; a pure function of (n, seed)."""
    n_train, n_val, _ = split_counts(n)
    order = np.random.default_rng([seed, 7]).permutation(n)
    labels = [""] * n
    for rank, clip in enumerate(order):
        labels[clip] = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
    return labels


@dataclass
class World:
    """Vocabulary- and speaker-level tables shared by all clips."""

    token_pose: np.ndarray      # (V, J, 3) axis-angle targets
    token_face: np.ndarray      # (V, F)
    token_loud: np.ndarray      # (V,)
    token_dur: np.ndarray       # (V,)
    speaker_interval: np.ndarray  # (S,) base seconds between beats
    speaker_style: np.ndarray   # (S, J, 3)
    speaker_jaw: np.ndarray     # (S, F)
    transitions: np.ndarray     # (S, V, V) row-stochastic, zero diagonal
    weight_shift: np.ndarray    # (L*3, 3) lower-body axis-angle -> root offset


def build_world(spec: CorpusSpec, layout: BodyLayout = DEFAULT_LAYOUT) -> World:
    rng = np.random.default_rng([spec.seed, 1])
    v, s = spec.vocab_size, spec.speakers
    scale = np.concatenate([np.full(layout.upper_joints, 0.35), np.full(layout.hand_joints, 0.5),
                            np.full(layout.lower_joints, 0.15)])
    logits = rng.normal(scale=2.0, size=(s, v, v))
    logits[:, np.arange(v), np.arange(v)] = -np.inf
    trans = np.exp(logits - logits.max(axis=-1, keepdims=True))
    trans /= trans.sum(axis=-1, keepdims=True)
    return World(
        token_pose=rng.normal(size=(v, layout.n_joints, 3)) * scale[None, :, None],
        token_face=rng.normal(scale=0.4, size=(v, layout.n_face)),
        token_loud=rng.uniform(0.3, 1.0, size=v),
        token_dur=rng.uniform(0.75, 1.35, size=v),
        speaker_interval=rng.uniform(0.45, 0.7, size=s),
        speaker_style=rng.normal(scale=0.08, size=(s, layout.n_joints, 3)),
        speaker_jaw=rng.normal(scale=0.6, size=(s, layout.n_face)),
        transitions=trans,
        weight_shift=rng.normal(scale=0.05, size=(layout.lower_joints * 3, 3)) * [1.0, 0.0, 1.0],
    )


@dataclass
class ClipData:
    clip_id: int
    speaker: int
    motion: np.ndarray    # (T, D)
    audio: np.ndarray     # (n_samples,)
    tokens: np.ndarray    # (T,) one id per motion frame
    beat_times: np.ndarray


def _events(spec: CorpusSpec, world: World, speaker: int, rng: np.random.Generator):
    v = spec.vocab_size
    prev = int(rng.integers(v))
    first = prev
    t = float(rng.uniform(0.15, 0.35))
    times, toks = [], []
    while t < spec.duration:
        tok = int(rng.choice(v, p=world.transitions[speaker, prev]))
        times.append(t)
        toks.append(tok)
        gap = world.speaker_interval[speaker] * world.token_dur[tok] * (1.0 + 0.08 * rng.normal())
        t += max(gap, 0.3)
        prev = tok
    times.append(t)
    return first, np.array(times), np.array(toks, dtype=np.int64)


def _segments(tau: np.ndarray, times: np.ndarray):
    """Segment index (-1 before the first beat) and eased progress per instant."""
    k = np.searchsorted(times, tau, side="right") - 1
    k = np.minimum(k, len(times) - 2)
    start = np.where(k >= 0, times[np.maximum(k, 0)], 0.0)
    end = np.where(k >= 0, times[np.maximum(k, 0) + 1], times[0])
    u = np.clip((tau - start) / (end - start), 0.0, 1.0)
    return k, np.where(k >= 0, u * u * (3.0 - 2.0 * u), 0.0), start


def _ease(table: np.ndarray, first: int, toks: np.ndarray, k: np.ndarray, s: np.ndarray):
    seq = np.concatenate([[first], toks])
    prev = table[seq[k]]        # k = -1 maps to seq[-1]; fixed below
    prev[k < 0] = table[first]
    cur = table[seq[k + 1]]
    shape = (-1,) + (1,) * (table.ndim - 1)
    return prev + (cur - prev) * s.reshape(shape)


def _amplitude(tau: np.ndarray, world: World, toks: np.ndarray, k: np.ndarray, start: np.ndarray):
    loud = np.where(k >= 0, world.token_loud[toks[np.maximum(k, 0)]], 0.15)
    burst = np.where(k >= 0, np.exp(-(tau - start) / 0.12), 0.0)
    return loud * (0.35 + 0.65 * burst)


def _contacts(world: World, first: int, toks: np.ndarray, k: np.ndarray, tau: np.ndarray,
              times: np.ndarray, layout: BodyLayout) -> np.ndarray:
    """Feet stay planted except during large leg transitions.

    A leg whose mean joint change across a segment exceeds LIFT_ANGLE lifts
    its heel over the middle 60% of the segment and its toe over the middle
    40%. Channels are (left heel, left toe, right heel, right toe).
    """
    contact = np.ones((tau.size, layout.n_contact))
    seq = np.concatenate([[first], toks])
    lower = np.asarray(layout.joint_range("lower"))
    legs = np.array_split(lower, 2)
    for seg in range(len(toks)):
        rows = np.flatnonzero(k == seg)
        if rows.size == 0:
            continue
        u = (tau[rows] - times[seg]) / (times[seg + 1] - times[seg])
        change = world.token_pose[seq[seg + 1]] - world.token_pose[seq[seg]]
        for side, joints in enumerate(legs):
            if np.linalg.norm(change[joints], axis=-1).mean() <= LIFT_ANGLE:
                continue
            for part, half in enumerate((0.3, 0.2)):
                ch = 2 * side + part
                if ch < layout.n_contact:
                    contact[rows[np.abs(u - 0.5) < half], ch] = 0.0
    return contact


def synthesize_clip(spec: CorpusSpec, world: World, clip_id: int,
                    layout: BodyLayout = DEFAULT_LAYOUT) -> ClipData:
    speaker = clip_id // spec.clips_per_speaker
    rng = np.random.default_rng([spec.seed, 2, clip_id])
    first, times, toks = _events(spec, world, speaker, rng)
    n_t = spec.n_frames
    tau = np.arange(n_t) / spec.fps

    k, s, start = _segments(tau, times)
    tokens = np.where(k >= 0, toks[np.maximum(k, 0)], first)

    aa = _ease(world.token_pose, first, toks, k, s) + world.speaker_style[speaker]
    freq = rng.uniform(0.1, 0.3, size=aa.shape[1:])
    phase = rng.uniform(0, 2 * np.pi, size=aa.shape[1:])
    aa = aa + 0.01 * np.sin(2 * np.pi * freq * tau[:, None, None] + phase)
    aa = aa + 0.003 * ndimage.gaussian_filter1d(rng.normal(size=aa.shape), 3.0, axis=0)
    rot = matrix_to_rot6d(axis_angle_to_matrix(aa)).reshape(n_t, -1)

    amp_frames = _amplitude(tau, world, toks, k, start)
    face = (_ease(world.token_face, first, toks, k, s)
            + amp_frames[:, None] * world.speaker_jaw[speaker]
            + 0.01 * rng.normal(size=(n_t, layout.n_face)))

    contact = _contacts(world, first, toks, k, tau, times, layout)

    # the pelvis follows the legs (weight shifts) plus a slow in-plane drift
    tphase = rng.uniform(0, 2 * np.pi, size=2)
    drift = np.stack([0.005 * np.sin(2 * np.pi * 0.1 * tau + tphase[0]),
                      np.zeros(n_t),
                      0.005 * np.sin(2 * np.pi * 0.07 * tau + tphase[1])], axis=-1)
    lower = aa[:, layout.joint_range("lower")].reshape(n_t, -1)
    trans = (lower @ world.weight_shift + drift)[:, : layout.n_trans]

    motion = np.concatenate([rot, face, contact, trans], axis=-1)

    n_s = spec.n_samples
    ts = np.arange(n_s) / spec.audio_rate
    ks, _, s_start = _segments(ts, times)
    sos = signal.butter(4, [200.0, min(3000.0, 0.45 * spec.audio_rate)], "bandpass",
                        fs=spec.audio_rate, output="sos")
    carrier = signal.sosfilt(sos, rng.normal(size=n_s))
    carrier /= np.sqrt(np.mean(carrier ** 2)) + 1e-12
    audio = 0.15 * _amplitude(ts, world, toks, ks, s_start) * carrier
    click = 0.9 * np.exp(-np.arange(CLICK_LEN) / 48.0) * np.sign(rng.normal(size=CLICK_LEN))
    beat_times = times[:-1]
    for bt in beat_times:
        i = int(round(bt * spec.audio_rate))
        n = min(CLICK_LEN, n_s - i)
        audio[i:i + n] += click[:n]
    audio = np.clip(audio, -1.0, 1.0)
    return ClipData(clip_id, speaker, motion, audio, tokens, beat_times)


def clip_stem(clip_id: int) -> str:
    return f"clip_{clip_id}"


def generate_corpus(spec: CorpusSpec, out_dir, layout: BodyLayout = DEFAULT_LAYOUT) -> Path:
    """Write every clip plus a JSON manifest under ``out_dir``; deterministic per spec."""
    out = Path(out_dir)
    for split in SPLITS:
        (out / split).mkdir(parents=True, exist_ok=True)
    world = build_world(spec, layout)
    labels = assign_splits(spec.n_clips, spec.seed)
    entries = []
    for clip_id in range(spec.n_clips):
        clip = synthesize_clip(spec, world, clip_id, layout)
        base = out / labels[clip_id] / clip_stem(clip_id)
        formats.write_motion(base.with_suffix(".mtmo"), clip.motion, spec.fps)
        formats.write_audio(base.with_suffix(".mtau"), clip.audio, spec.audio_rate)
        formats.write_tokens(base.with_suffix(".txt"), clip.tokens)
        entries.append({"id": clip_id, "speaker": clip.speaker, "split": labels[clip_id],
                        "beats": [round(float(b), 6) for b in clip.beat_times]})
    manifest = {"spec": asdict(spec), "layout": asdict(layout), "clips": entries}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                encoding="utf-8")
    return out
