"""Gesture beats, audio onsets, and beat constancy."""

from __future__ import annotations

import numpy as np

from ..motion_vq.layout import DEFAULT_LAYOUT, BodyLayout

DEFAULT_SIGMA = 0.1


def speed_minima(speed: np.ndarray) -> np.ndarray:
    """Indices of strict local minima lying below the median speed."""
    s = np.asarray(speed, dtype=np.float64)
    if s.size < 3:
        return np.zeros(0, dtype=np.int64)
    mid = s[1:-1]
    is_min = (mid < s[:-2]) & (mid < s[2:]) & (mid < np.median(s))
    return np.nonzero(is_min)[0] + 1


def upper_body_speed(frames: np.ndarray, fps: float, layout: BodyLayout = DEFAULT_LAYOUT):
    """Per-frame mean joint speed over upper-body (non-finger) Rot6D channels.

    Central differences; the first and last frames repeat their neighbours.
    """
    rot = frames[:, layout.channels("upper")]
    rot = rot.reshape(rot.shape[0], -1, 6)
    v = np.zeros_like(rot)
    v[1:-1] = (rot[2:] - rot[:-2]) * (fps / 2.0)
    v[0], v[-1] = v[1], v[-2]
    return np.linalg.norm(v, axis=-1).mean(axis=-1)


def motion_beats(frames: np.ndarray, fps: float, layout: BodyLayout = DEFAULT_LAYOUT) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < 3:
        raise ValueError("motion_beats needs at least 3 frames")
    speed = upper_body_speed(frames, fps, layout)
    return speed_minima(speed) / float(fps)


def onset_envelope(audio: np.ndarray, hop: int) -> np.ndarray:
    n = len(audio) // hop
    frames = np.asarray(audio[: n * hop], dtype=np.float64).reshape(n, hop)
    return np.sqrt((frames ** 2).mean(axis=1))


def audio_beats(audio: np.ndarray, rate: int, hop: int = 160, k: float = 3.0,
                min_gap: float = 0.05) -> np.ndarray:
    """Onset times: peaks of the half-wave rectified envelope difference that
    exceed median + k * MAD.

    The median and MAD are taken over the signed difference; over the
    rectified one they collapse to zero whenever most frames are not rising.
    """
    audio = np.asarray(audio, dtype=np.float64)
    if audio.size == 0:
        raise ValueError("audio is empty")
    env = onset_envelope(audio, hop)
    if env.size < 2:
        return np.zeros(0)
    d = np.diff(env)
    nov = np.concatenate([[0.0], np.maximum(d, 0.0)])
    med = np.median(d)
    thr = max(med + k * np.median(np.abs(d - med)), 0.0)
    padded = np.concatenate([nov, [0.0]])
    cand = [i for i in range(len(nov))
            if nov[i] > thr and nov[i] >= padded[i - 1 if i else 0] and nov[i] > padded[i + 1]]
    gap = max(1, int(round(min_gap * rate / hop)))
    kept: list[int] = []
    for i in sorted(cand, key=lambda j: (-nov[j], j)):
        if all(abs(i - j) >= gap for j in kept):
            kept.append(i)
    return np.array(sorted(kept), dtype=np.float64) * hop / rate


def beat_constancy(gesture_beats, audio_beats_, sigma: float = DEFAULT_SIGMA) -> float:
    """Mean over gesture beats of exp(-d^2 / (2 sigma^2)), d = distance to nearest audio beat."""
    g = np.asarray(gesture_beats, dtype=np.float64)
    a = np.asarray(audio_beats_, dtype=np.float64)
    if g.size == 0 or a.size == 0:
        raise ValueError("beat constancy is undefined for an empty beat set")
    d = np.abs(g[:, None] - a[None, :]).min(axis=1)
    return float(np.exp(-(d ** 2) / (2.0 * sigma ** 2)).mean())
