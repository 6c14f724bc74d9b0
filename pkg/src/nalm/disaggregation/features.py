"""Per-second feature vectors computed from the aggregate signal.

Each vector holds ``w`` raw watt values centred on the second, the ``w - 1``
first differences of that window and the time of day as a point on the unit
circle, ``2w + 1`` values in total.
"""

from __future__ import annotations

import numpy as np

from ..traces import DAY_SECONDS, PowerTrace, Timestamp


def feature_dim(window_w: int) -> int:
    return 2 * window_w + 1


def _check_window(window_w: int) -> int:
    if window_w < 1 or window_w % 2 == 0:
        raise ValueError(f"window_w must be odd and >= 1, got {window_w}")
    return window_w // 2


def extract_features(trace: PowerTrace, t: Timestamp | int, window_w: int) -> np.ndarray:
    """Feature vector of one second; edges repeat the boundary sample."""
    half = _check_window(window_w)
    t = t.seconds if isinstance(t, Timestamp) else int(t)
    samples = trace.samples
    if not 0 <= t < len(samples):
        raise IndexError(f"t={t} outside trace of length {len(samples)}")
    idx = np.clip(np.arange(t - half, t + half + 1), 0, len(samples) - 1)
    window = samples[idx]
    angle = 2 * np.pi * t / DAY_SECONDS
    return np.concatenate([window, np.diff(window), [np.sin(angle), np.cos(angle)]])


def feature_matrix(trace: PowerTrace, window_w: int) -> np.ndarray:
    """All feature vectors of a trace stacked row-wise, shape ``(len(trace), 2w + 1)``."""
    half = _check_window(window_w)
    samples = trace.samples
    n = len(samples)
    padded = np.concatenate([np.full(half, samples[0]), samples, np.full(half, samples[-1])])
    window = np.lib.stride_tricks.sliding_window_view(padded, window_w)
    angle = 2 * np.pi * np.arange(n) / DAY_SECONDS
    return np.hstack([window, np.diff(window, axis=1), np.sin(angle)[:, None], np.cos(angle)[:, None]])
