"""Windowed statistical features for multichannel EEG at the shared frame rate.

Five features per channel, in this order per channel block:
rms, zero-crossing rate, moving-window average, kurtosis, power spectral
entropy. A 31-channel recording therefore yields 155-dim frames.

All feature functions reduce the last axis, so they accept a single window
(1-D) or any batch of windows (..., window).
"""

from __future__ import annotations

import numpy as np

from .frames import FrameSequence
from .signals import TimeSeries, frame_signal

FEATURE_ORDER = ("rms", "zcr", "mwa", "kurtosis", "pse")
FEATURES_PER_CHANNEL = len(FEATURE_ORDER)


def rms(window: np.ndarray) -> np.ndarray:
    """Root mean square: sqrt(mean of squares)."""
    w = np.asarray(window, dtype=np.float64)
    if w.shape[-1] < 1:
        raise ValueError("empty window")
    return np.sqrt(np.mean(np.square(w), axis=-1))


def _filled_signs(w: np.ndarray) -> np.ndarray:
    # Zero samples inherit the previous nonzero sign; leading zeros inherit
    # the first nonzero sign, so touching zero never double-counts a crossing.
    s = np.sign(w)
    n = s.shape[-1]
    idx = np.broadcast_to(np.arange(n), s.shape)
    last_nz = np.maximum.accumulate(np.where(s != 0, idx, -1), axis=-1)
    filled = np.take_along_axis(s, np.maximum(last_nz, 0), axis=-1)
    first_nz = np.expand_dims(np.argmax(s != 0, axis=-1), -1)
    first_sign = np.take_along_axis(s, first_nz, axis=-1)
    return np.where(last_nz < 0, first_sign, filled)


def zero_crossing_rate(window: np.ndarray) -> np.ndarray:
    """Fraction of consecutive-sample sign changes, in [0, 1]."""
    w = np.asarray(window, dtype=np.float64)
    n = w.shape[-1]
    if n < 2:
        raise ValueError("empty window: zero-crossing rate needs >= 2 samples")
    s = _filled_signs(w)
    changes = np.count_nonzero(s[..., 1:] != s[..., :-1], axis=-1)
    return changes / (n - 1)


def moving_window_average(window: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the window; the sliding framing supplies the motion."""
    w = np.asarray(window, dtype=np.float64)
    if w.shape[-1] < 1:
        raise ValueError("empty window")
    return np.mean(w, axis=-1)


def kurtosis(window: np.ndarray) -> np.ndarray:
    """Fourth standardized moment m4 / m2^2 with biased moments (Gaussian -> 3).

    Constant windows have zero variance; their kurtosis is defined as 0 so
    silence padding never aborts a feature pass.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.shape[-1] < 4:
        raise ValueError(f"kurtosis needs >= 4 samples, got {w.shape[-1]}")
    d = w - np.mean(w, axis=-1, keepdims=True)
    m2 = np.mean(d * d, axis=-1)
    m4 = np.mean(d**4, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(m2 > 0.0, m4 / np.where(m2 > 0.0, m2 * m2, 1.0), 0.0)
    return k


def power_spectral_entropy(window: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) of the normalized periodogram.

    Rectangular window, positive-frequency bins only (DC excluded, Nyquist
    included for even lengths). An all-zero window returns 0.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.shape[-1] < 2:
        raise ValueError("empty window: spectral entropy needs >= 2 samples")
    spec = np.abs(np.fft.rfft(w, axis=-1)) ** 2
    pos = spec[..., 1:]
    total_pos = np.sum(pos, axis=-1, keepdims=True)
    # A window whose non-DC power is only FFT roundoff (constant input) is
    # degenerate and maps to 0, like the all-zero window.
    significant = total_pos > 1e-20 * np.sum(spec, axis=-1, keepdims=True)
    p = pos / np.where(significant, total_pos, 1.0)
    h = -np.sum(np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0), axis=-1)
    return np.where(significant[..., 0], h, 0.0)


def extract_eeg_features(
    x: TimeSeries, frame_rate_hz: float = 100.0, window_s: float = 0.1
) -> FrameSequence:
    """Per-channel statistical features over sliding windows.

    Output frames have dim = 5 * channels, laid out as contiguous
    per-channel blocks in FEATURE_ORDER; frame k is timestamped at the
    window start k / frame_rate_hz. Expects already-filtered input.
    """
    windows = frame_signal(x, frame_rate_hz, window_s)  # (C, F, W)
    feats = np.stack(
        [
            rms(windows),
            zero_crossing_rate(windows),
            moving_window_average(windows),
            kurtosis(windows),
            power_spectral_entropy(windows),
        ],
        axis=1,
    )  # (C, 5, F)
    n_ch = x.n_channels
    data = feats.reshape(n_ch * FEATURES_PER_CHANNEL, -1).T
    return FrameSequence(
        np.ascontiguousarray(data),
        frame_rate_hz,
        layout=f"eeg-stats:{n_ch}x{FEATURES_PER_CHANNEL}",
    )
