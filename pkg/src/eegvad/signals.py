"""Raw signal containers, IIR filter design/application, and sliding-window framing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as spsig


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled multichannel signal, stored channels x samples.

    Args:
        data: real matrix of shape (channels, samples); a 1-D array is
            promoted to a single channel.
        sample_rate_hz: sampling rate, > 0.
        channel_names: one name per channel; autogenerated when omitted.
    """

    data: np.ndarray
    sample_rate_hz: float
    channel_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 2:
            raise ValueError(f"signal data must be 1-D or 2-D, got ndim={arr.ndim}")
        if not np.isfinite(arr).all():
            raise ValueError("signal data contains non-finite values")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        names = tuple(self.channel_names)
        if not names:
            names = tuple(f"ch{i:02d}" for i in range(arr.shape[0]))
        if len(names) != arr.shape[0]:
            raise ValueError(
                f"{len(names)} channel names for {arr.shape[0]} channels"
            )
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class BiquadCascade:
    """Cascade of second-order IIR sections.

    Each section is (b0, b1, b2, a1, a2) with the a0 coefficient normalized
    to 1. Every section must be stable: both poles strictly inside the unit
    circle.
    """

    sections: tuple[tuple[float, float, float, float, float], ...]
    description: str = ""

    def __post_init__(self):
        secs = tuple(tuple(float(c) for c in s) for s in self.sections)
        if not secs:
            raise ValueError("cascade must contain at least one section")
        for s in secs:
            if len(s) != 5:
                raise ValueError(f"section must have 5 coefficients, got {len(s)}")
        object.__setattr__(self, "sections", secs)
        pmax = max(abs(p) for p in self.poles())
        if not pmax < 1.0:
            raise ValueError(f"unstable section: pole magnitude {pmax} >= 1")

    def poles(self) -> list[complex]:
        out: list[complex] = []
        for _, _, _, a1, a2 in self.sections:
            out.extend(np.roots([1.0, a1, a2]))
        return out

    def sos(self) -> np.ndarray:
        """Second-order-sections matrix (n, 6) as used by scipy.signal.sosfilt."""
        return np.array(
            [[b0, b1, b2, 1.0, a1, a2] for b0, b1, b2, a1, a2 in self.sections],
            dtype=np.float64,
        )

    def frequency_response(self, freqs_hz: np.ndarray, sample_rate_hz: float) -> np.ndarray:
        """Complex response H(e^{jw}) evaluated directly from the coefficients."""
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / sample_rate_hz
        z1 = np.exp(-1j * w)
        z2 = z1 * z1
        h = np.ones_like(z1, dtype=np.complex128)
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2)
        return h


def _cascade_from_sos(sos: np.ndarray, description: str) -> BiquadCascade:
    sections = []
    for row in np.atleast_2d(sos):
        b0, b1, b2, a0, a1, a2 = (float(v) for v in row)
        sections.append((b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0))
    return BiquadCascade(tuple(sections), description)


def design_bandpass(low_hz: float, high_hz: float, sample_rate_hz: float) -> BiquadCascade:
    """Design a 4th-order Butterworth band-pass as two biquad sections.

    Bilinear transform with frequency pre-warping; -3 dB points at the two
    cutoffs. Raises ValueError unless 0 < low_hz < high_hz < Nyquist.
    """
    nyq = sample_rate_hz / 2.0
    if not (0.0 < low_hz < high_hz < nyq):
        raise ValueError(
            f"invalid cutoffs: need 0 < low < high < {nyq} Hz, "
            f"got low={low_hz}, high={high_hz}"
        )
    sos = spsig.butter(2, [low_hz, high_hz], btype="bandpass", fs=sample_rate_hz, output="sos")
    return _cascade_from_sos(
        sos, f"butterworth band-pass {low_hz}-{high_hz} Hz @ {sample_rate_hz} Hz"
    )


def design_notch(center_hz: float, sample_rate_hz: float, quality: float = 30.0) -> BiquadCascade:
    """Design a single-biquad notch at center_hz with the given quality factor."""
    nyq = sample_rate_hz / 2.0
    if not (0.0 < center_hz < nyq):
        raise ValueError(
            f"invalid center: need 0 < center < {nyq} Hz, got {center_hz}"
        )
    if not quality > 0:
        raise ValueError(f"quality must be > 0, got {quality}")
    b, a = spsig.iirnotch(center_hz, quality, fs=sample_rate_hz)
    sos = np.concatenate([b, a])[None, :]
    return _cascade_from_sos(
        sos, f"notch {center_hz} Hz Q={quality} @ {sample_rate_hz} Hz"
    )


def filter_series(cascade: BiquadCascade, x: TimeSeries) -> TimeSeries:
    """Apply a biquad cascade to every channel, causal single pass, zero initial state."""
    if x.n_samples == 0:
        raise ValueError("cannot filter an empty signal")
    y = spsig.sosfilt(cascade.sos(), x.data, axis=1)
    if not np.isfinite(y).all():
        raise ValueError("non-finite output: filter appears unstable on this input")
    return TimeSeries(y, x.sample_rate_hz, x.channel_names)


def frame_hop(sample_rate_hz: float, frame_rate_hz: float) -> int:
    """Samples between frame starts; raises if the two rates are incompatible."""
    if not frame_rate_hz > 0:
        raise ValueError(f"frame rate must be > 0, got {frame_rate_hz}")
    hop = sample_rate_hz / frame_rate_hz
    hop_i = int(round(hop))
    if hop_i < 1 or abs(hop - hop_i) > 1e-9 * max(1.0, hop):
        raise ValueError(
            f"incompatible rates: hop {sample_rate_hz}/{frame_rate_hz} = {hop} "
            "is not a positive integer number of samples"
        )
    return hop_i


def frame_signal(x: TimeSeries, frame_rate_hz: float, window_s: float) -> np.ndarray:
    """Slice a signal into overlapping windows at the given frame rate.

    Frame k covers samples [k*hop, k*hop + window); trailing samples that
    cannot fill a window are dropped. Returns a read-only view of shape
    (channels, n_frames, window), so no sample data is copied.
    """
    hop = frame_hop(x.sample_rate_hz, frame_rate_hz)
    window = int(round(window_s * x.sample_rate_hz))
    if window < 2:
        raise ValueError(
            f"window of {window_s} s is {window} samples at {x.sample_rate_hz} Hz; need >= 2"
        )
    if x.n_samples < window:
        return np.empty((x.n_channels, 0, window), dtype=x.data.dtype)
    sw = np.lib.stride_tricks.sliding_window_view(x.data, window, axis=1)
    return sw[:, ::hop, :]


def frame_count(n_samples: int, window: int, hop: int) -> int:
    """Number of full windows: floor((n_samples - window) / hop) + 1, or 0."""
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1
