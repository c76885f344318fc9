"""13-dim MFCC frames from mono audio, emitted at the shared 100 Hz rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .frames import FrameSequence
from .signals import TimeSeries, frame_hop, frame_signal

LOG_FLOOR = 1e-10


@dataclass
class MfccConfig:
    """Standard ASR recipe: 25 ms Hann window, 10 ms hop, 26 mel filters."""

    n_coeffs: int = 13
    n_mel_filters: int = 26
    window_s: float = 0.025
    hop_s: float = 0.01
    fft_size: int = 512
    preemphasis: float = 0.97
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0

    def window_samples(self, sample_rate_hz: float) -> int:
        return int(round(self.window_s * sample_rate_hz))

    def validate(self, sample_rate_hz: float) -> None:
        if self.n_coeffs < 1 or self.n_coeffs > self.n_mel_filters:
            raise ValueError(
                f"invalid config: need 1 <= n_coeffs <= n_mel_filters, "
                f"got {self.n_coeffs} > {self.n_mel_filters}"
            )
        if not (0.0 <= self.preemphasis < 1.0):
            raise ValueError(f"invalid config: preemphasis {self.preemphasis} not in [0, 1)")
        if self.fft_size < self.window_samples(sample_rate_hz):
            raise ValueError(
                f"invalid config: fft_size {self.fft_size} < window of "
                f"{self.window_samples(sample_rate_hz)} samples"
            )
        if not (0.0 <= self.fmin_hz < self.fmax_hz):
            raise ValueError(f"invalid config: fmin {self.fmin_hz} >= fmax {self.fmax_hz}")
        if self.fmax_hz > sample_rate_hz / 2.0 + 1e-9:
            raise ValueError(
                f"rate mismatch: fmax {self.fmax_hz} Hz exceeds Nyquist "
                f"{sample_rate_hz / 2.0} Hz"
            )
        if self.hop_s <= 0:
            raise ValueError(f"invalid config: hop_s must be > 0, got {self.hop_s}")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MfccConfig, sample_rate_hz: float) -> np.ndarray:
    """Triangular filters with centers uniform on the mel scale.

    Returns (n_mel_filters, fft_size//2 + 1). Filter edges are snapped to FFT
    bins so each triangle peaks at exactly 1 on its center bin.
    """
    config.validate(sample_rate_hz)
    mel_points = np.linspace(
        hz_to_mel(config.fmin_hz), hz_to_mel(config.fmax_hz), config.n_mel_filters + 2
    )
    bins = np.floor((config.fft_size + 1) * mel_to_hz(mel_points) / sample_rate_hz).astype(int)
    fb = np.zeros((config.n_mel_filters, config.fft_size // 2 + 1))
    for j in range(config.n_mel_filters):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        if left == center or center == right:
            raise ValueError(
                "invalid config: mel filters collapse onto a single FFT bin; "
                "increase fft_size or reduce n_mel_filters"
            )
        for i in range(left, center):
            fb[j, i] = (i - left) / (center - left)
        for i in range(center, right):
            fb[j, i] = (right - i) / (right - center)
    return fb


def extract_mfcc(x: TimeSeries, config: MfccConfig | None = None) -> FrameSequence:
    """Mel-frequency cepstral coefficients per frame.

    Chain: pre-emphasis (on the waveform) -> Hann window -> power spectrum ->
    mel filterbank -> log with a 1e-10 floor -> orthonormal DCT-II -> first
    n_coeffs coefficients. The default 10 ms hop gives exactly 100 frames/s.
    """
    config = config or MfccConfig()
    if x.n_channels != 1:
        raise ValueError(f"multichannel audio: expected 1 channel, got {x.n_channels}")
    config.validate(x.sample_rate_hz)
    frame_rate = 1.0 / config.hop_s
    hop = frame_hop(x.sample_rate_hz, frame_rate)

    signal = x.data[0]
    emphasized = np.concatenate(([signal[0]], signal[1:] - config.preemphasis * signal[:-1]))
    pre = TimeSeries(emphasized[None, :], x.sample_rate_hz, ("audio",))
    windows = frame_signal(pre, frame_rate, config.window_s)[0]  # (F, W)

    hann = np.hanning(windows.shape[-1])
    spectrum = np.abs(np.fft.rfft(windows * hann, n=config.fft_size, axis=-1)) ** 2
    fb = mel_filterbank(config, x.sample_rate_hz)
    mel_energy = spectrum @ fb.T
    log_mel = np.log(np.maximum(mel_energy, LOG_FLOOR))
    coeffs = dct(log_mel, type=2, norm="ortho", axis=-1)[:, : config.n_coeffs]
    return FrameSequence(
        coeffs, x.sample_rate_hz / hop, layout=f"mfcc:{config.n_coeffs}"
    )
