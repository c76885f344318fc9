"""Synthetic paired audio + surrogate-EEG corpora with exact frame labels.

Speech/silence activity is a two-state Markov chain at the 100 Hz frame
rate. Audio renders speech as amplitude-modulated harmonic complexes plus
white background noise at a configurable SNR; the surrogate EEG carries an
activity-locked oscillatory component over pink-ish noise and is, by
construction, bit-identical under changes of the acoustic SNR. Everything
is a pure function of (spec, sequence index).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as spsig

from . import io as evio
from .signals import TimeSeries

FRAME_RATE_HZ = 100.0

CONTINUATION_CLASSES = ("weather_tomorrow", "weather", "weather_today", "weather_macroni")
CONTINUE_CLASS_IDS = (0, 2)  # a pause-then-resume intent
CLASS_BAND_CENTERS_HZ = (6.0, 11.0, 16.0, 21.0)
CLASS_BAND_HALF_WIDTH_HZ = 1.5


@dataclass(frozen=True)
class CorpusSpec:
    n_sequences: int = 20
    duration_s: float = 10.0
    eeg_channels: int = 31
    eeg_rate_hz: float = 1000.0
    audio_rate_hz: float = 16000.0
    speech_duty: float = 0.5
    mean_segment_s: float = 2.0
    acoustic_snr_db: float = 20.0
    eeg_snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.speech_duty < 1.0):
            raise ValueError(f"speech_duty must be in (0, 1), got {self.speech_duty}")
        if self.n_sequences < 1 or self.duration_s <= 0 or self.mean_segment_s <= 0:
            raise ValueError("n_sequences, duration_s and mean_segment_s must be positive")
        for rate in (self.eeg_rate_hz, self.audio_rate_hz):
            if abs(rate / FRAME_RATE_HZ - round(rate / FRAME_RATE_HZ)) > 1e-9:
                raise ValueError(f"rate {rate} is not a multiple of {FRAME_RATE_HZ} Hz")


@dataclass
class PairedSequence:
    audio: TimeSeries
    eeg: TimeSeries
    activity: np.ndarray  # bool, per frame at 100 Hz
    label: int | None = None
    metadata: dict = field(default_factory=dict)


def generate_activity(spec: CorpusSpec, rng: np.random.Generator) -> np.ndarray:
    """Two-state Markov activity at 100 Hz.

    Stationary speech probability equals speech_duty; mean speech segment
    length equals mean_segment_s (the silence mean follows from the duty).
    Redrawn until both states appear; after many failures one speech segment
    is forced so the postcondition always holds.
    """
    n = int(round(spec.duration_s * FRAME_RATE_HZ))
    exit_speech = min(1.0, 1.0 / (spec.mean_segment_s * FRAME_RATE_HZ))
    exit_silence = min(1.0, exit_speech * spec.speech_duty / (1.0 - spec.speech_duty))
    for _ in range(1000):
        u = rng.random(n + 1)
        frames = np.empty(n, dtype=bool)
        state = u[0] < spec.speech_duty
        for k in range(n):
            frames[k] = state
            if u[k + 1] < (exit_speech if state else exit_silence):
                state = not state
        if frames.any() and not frames.all():
            return frames
    seg = max(1, min(n - 1, int(round(spec.mean_segment_s * FRAME_RATE_HZ))))
    start = int(rng.integers(0, n - seg)) if n > seg else 0
    frames = np.zeros(n, dtype=bool)
    frames[start : start + seg] = True
    return frames


def _activity_segments(activity: np.ndarray) -> list[tuple[int, int]]:
    padded = np.concatenate(([False], activity, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[::2], edges[1::2]))


def _harmonic_complex(rng: np.random.Generator, n: int, rate_hz: float) -> np.ndarray:
    """Amplitude-modulated five-harmonic tone with a random fundamental."""
    t = np.arange(n) / rate_hz
    f0 = rng.uniform(100.0, 250.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=5)
    am_rate = rng.uniform(2.0, 6.0)
    am_phase = rng.uniform(0.0, 2.0 * np.pi)
    tone = np.zeros(n)
    for k in range(1, 6):
        tone += np.sin(2.0 * np.pi * k * f0 * t + phases[k - 1]) / k
    return tone * (1.0 + 0.5 * np.sin(2.0 * np.pi * am_rate * t + am_phase))


def render_audio(activity: np.ndarray, spec: CorpusSpec, rng: np.random.Generator) -> TimeSeries:
    """Speech frames become an AM harmonic complex; background noise covers everything.

    The background is a babble of competing harmonic complexes over a white
    floor, spectrally matched to the foreground so a low SNR genuinely masks
    the speech instead of leaving tonal peaks above a flat noise bed. Its
    power is set from the in-segment speech power to hit acoustic_snr_db;
    with an infinite SNR the silence samples are exactly 0.
    """
    if len(activity) == 0:
        raise ValueError("activity must be nonempty")
    spf = int(round(spec.audio_rate_hz / FRAME_RATE_HZ))
    n = len(activity) * spf
    clean = np.zeros(n)
    for f_start, f_end in _activity_segments(activity):
        s0, s1 = f_start * spf, f_end * spf
        dur = s1 - s0
        tone = _harmonic_complex(rng, dur, spec.audio_rate_hz)
        ramp_n = min(dur // 2, int(0.010 * spec.audio_rate_hz))
        ramp = np.ones(dur)
        if ramp_n > 0:
            lobe = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp_n) / ramp_n))
            ramp[:ramp_n] = lobe
            ramp[dur - ramp_n :] = lobe[::-1]
        clean[s0:s1] = 0.3 * tone * ramp
    babble = np.zeros(n)
    for _ in range(3):
        babble += _harmonic_complex(rng, n, spec.audio_rate_hz)
    babble /= max(np.sqrt(np.mean(babble**2)), 1e-12)
    white = rng.standard_normal(n)
    noise_raw = babble + 0.5 * white
    noise_raw /= max(np.sqrt(np.mean(noise_raw**2)), 1e-12)
    speech_mask = np.repeat(activity, spf)
    sigma = 0.0
    if np.isfinite(spec.acoustic_snr_db) and speech_mask.any():
        p_speech = float(np.mean(clean[speech_mask] ** 2))
        sigma = np.sqrt(p_speech / 10.0 ** (spec.acoustic_snr_db / 10.0))
    return TimeSeries(clean + sigma * noise_raw, spec.audio_rate_hz, ("audio",))


def _band_oscillation(
    rng: np.random.Generator, n: int, rate_hz: float, lo_hz: float, hi_hz: float
) -> np.ndarray:
    """Unit-RMS constant-envelope oscillation wandering inside [lo, hi] Hz.

    Frequency modulation by slow noise keeps the instantaneous frequency in
    band, so in-band power is steady instead of fading like filtered noise.
    """
    rho = np.exp(-2.0 * np.pi * 0.5 / rate_hz)
    slow = spsig.lfilter([1.0 - rho], [1.0, -rho], rng.standard_normal(n))
    slow /= max(np.std(slow), 1e-12)
    # 0.7 excursion keeps the instantaneous frequency clear of the band
    # edges, where downstream band filters would eat the locked power.
    mid, half = 0.5 * (lo_hz + hi_hz), 0.5 * (hi_hz - lo_hz)
    inst_freq = mid + 0.7 * half * np.tanh(slow)
    phase = 2.0 * np.pi * np.cumsum(inst_freq) / rate_hz + rng.uniform(0.0, 2.0 * np.pi)
    osc = np.sin(phase)
    return osc / max(np.sqrt(np.mean(osc**2)), 1e-12)


def _pinkish_noise(rng: np.random.Generator, shape: tuple[int, int], rate_hz: float) -> np.ndarray:
    white = rng.standard_normal(shape)
    out = np.zeros(shape)
    # Staggered one-pole low-passes summed: a 1/f-shaped spectrum over the
    # band the downstream band-pass keeps.
    for fc, weight in ((1.0, 1.0), (8.0, 0.35), (64.0, 0.12)):
        rho = np.exp(-2.0 * np.pi * fc / rate_hz)
        out += weight * spsig.lfilter([1.0 - rho], [1.0, -rho], white, axis=-1)
    rms = np.sqrt(np.mean(out**2, axis=-1, keepdims=True))
    return out / np.maximum(rms, 1e-12)


def render_eeg(
    activity: np.ndarray,
    spec: CorpusSpec,
    rng: np.random.Generator,
    band_hz: tuple[float, float] = (4.0, 30.0),
    drive: np.ndarray | None = None,
) -> TimeSeries:
    """Surrogate EEG: pink-ish noise plus an activity-locked band component.

    Every channel shares the band-limited oscillation, scaled by a random
    per-channel gain and a smoothed activity envelope; eeg_snr_db sets the
    speech-locked power against the noise floor. The acoustic SNR never
    enters, so EEG output is unaffected by it.

    drive optionally replaces the boolean activity as the per-frame
    modulation level (values in [0, 1]); activity still defines where the
    SNR reference power is measured.
    """
    if len(activity) == 0:
        raise ValueError("activity must be nonempty")
    spf = int(round(spec.eeg_rate_hz / FRAME_RATE_HZ))
    n = len(activity) * spf
    n_ch = spec.eeg_channels

    level = activity.astype(np.float64) if drive is None else np.asarray(drive, dtype=np.float64)
    if level.shape != activity.shape:
        raise ValueError("drive must have one value per activity frame")
    act = np.repeat(level, spf)
    # Zero-lag smoothing keeps the locked component centered on the labeled
    # frames, mimicking activity-aligned cortical modulation; the short
    # kernel keeps segment edges sharp at the frame scale.
    k = int(0.031 * spec.eeg_rate_hz) | 1
    kernel = np.hanning(k + 2)[1:-1]
    envelope = np.convolve(act, kernel / kernel.sum(), mode="same")

    band = _band_oscillation(rng, n, spec.eeg_rate_hz, band_hz[0], band_hz[1])

    gains = rng.uniform(0.5, 1.5, size=n_ch)
    pink = _pinkish_noise(rng, (n_ch, n), spec.eeg_rate_hz)

    locked = gains[:, None] * (envelope * band)[None, :]
    speech_mask = np.repeat(activity, spf)
    if not speech_mask.any():
        sigma = 1.0
    elif np.isfinite(spec.eeg_snr_db):
        p_sig = float(np.mean(locked[:, speech_mask] ** 2))
        sigma = np.sqrt(p_sig / 10.0 ** (spec.eeg_snr_db / 10.0))
    else:
        sigma = 0.0
    data = locked + sigma * pink
    names = tuple(f"eeg{i:02d}" for i in range(n_ch))
    return TimeSeries(data, spec.eeg_rate_hz, names)


def _sequence_rngs(seed: int, index: int) -> tuple[np.random.Generator, ...]:
    return tuple(np.random.default_rng((seed, index, k)) for k in range(3))


def generate_sequence(spec: CorpusSpec, index: int) -> PairedSequence:
    rng_act, rng_audio, rng_eeg = _sequence_rngs(spec.seed, index)
    activity = generate_activity(spec, rng_act)
    audio = render_audio(activity, spec, rng_audio)
    eeg = render_eeg(activity, spec, rng_eeg)
    return PairedSequence(audio, eeg, activity, metadata={"index": index})


def generate_corpus(spec: CorpusSpec) -> list[PairedSequence]:
    """Paired sequences derived from (seed, index) RNG streams; order-independent."""
    return [generate_sequence(spec, i) for i in range(spec.n_sequences)]


@dataclass(frozen=True)
class ContinuationSpec:
    """Four utterance types: pause-then-resume (classes 0 and 2), a complete
    short sentence (1), and an unrelated sentence spoken straight through (3).

    Classes 0 and 2 follow an identical acoustic law; they are separable only
    through the class-specific EEG band, which is the point of the exercise.
    During the pause the EEG keeps a reduced class-locked drive (the speaker
    is planning the rest of the sentence), so intent is readable from the
    pause itself.
    """

    n_per_class: int = 50
    eeg_channels: int = 31
    eeg_rate_hz: float = 1000.0
    audio_rate_hz: float = 16000.0
    acoustic_snr_db: float = 30.0
    eeg_snr_db: float = 30.0
    seed: int = 0
    prefix_s: float = 1.0
    gap_s: float = 2.0
    suffix_s: float = 0.7
    pause_drive: float = 0.5

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")
        for rate in (self.eeg_rate_hz, self.audio_rate_hz):
            if abs(rate / FRAME_RATE_HZ - round(rate / FRAME_RATE_HZ)) > 1e-9:
                raise ValueError(f"rate {rate} is not a multiple of {FRAME_RATE_HZ} Hz")


def _continuation_activity(
    spec: ContinuationSpec, cls: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame speech activity plus the EEG drive level (pause keeps a
    reduced class-locked drive for the resuming classes)."""

    def frames(seconds: float) -> int:
        return max(1, int(round(seconds * FRAME_RATE_HZ)))

    lead = frames(0.25 + 0.1 * rng.random())
    prefix = frames(spec.prefix_s + 0.3 * (rng.random() - 0.5))
    tail = frames(0.25 + 0.1 * rng.random())
    parts = [np.zeros(lead), np.ones(prefix)]
    if cls in CONTINUE_CLASS_IDS:
        suffix = frames(spec.suffix_s + 0.2 * (rng.random() - 0.5))
        parts += [np.full(frames(spec.gap_s), spec.pause_drive), np.ones(suffix)]
    elif cls == 3:
        suffix = frames(spec.suffix_s + 0.2 + 0.2 * (rng.random() - 0.5))
        parts += [np.full(frames(0.1), spec.pause_drive), np.ones(suffix)]
    parts.append(np.zeros(tail))
    drive = np.concatenate(parts)
    return drive >= 1.0, drive


def generate_continuation_corpus(spec: ContinuationSpec) -> list[PairedSequence]:
    """n_per_class sequences for each of the four utterance classes."""
    vad_like = CorpusSpec(
        n_sequences=1,
        duration_s=1.0,
        eeg_channels=spec.eeg_channels,
        eeg_rate_hz=spec.eeg_rate_hz,
        audio_rate_hz=spec.audio_rate_hz,
        acoustic_snr_db=spec.acoustic_snr_db,
        eeg_snr_db=spec.eeg_snr_db,
        seed=spec.seed,
    )
    sequences = []
    for cls in range(len(CONTINUATION_CLASSES)):
        center = CLASS_BAND_CENTERS_HZ[cls]
        band = (center - CLASS_BAND_HALF_WIDTH_HZ, center + CLASS_BAND_HALF_WIDTH_HZ)
        for i in range(spec.n_per_class):
            index = cls * spec.n_per_class + i
            rng_act, rng_audio, rng_eeg = _sequence_rngs(spec.seed, index)
            activity, drive = _continuation_activity(spec, cls, rng_act)
            audio = render_audio(activity, vad_like, rng_audio)
            eeg = render_eeg(activity, vad_like, rng_eeg, band_hz=band, drive=drive)
            sequences.append(
                PairedSequence(
                    audio, eeg, activity, label=cls,
                    metadata={"index": index, "class": CONTINUATION_CLASSES[cls]},
                )
            )
    return sequences


def save_corpus(
    sequences: list[PairedSequence],
    spec: CorpusSpec | ContinuationSpec,
    out_dir: str | Path,
    kind: str = "vad",
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, seq in enumerate(sequences):
        sid = f"seq{i:04d}"
        evio.save_timeseries(seq.audio, out / f"{sid}_audio.f32")
        evio.save_timeseries(seq.eeg, out / f"{sid}_eeg.f32")
        entry = {
            "id": sid,
            "audio": f"{sid}_audio.f32",
            "eeg": f"{sid}_eeg.f32",
            "activity": seq.activity.astype(int).tolist(),
        }
        if seq.label is not None:
            entry["label"] = int(seq.label)
        entries.append(entry)
    manifest = {
        "kind": kind,
        "frame_rate_hz": FRAME_RATE_HZ,
        "spec": asdict(spec),
        "sequences": entries,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n"
    )


def load_corpus(corpus_dir: str | Path) -> tuple[dict, list[PairedSequence]]:
    corpus_dir = Path(corpus_dir)
    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    sequences = []
    for entry in manifest["sequences"]:
        sequences.append(
            PairedSequence(
                audio=evio.load_timeseries(corpus_dir / entry["audio"]),
                eeg=evio.load_timeseries(corpus_dir / entry["eeg"]),
                activity=np.asarray(entry["activity"], dtype=bool),
                label=entry.get("label"),
                metadata={"id": entry["id"]},
            )
        )
    return manifest, sequences
