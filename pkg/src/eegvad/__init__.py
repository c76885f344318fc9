"""Multimodal voice activity detection: EEG/audio features, kernel PCA, GRU classifiers."""

from .eeg_features import (
    extract_eeg_features,
    kurtosis,
    moving_window_average,
    power_spectral_entropy,
    rms,
    zero_crossing_rate,
)
from .frames import FrameSequence, load_frames, save_frames
from .harness import (
    ExperimentConfig,
    PipelineError,
    emit_variance_curve,
    run_continuation_experiment,
    run_sweep,
    run_vad_experiment,
)
from .io import load_timeseries, load_wav, save_timeseries
from .kpca import (
    KernelParams,
    KpcaModel,
    explained_variance_curve,
    fit_kpca,
    load_kpca,
    polynomial_kernel,
    save_kpca,
    transform,
)
from .mfcc import MfccConfig, extract_mfcc, hz_to_mel, mel_filterbank, mel_to_hz
from .models import (
    Checkpoint,
    LabeledSequence,
    TrainConfig,
    accuracy,
    build_continuation,
    build_vad,
    load_checkpoint,
    predict_frames,
    save_checkpoint,
    split_corpus,
    train,
)
from .signals import (
    BiquadCascade,
    TimeSeries,
    design_bandpass,
    design_notch,
    filter_series,
    frame_signal,
)
from .synth import (
    CONTINUATION_CLASSES,
    CONTINUE_CLASS_IDS,
    ContinuationSpec,
    CorpusSpec,
    PairedSequence,
    generate_activity,
    generate_continuation_corpus,
    generate_corpus,
    load_corpus,
    render_audio,
    render_eeg,
    save_corpus,
)

__version__ = "0.1.0"
