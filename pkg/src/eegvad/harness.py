"""End-to-end experiment driver: corpus -> features -> KPCA -> train -> metrics.

Every pipeline failure is re-raised as a PipelineError naming its stage.
All randomness descends from one master seed, feature reduction and input
standardization are fitted on the training split only, and every artifact a
run emits (results rows, checkpoints, curves) is a deterministic function of
its configuration.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kpca as kpca_mod
from . import models, synth
from .eeg_features import extract_eeg_features
from .frames import FrameSequence
from .mfcc import MfccConfig, extract_mfcc
from .models import LabeledSequence, TrainConfig
from .signals import TimeSeries, design_bandpass, design_notch, filter_series
from .synth import CONTINUE_CLASS_IDS, ContinuationSpec, CorpusSpec, PairedSequence

FEATURE_MODES = ("mfcc", "eeg", "mfcc+eeg")
_KPCA_STREAM = 44


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, str(exc)) from exc


@dataclass
class KpcaSettings:
    out_dim: int = 30
    max_fit_frames: int = 2000
    gamma: float | None = None
    coef0: float = 1.0

    def params(self) -> kpca_mod.KernelParams:
        return kpca_mod.KernelParams(degree=3, gamma=self.gamma, coef0=self.coef0)


@dataclass
class ExperimentConfig:
    """One experiment cell: corpus source, feature mode, architecture, training."""

    corpus_dir: str | None = None
    corpus_spec: CorpusSpec | None = None
    continuation_spec: ContinuationSpec | None = None
    feature_mode: str = "mfcc+eeg"
    variant: str = "dataset1"
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=30))
    kpca: KpcaSettings = field(default_factory=KpcaSettings)
    out_dir: str | None = None
    eeg_window_s: float = 0.1
    bandpass_hz: tuple[float, float] = (0.1, 70.0)
    notch_hz: float = 60.0
    notch_q: float = 30.0
    mfcc: MfccConfig = field(default_factory=MfccConfig)

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(
                f"feature_mode must be one of {FEATURE_MODES}, got {self.feature_mode!r}"
            )

    def corpus_label(self) -> str:
        if self.corpus_dir is not None:
            return Path(self.corpus_dir).name
        spec = self.corpus_spec or self.continuation_spec
        if spec is None:
            return "unspecified"
        return f"synthetic-seed{spec.seed}"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if "train" in raw and isinstance(raw["train"], dict):
            train = dict(raw["train"])
            if "split" in train:
                train["split"] = tuple(train["split"])
            raw["train"] = TrainConfig(**train)
        if "kpca" in raw and isinstance(raw["kpca"], dict):
            raw["kpca"] = KpcaSettings(**raw["kpca"])
        if "mfcc" in raw and isinstance(raw["mfcc"], dict):
            raw["mfcc"] = MfccConfig(**raw["mfcc"])
        if "corpus_spec" in raw and isinstance(raw["corpus_spec"], dict):
            raw["corpus_spec"] = CorpusSpec(**raw["corpus_spec"])
        if "continuation_spec" in raw and isinstance(raw["continuation_spec"], dict):
            raw["continuation_spec"] = ContinuationSpec(**raw["continuation_spec"])
        if "bandpass_hz" in raw:
            raw["bandpass_hz"] = tuple(raw["bandpass_hz"])
        return cls(**raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        return out


def preprocess_eeg(eeg: TimeSeries, config: ExperimentConfig) -> TimeSeries:
    """Band-pass then notch, causal single pass per channel."""
    bp = design_bandpass(config.bandpass_hz[0], config.bandpass_hz[1], eeg.sample_rate_hz)
    notch = design_notch(config.notch_hz, eeg.sample_rate_hz, config.notch_q)
    return filter_series(notch, filter_series(bp, eeg))


@dataclass
class PreparedSequence:
    """Per-sequence raw feature streams, truncated to a shared frame count."""

    mfcc: FrameSequence | None
    eeg_stats: FrameSequence | None
    frame_labels: np.ndarray
    sequence_label: int | None


def prepare_sequences(
    sequences: list[PairedSequence], config: ExperimentConfig
) -> list[PreparedSequence]:
    want_mfcc = "mfcc" in config.feature_mode
    want_eeg = "eeg" in config.feature_mode
    prepared = []
    for seq in sequences:
        mf = extract_mfcc(seq.audio, config.mfcc) if want_mfcc else None
        st = None
        if want_eeg:
            st = extract_eeg_features(
                preprocess_eeg(seq.eeg, config), synth.FRAME_RATE_HZ, config.eeg_window_s
            )
        counts = [len(seq.activity)]
        counts += [f.n_frames for f in (mf, st) if f is not None]
        n = min(counts)
        prepared.append(
            PreparedSequence(
                mfcc=mf.truncated(n) if mf is not None else None,
                eeg_stats=st.truncated(n) if st is not None else None,
                frame_labels=seq.activity[:n].astype(np.int64),
                sequence_label=seq.label,
            )
        )
    return prepared


@dataclass
class Reducers:
    """Training-split-fitted preprocessing: EEG standardizer + KPCA + input norm.

    The EEG statistics are standardized per dimension before the polynomial
    kernel sees them; otherwise large-scale features (rms, entropy) dominate
    the dot products and drown the small-scale ones (zero-crossing rate).
    """

    kpca_model: kpca_mod.KpcaModel | None
    eeg_mu: np.ndarray | None
    eeg_sigma: np.ndarray | None
    norm_mu: np.ndarray
    norm_sigma: np.ndarray


def fit_reducers(
    prepared: list[PreparedSequence],
    train_idx: np.ndarray,
    config: ExperimentConfig,
) -> Reducers:
    """Fit KPCA and standardization statistics on the training split only."""
    model, eeg_mu, eeg_sigma = None, None, None
    if "eeg" in config.feature_mode:
        train_stats = np.concatenate([prepared[i].eeg_stats.data for i in train_idx])
        eeg_mu, eeg_sigma = models.compute_norm_stats(train_stats)
        fit_rows = kpca_mod.subsample_rows(
            (train_stats - eeg_mu) / eeg_sigma,
            config.kpca.max_fit_frames,
            seed=(config.train.seed, _KPCA_STREAM),
        )
        model = kpca_mod.fit_kpca(fit_rows, config.kpca.out_dim, config.kpca.params())
    partial = Reducers(model, eeg_mu, eeg_sigma, np.zeros(1), np.ones(1))
    train_assembled = np.concatenate(
        [assemble_features(prepared[i], partial, config).data for i in train_idx]
    )
    mu, sigma = models.compute_norm_stats(train_assembled)
    return Reducers(model, eeg_mu, eeg_sigma, mu, sigma)


def assemble_features(
    prep: PreparedSequence,
    reducers: Reducers,
    config: ExperimentConfig,
) -> FrameSequence:
    """Concatenate the configured streams, MFCC block first, then reduced EEG."""
    parts = []
    if "mfcc" in config.feature_mode:
        parts.append(prep.mfcc.data)
    if "eeg" in config.feature_mode:
        standardized = (prep.eeg_stats.data - reducers.eeg_mu) / reducers.eeg_sigma
        parts.append(kpca_mod.transform(reducers.kpca_model, standardized))
    data = parts[0] if len(parts) == 1 else np.hstack(parts)
    return FrameSequence(data, synth.FRAME_RATE_HZ, layout=config.feature_mode)


def _labeled(
    prepared: list[PreparedSequence],
    idx: np.ndarray,
    reducers: Reducers,
    config: ExperimentConfig,
    per_frame: bool,
) -> list[LabeledSequence]:
    out = []
    for i in idx:
        feats = models.apply_norm(
            assemble_features(prepared[i], reducers, config),
            reducers.norm_mu, reducers.norm_sigma,
        )
        if per_frame:
            out.append(LabeledSequence(feats, frame_labels=prepared[i].frame_labels))
        else:
            out.append(LabeledSequence(feats, sequence_label=prepared[i].sequence_label))
    return out


def split_indices(n: int, config: TrainConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sequence-granularity split used everywhere a corpus is partitioned."""
    idx = np.arange(n)
    train, val, test = models.split_corpus(list(idx), config)
    return np.array(train), np.array(val), np.array(test)


def _load_or_generate(config: ExperimentConfig, expected_kind: str) -> list[PairedSequence]:
    if config.corpus_dir is not None:
        manifest, sequences = synth.load_corpus(config.corpus_dir)
        if manifest.get("kind") != expected_kind:
            raise ValueError(
                f"corpus kind {manifest.get('kind')!r} does not match experiment {expected_kind!r}"
            )
        return sequences
    if expected_kind == "continuation":
        spec = config.continuation_spec or ContinuationSpec(seed=config.train.seed)
        return synth.generate_continuation_corpus(spec)
    spec = config.corpus_spec or CorpusSpec(seed=config.train.seed)
    return synth.generate_corpus(spec)


def _input_dim(config: ExperimentConfig) -> int:
    dim = 0
    if "mfcc" in config.feature_mode:
        dim += config.mfcc.n_coeffs
    if "eeg" in config.feature_mode:
        dim += config.kpca.out_dim
    return dim


def run_vad_experiment(config: ExperimentConfig) -> dict:
    """Full per-frame speech/silence pipeline; returns one results-table row."""
    with _stage("corpus"):
        sequences = _load_or_generate(config, "vad")
    with _stage("features"):
        prepared = prepare_sequences(sequences, config)
    with _stage("split"):
        train_idx, val_idx, test_idx = split_indices(len(prepared), config.train)
    with _stage("kpca"):
        reducers = fit_reducers(prepared, train_idx, config)
    with _stage("assemble"):
        train_set = _labeled(prepared, train_idx, reducers, config, per_frame=True)
        val_set = _labeled(prepared, val_idx, reducers, config, per_frame=True)
        test_set = _labeled(prepared, test_idx, reducers, config, per_frame=True)
    with _stage("build"):
        net = models.build_vad(config.variant, _input_dim(config), seed=config.train.seed)
    with _stage("train"):
        meta = _checkpoint_meta("vad", config, reducers)
        result = models.train(net, train_set, val_set, config.train, meta=meta)
    with _stage("evaluate"):
        test_loss, test_acc = models.evaluate(net, test_set)
    row = {
        "corpus": config.corpus_label(),
        "feature_mode": config.feature_mode,
        "accuracy_pct": round(100.0 * test_acc, 4),
        "test_loss": round(test_loss, 6),
        "seed": config.train.seed,
        "epochs_trained": len(result.history),
        "best_epoch": result.best_epoch,
    }
    if config.out_dir is not None:
        with _stage("artifacts"):
            _write_artifacts(config, result, reducers.kpca_model, row)
    return row


def _checkpoint_meta(task: str, config: ExperimentConfig, reducers: Reducers) -> dict:
    meta = {
        "task": task,
        "variant": config.variant,
        "feature_mode": config.feature_mode,
        "input_dim": _input_dim(config),
        "norm_mu": [float(v) for v in reducers.norm_mu],
        "norm_sigma": [float(v) for v in reducers.norm_sigma],
        "corpus": config.corpus_label(),
    }
    if reducers.eeg_mu is not None:
        meta["eeg_stats_mu"] = [float(v) for v in reducers.eeg_mu]
        meta["eeg_stats_sigma"] = [float(v) for v in reducers.eeg_sigma]
    return meta


def run_continuation_experiment(config: ExperimentConfig) -> dict:
    """Train the intent classifier on EEG features and on MFCC features.

    Reports 4-class accuracy and the binary continue/stop mapping (classes
    0 and 2 mean the speaker resumes after a pause).
    """
    with _stage("corpus"):
        sequences = _load_or_generate(config, "continuation")
    report: dict = {"corpus": config.corpus_label(), "seed": config.train.seed}
    for mode in ("eeg", "mfcc"):
        mode_config = replace(
            config, feature_mode=mode,
            out_dir=str(Path(config.out_dir) / mode) if config.out_dir else None,
        )
        with _stage("features"):
            prepared = prepare_sequences(sequences, mode_config)
        with _stage("split"):
            train_idx, val_idx, test_idx = split_indices(len(prepared), config.train)
        with _stage("kpca"):
            reducers = fit_reducers(prepared, train_idx, mode_config)
        with _stage("assemble"):
            train_set = _labeled(prepared, train_idx, reducers, mode_config, per_frame=False)
            val_set = _labeled(prepared, val_idx, reducers, mode_config, per_frame=False)
            test_set = _labeled(prepared, test_idx, reducers, mode_config, per_frame=False)
        with _stage("build"):
            net = models.build_continuation(_input_dim(mode_config), seed=config.train.seed)
        with _stage("train"):
            meta = _checkpoint_meta("continuation", mode_config, reducers)
            result = models.train(net, train_set, val_set, config.train, meta=meta)
        with _stage("evaluate"):
            truth = np.array([s.sequence_label for s in test_set])
            preds = np.array(
                [models.predict_frames(net, s.features)[0][0] for s in test_set]
            )
            four_class = models.accuracy(preds, truth)
            to_binary = np.isin
            binary = models.accuracy(
                to_binary(preds, CONTINUE_CLASS_IDS), to_binary(truth, CONTINUE_CLASS_IDS)
            )
        report[mode] = {
            "four_class_accuracy_pct": round(100.0 * four_class, 4),
            "binary_accuracy_pct": round(100.0 * binary, 4),
            "epochs_trained": len(result.history),
            "best_epoch": result.best_epoch,
        }
        if mode_config.out_dir is not None:
            with _stage("artifacts"):
                _write_artifacts(mode_config, result, reducers.kpca_model, dict(report[mode]))
    if config.out_dir is not None:
        with _stage("artifacts"):
            out = Path(config.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "continuation_report.json").write_text(
                json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
            )
    return report


def _write_artifacts(config, result, kpca_model, row: dict) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    models.save_checkpoint(result.checkpoint, out / "checkpoint.net")
    (out / "history.csv").write_text(models.history_csv(result.history))
    if kpca_model is not None:
        kpca_mod.save_kpca(kpca_model, out / "kpca.model")
        emit_variance_curve(kpca_model, out / "variance_curve.csv")
    (out / "results_row.csv").write_text(results_csv([row]))
    run_info = {"config": _jsonable(config.to_dict()), "row": row, "wall_time_unix": time.time()}
    (out / "run_info.json").write_text(json.dumps(run_info, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return obj


def emit_variance_curve(model: kpca_mod.KpcaModel, path: str | Path) -> None:
    """Write the cumulative explained-variance curve as CSV plot data."""
    curve = kpca_mod.explained_variance_curve(model)
    lines = ["component_index,cumulative_ratio"]
    for i, value in enumerate(curve, start=1):
        lines.append(f"{i},{value:.10g}")
    Path(path).write_text("\n".join(lines) + "\n")


def results_csv(rows: list[dict]) -> str:
    """Deterministic results table: corpus/feature-mode keyed accuracy rows."""
    cols = ["corpus", "feature_mode", "accuracy_pct", "seed", "epochs_trained", "best_epoch"]
    mode_order = {m: i for i, m in enumerate(FEATURE_MODES)}
    ordered = sorted(
        rows,
        key=lambda r: (str(r.get("corpus")), mode_order.get(r.get("feature_mode"), 99),
                       r.get("seed", 0)),
    )
    lines = [",".join(cols)]
    for r in ordered:
        lines.append(",".join(_format_cell(r.get(c)) for c in cols))
    return "\n".join(lines) + "\n"


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def format_results_table(rows: list[dict]) -> str:
    """Accuracy grid, one line per corpus, one column per feature mode."""
    grid: dict[str, dict[str, float]] = {}
    for r in rows:
        grid.setdefault(str(r["corpus"]), {})[r["feature_mode"]] = r["accuracy_pct"]
    header = f"{'corpus':<24} {'MFCC':>8} {'EEG':>8} {'MFCC+EEG':>10}"
    lines = [header, "-" * len(header)]
    for corpus in sorted(grid):
        cells = grid[corpus]
        lines.append(
            f"{corpus:<24} "
            f"{_pct(cells.get('mfcc')):>8} {_pct(cells.get('eeg')):>8} "
            f"{_pct(cells.get('mfcc+eeg')):>10}"
        )
    return "\n".join(lines) + "\n"


def _pct(value) -> str:
    return "-" if value is None else f"{value:.2f}"


def run_sweep(
    base: ExperimentConfig,
    snr_values: list[float],
    modes: list[str] = list(FEATURE_MODES),
    seeds: list[int] = (0, 1, 2),
) -> list[dict]:
    """Noise-robustness grid: acoustic SNR x feature mode x seed.

    The EEG SNR stays fixed at the base spec value; each cell regenerates its
    corpus so the acoustic noise level actually changes the audio.
    """
    base_spec = base.corpus_spec or CorpusSpec()
    rows = []
    for snr in snr_values:
        for mode in modes:
            for seed in seeds:
                spec = replace(base_spec, acoustic_snr_db=snr, seed=seed)
                cell = replace(
                    base,
                    corpus_spec=spec,
                    corpus_dir=None,
                    feature_mode=mode,
                    train=replace(base.train, seed=seed),
                    out_dir=None,
                )
                row = run_vad_experiment(cell)
                row["acoustic_snr_db"] = snr
                rows.append(row)
    return rows


def median_by_cell(rows: list[dict]) -> dict[tuple[float, str], float]:
    """Median accuracy per (acoustic SNR, feature mode) across seeds."""
    cells: dict[tuple[float, str], list[float]] = {}
    for r in rows:
        cells.setdefault((r["acoustic_snr_db"], r["feature_mode"]), []).append(r["accuracy_pct"])
    return {k: float(np.median(v)) for k, v in cells.items()}
