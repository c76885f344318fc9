"""Command-line driver for corpus synthesis, feature extraction, and experiments.

Exit codes: 0 success, 2 configuration error, 3 pipeline error.
Every subcommand accepts --config JSON; explicit flags override file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, kpca, models, synth
from .frames import load_frames, save_frames
from .harness import ExperimentConfig, PipelineError
from .models import TrainConfig


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        return json.loads(Path(args.config).read_text())
    return {}


def _experiment_config(args, task: str = "vad") -> ExperimentConfig:
    raw = _load_config(args)
    config = ExperimentConfig.from_dict(raw) if raw else ExperimentConfig()
    train = config.train
    if getattr(args, "seed", None) is not None:
        train = replace(train, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        train = replace(train, epochs=args.epochs)
    if getattr(args, "batch_size", None) is not None:
        train = replace(train, batch_size=args.batch_size)
    updates: dict = {"train": train}
    if getattr(args, "corpus", None) is not None:
        updates["corpus_dir"] = args.corpus
    if getattr(args, "feature_mode", None) is not None:
        updates["feature_mode"] = args.feature_mode
    if getattr(args, "variant", None) is not None:
        updates["variant"] = args.variant
    if getattr(args, "out", None) is not None:
        updates["out_dir"] = args.out
    config = replace(config, **updates)
    if task == "continuation" and config.train.batch_size == 1 and "train" not in raw:
        config = replace(config, train=replace(config.train, batch_size=100,
                                               early_stopping=True))
    return config


def _cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.kind == "continuation":
        spec = synth.ContinuationSpec(
            n_per_class=args.n_per_class,
            acoustic_snr_db=args.snr_db if args.snr_db is not None else 30.0,
            eeg_snr_db=args.eeg_snr_db if args.eeg_snr_db is not None else 25.0,
            seed=seed,
        )
        sequences = synth.generate_continuation_corpus(spec)
    else:
        spec = synth.CorpusSpec(
            n_sequences=args.n_sequences,
            duration_s=args.duration_s,
            speech_duty=args.duty,
            mean_segment_s=args.mean_segment_s,
            acoustic_snr_db=args.snr_db if args.snr_db is not None else 20.0,
            eeg_snr_db=args.eeg_snr_db if args.eeg_snr_db is not None else 20.0,
            seed=seed,
        )
        sequences = synth.generate_corpus(spec)
    synth.save_corpus(sequences, spec, args.out, kind=args.kind)
    print(f"wrote {len(sequences)} sequences to {args.out}")
    return 0


def _cmd_features(args) -> int:
    config = _experiment_config(args)
    manifest, sequences = synth.load_corpus(args.corpus)
    prepared = harness.prepare_sequences(sequences, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for i, prep in enumerate(prepared):
        sid = f"seq{i:04d}"
        entry: dict = {"id": sid}
        if prep.mfcc is not None:
            save_frames(prep.mfcc, out / f"{sid}_mfcc.fseq")
            entry["mfcc"] = f"{sid}_mfcc.fseq"
        if prep.eeg_stats is not None:
            save_frames(prep.eeg_stats, out / f"{sid}_eeg.fseq")
            entry["eeg"] = f"{sid}_eeg.fseq"
        entry["frame_labels"] = prep.frame_labels.tolist()
        if prep.sequence_label is not None:
            entry["label"] = int(prep.sequence_label)
        index.append(entry)
    (out / "index.json").write_text(
        json.dumps({"feature_mode": config.feature_mode, "sequences": index},
                   sort_keys=True, separators=(",", ":")) + "\n"
    )
    print(f"wrote features for {len(prepared)} sequences to {out}")
    return 0


def _cmd_kpca_fit(args) -> int:
    index = json.loads((Path(args.features) / "index.json").read_text())
    rows = []
    for entry in index["sequences"]:
        if "eeg" not in entry:
            raise ValueError("feature directory holds no EEG statistics files")
        rows.append(load_frames(Path(args.features) / entry["eeg"]).data)
    stacked = np.concatenate(rows)
    seed = args.seed if args.seed is not None else 0
    fit_rows = kpca.subsample_rows(stacked, args.max_fit_frames, seed=(seed, 44))
    model = kpca.fit_kpca(fit_rows, args.dim, kpca.KernelParams())
    kpca.save_kpca(model, args.out)
    print(f"fitted kpca on {fit_rows.shape[0]} frames -> {model.out_dim} dims: {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _experiment_config(args, task=args.task)
    if args.task == "continuation":
        report = harness.run_continuation_experiment(config)
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        row = harness.run_vad_experiment(config)
        print(harness.results_csv([row]), end="")
    return 0


def _cmd_eval(args) -> int:
    ckpt = models.load_checkpoint(args.checkpoint)
    meta = ckpt.meta
    config = _experiment_config(args)
    config = replace(config, feature_mode=meta["feature_mode"], corpus_dir=args.corpus)
    if meta.get("seed") is not None:
        config = replace(config, train=replace(config.train, seed=int(meta["seed"])))
    kind = "continuation" if meta.get("task") == "continuation" else "vad"
    _, sequences = synth.load_corpus(args.corpus)
    prepared = harness.prepare_sequences(sequences, config)
    train_idx, val_idx, test_idx = harness.split_indices(len(prepared), config.train)
    kpca_model = kpca.load_kpca(args.kpca) if args.kpca else None
    if "eeg" in meta["feature_mode"] and kpca_model is None:
        raise ValueError("checkpoint uses EEG features; pass --kpca MODEL")
    reducers = harness.Reducers(
        kpca_model=kpca_model,
        eeg_mu=np.asarray(meta["eeg_stats_mu"]) if "eeg_stats_mu" in meta else None,
        eeg_sigma=np.asarray(meta["eeg_stats_sigma"]) if "eeg_stats_sigma" in meta else None,
        norm_mu=np.asarray(meta["norm_mu"]),
        norm_sigma=np.asarray(meta["norm_sigma"]),
    )
    net = ckpt.to_network()
    idx = np.arange(len(prepared)) if args.full_corpus else test_idx
    labeled = harness._labeled(prepared, idx, reducers, config,
                               per_frame=(kind == "vad"))
    loss, acc = models.evaluate(net, labeled)
    split_name = "all" if args.full_corpus else "test"
    print(f"{split_name} accuracy: {100.0 * acc:.4f}%  (loss {loss:.6f}, "
          f"{len(labeled)} sequences)")
    return 0


def _cmd_table(args) -> int:
    rows = []
    for path in sorted(Path(args.runs).rglob("results_row.csv")):
        lines = path.read_text().strip().splitlines()
        header = lines[0].split(",")
        for line in lines[1:]:
            cells = dict(zip(header, line.split(",")))
            cells["accuracy_pct"] = float(cells["accuracy_pct"])
            if cells.get("seed"):
                cells["seed"] = int(cells["seed"])
            rows.append(cells)
    if not rows:
        raise ValueError(f"no results_row.csv files under {args.runs}")
    csv_text = harness.results_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    print(harness.format_results_table(rows), end="")
    return 0


def _cmd_variance_curve(args) -> int:
    model = kpca.load_kpca(args.kpca)
    harness.emit_variance_curve(model, args.out)
    print(f"wrote explained-variance curve ({model.eigenvalues.size} components) to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    config = _experiment_config(args)
    spec = synth.CorpusSpec(
        n_sequences=args.n_sequences,
        duration_s=args.duration_s,
        acoustic_snr_db=0.0,
        eeg_snr_db=args.eeg_snr_db if args.eeg_snr_db is not None else 20.0,
        seed=config.train.seed,
    )
    config = replace(config, corpus_spec=spec, corpus_dir=None)
    snrs = [float(v) for v in args.snr_list.split(",")]
    modes = args.modes.split(",")
    seeds = [int(v) for v in args.seeds.split(",")]
    rows = harness.run_sweep(config, snrs, modes, seeds)
    medians = harness.median_by_cell(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cell_rows = []
    for (snr, mode), acc in sorted(medians.items()):
        cell_rows.append({"corpus": f"snr{snr:+g}dB", "feature_mode": mode,
                          "accuracy_pct": acc, "seed": "", "epochs_trained": "",
                          "best_epoch": ""})
    (out / "sweep_cells.csv").write_text(harness.results_csv(rows))
    (out / "sweep_medians.csv").write_text(harness.results_csv(cell_rows))
    print(harness.format_results_table(cell_rows), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegvad",
        description="Voice-activity and continuation-intent experiments on paired audio/EEG corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, corpus=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="master seed")
        if corpus:
            p.add_argument("--corpus", help="corpus directory")

    p = sub.add_parser("synth", help="generate a synthetic paired corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=["vad", "continuation"], default="vad")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-sequences", type=int, default=20)
    p.add_argument("--duration-s", type=float, default=10.0)
    p.add_argument("--duty", type=float, default=0.5)
    p.add_argument("--mean-segment-s", type=float, default=2.0)
    p.add_argument("--snr-db", type=float, default=None, help="acoustic SNR in dB")
    p.add_argument("--eeg-snr-db", type=float, default=None)
    p.add_argument("--n-per-class", type=int, default=50)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("features", help="extract per-sequence feature files")
    common(p)
    p.add_argument("--feature-mode", choices=list(harness.FEATURE_MODES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("kpca-fit", help="fit kernel PCA on extracted EEG statistics")
    p.add_argument("--features", required=True, help="directory written by `features`")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=30)
    p.add_argument("--max-fit-frames", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_kpca_fit)

    p = sub.add_parser("train", help="run a full experiment (train + test evaluation)")
    common(p)
    p.add_argument("--task", choices=["vad", "continuation"], default="vad")
    p.add_argument("--feature-mode", choices=list(harness.FEATURE_MODES))
    p.add_argument("--variant", choices=sorted(models.VARIANTS))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--out", help="artifact directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint on a corpus")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--kpca", help="kpca model file for EEG feature modes")
    p.add_argument("--full-corpus", action="store_true",
                   help="evaluate every sequence instead of the test split")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("table", help="merge results rows into one accuracy table")
    p.add_argument("--runs", required=True, help="directory tree holding results_row.csv files")
    p.add_argument("--out", help="write merged CSV here")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("variance-curve", help="emit the cumulative explained-variance CSV")
    p.add_argument("--kpca", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_variance_curve)

    p = sub.add_parser("sweep", help="acoustic-SNR robustness sweep")
    common(p, corpus=False)
    p.add_argument("--out", required=True)
    p.add_argument("--snr-list", default="20,0,-10")
    p.add_argument("--modes", default="mfcc,eeg,mfcc+eeg")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--n-sequences", type=int, default=12)
    p.add_argument("--duration-s", type=float, default=6.0)
    p.add_argument("--eeg-snr-db", type=float, default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--feature-mode", choices=list(harness.FEATURE_MODES))
    p.add_argument("--variant", choices=sorted(models.VARIANTS))
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, OSError, RuntimeError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
