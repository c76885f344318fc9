"""Classifier architectures, corpus splitting, the training loop, and checkpoints.

Two per-frame speech/silence variants and one sequence-level intent
classifier, all trained with Adam on categorical cross-entropy. Training
math stays in double precision; checkpoints are stored float32, and the
returned checkpoint always holds the best-validation parameters.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as evio
from . import nn
from .frames import FrameSequence

VARIANTS = {
    "dataset1": {"gru_sizes": (128, 32, 8), "td_activation": "sigmoid"},
    "dataset2": {"gru_sizes": (128, 64, 32), "td_activation": "relu"},
}
CONTINUATION_GRU_SIZES = (64, 32)
N_CONTINUATION_CLASSES = 4

_INIT_STREAM = 11
_TRAIN_STREAM = 22
_SPLIT_STREAM = 33


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 1
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    early_stopping: bool = False
    patience: int = 20
    clip_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        fr = tuple(float(v) for v in self.split)
        if len(fr) != 3 or any(v <= 0 for v in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")
        self.split = fr


@dataclass
class LabeledSequence:
    """One training example: features plus per-frame or per-sequence labels."""

    features: FrameSequence
    frame_labels: np.ndarray | None = None
    sequence_label: int | None = None

    def __post_init__(self):
        if self.frame_labels is None and self.sequence_label is None:
            raise ValueError("a labeled sequence needs frame labels or a sequence label")
        if self.frame_labels is not None:
            lab = np.asarray(self.frame_labels, dtype=np.int64)
            if lab.shape != (self.features.n_frames,):
                raise ValueError(
                    f"label count {lab.shape} does not match {self.features.n_frames} frames"
                )
            self.frame_labels = lab


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels out of range [0, {n_classes})")
    return np.eye(n_classes)[labels]


def _targets(seq: LabeledSequence, n_classes: int) -> np.ndarray:
    if seq.frame_labels is not None:
        return one_hot(seq.frame_labels, n_classes)
    return one_hot(np.array([seq.sequence_label]), n_classes)


def build_vad(variant: str, input_dim: int, seed: int = 0, dropout: float = 0.2) -> nn.Network:
    """Per-frame speech/silence classifier: three GRUs, a 4-unit
    time-distributed dense, then a 2-unit affine head (softmax in the loss)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
    if input_dim < 1:
        raise ValueError(f"invalid input dim {input_dim}")
    sizes = VARIANTS[variant]["gru_sizes"]
    act = VARIANTS[variant]["td_activation"]
    rng = np.random.default_rng((seed, _INIT_STREAM))
    layers: list = []
    prev = input_dim
    for size in sizes:
        layers.append(nn.GruLayer(prev, size, rng))
        layers.append(nn.Dropout(dropout))
        prev = size
    layers.append(nn.Dense(prev, 4, act, rng))
    layers.append(nn.Dense(4, 2, "identity", rng))
    return nn.Network(layers)


def build_continuation(input_dim: int, seed: int = 0, dropout: float = 0.2) -> nn.Network:
    """Sequence-level intent classifier: GRU(64) -> GRU(32) -> last step -> 4-way head."""
    if input_dim < 1:
        raise ValueError(f"invalid input dim {input_dim}")
    rng = np.random.default_rng((seed, _INIT_STREAM))
    s1, s2 = CONTINUATION_GRU_SIZES
    return nn.Network(
        [
            nn.GruLayer(input_dim, s1, rng),
            nn.Dropout(dropout),
            nn.GruLayer(s1, s2, rng),
            nn.Dropout(dropout),
            nn.LastStep(),
            nn.Dense(s2, N_CONTINUATION_CLASSES, "identity", rng),
        ]
    )


def split_corpus(
    sequences: list, config: TrainConfig
) -> tuple[list, list, list]:
    """Seeded shuffle, then split whole sequences near the configured fractions."""
    n = len(sequences)
    if n < 10:
        raise ValueError(f"too few sequences: need >= 10, got {n}")
    rng = np.random.default_rng((config.seed, _SPLIT_STREAM))
    perm = rng.permutation(n)
    n_val = max(1, int(n * config.split[1] + 0.5))
    n_test = max(1, int(n * config.split[2] + 0.5))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ValueError("split leaves no training sequences")
    train = [sequences[i] for i in perm[:n_train]]
    val = [sequences[i] for i in perm[n_train : n_train + n_val]]
    test = [sequences[i] for i in perm[n_train + n_val :]]
    return train, val, test


def predict_frames(net: nn.Network, features: FrameSequence | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame class and probabilities; argmax ties resolve to the lowest class."""
    x = features.data if isinstance(features, FrameSequence) else np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim():
        raise ValueError(
            f"dimension mismatch: network expects {net.input_dim()}-dim frames, got {x.shape}"
        )
    probs = nn.softmax(net.forward(x, train=False))
    return probs.argmax(axis=1), probs


def accuracy(predictions, truth) -> float:
    """Fraction of matching entries."""
    p = np.asarray(predictions)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("empty prediction list")
    return float(np.mean(p == t))


def evaluate(net: nn.Network, sequences: list[LabeledSequence]) -> tuple[float, float]:
    """Mean per-sequence loss and pooled accuracy (frames for per-frame labels,
    one prediction per sequence otherwise)."""
    n_classes = net.output_dim()
    losses = []
    hits = 0
    total = 0
    for seq in sequences:
        targets = _targets(seq, n_classes)
        logits = net.forward(seq.features.data, train=False)
        probs = nn.softmax(logits)
        losses.append(nn.cross_entropy(probs, targets))
        pred = probs.argmax(axis=1)
        truth = targets.argmax(axis=1)
        hits += int(np.sum(pred == truth))
        total += len(truth)
    return float(np.mean(losses)), hits / total


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class Checkpoint:
    """Rebuildable network state: layer descriptions plus float32 parameters."""

    layer_specs: list[dict]
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def to_network(self) -> nn.Network:
        net = network_from_specs(self.layer_specs)
        live = net.parameters()
        for key, value in self.params.items():
            live[key][:] = value.astype(np.float64)
        return net


def layer_from_spec(spec: dict, rng: np.random.Generator):
    kind = spec["kind"]
    if kind == "gru":
        return nn.GruLayer(spec["input_size"], spec["hidden_size"], rng)
    if kind == "dropout":
        return nn.Dropout(spec["rate"])
    if kind == "dense":
        return nn.Dense(spec["input_size"], spec["output_size"], spec["activation"], rng)
    if kind == "last_step":
        return nn.LastStep()
    raise ValueError(f"unknown layer kind {kind!r}")


def network_from_specs(specs: list[dict]) -> nn.Network:
    rng = np.random.default_rng(0)
    return nn.Network([layer_from_spec(s, rng) for s in specs])


def checkpoint_from_network(net: nn.Network, meta: dict | None = None) -> Checkpoint:
    return Checkpoint(
        layer_specs=[layer.spec() for layer in net.layers],
        params={k: v.astype(np.float32) for k, v in net.parameters().items()},
        meta=dict(meta or {}),
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    header = {
        "kind": "network",
        "layers": ckpt.layer_specs,
        "meta": ckpt.meta,
        "param_order": list(ckpt.params.keys()),
    }
    evio.write_blocks(path, header, ckpt.params)


def load_checkpoint(path: str | Path) -> Checkpoint:
    header, blocks = evio.read_blocks(path)
    if header.get("kind") != "network":
        raise ValueError(f"{path}: not a network checkpoint")
    params = {k: blocks[k] for k in header["param_order"]}
    return Checkpoint(header["layers"], params, header.get("meta", {}))


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochStats]
    best_epoch: int


def _snapshot(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def train(
    net: nn.Network,
    train_seqs: list[LabeledSequence],
    val_seqs: list[LabeledSequence],
    config: TrainConfig,
    meta: dict | None = None,
) -> TrainResult:
    """Adam training over whole sequences.

    batch_size = 1 updates after every sequence; larger batches average the
    per-sequence gradients before one update, which treats a padded batch and
    its masked steps exactly as if each sequence ran at its true length.
    Tracks validation loss each epoch and returns the best-validation
    parameters; optional early stopping monitors the same quantity.
    """
    if not train_seqs or not val_seqs:
        raise ValueError("training and validation sets must be nonempty")
    n_classes = net.output_dim()
    params = net.parameters()
    adam = nn.Adam(params, lr=config.learning_rate, beta1=config.beta1,
                   beta2=config.beta2, epsilon=config.epsilon)
    rng = np.random.default_rng((config.seed, _TRAIN_STREAM))

    best_params = _snapshot(params)
    best_val = np.inf
    best_epoch = 0
    history: list[EpochStats] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_seqs))
        epoch_losses = []
        try:
            for start in range(0, len(order), config.batch_size):
                batch = order[start : start + config.batch_size]
                total = nn.zeros_like_params(params)
                for idx in batch:
                    seq = train_seqs[idx]
                    loss, grads = nn.loss_and_gradients(
                        net, seq.features.data, _targets(seq, n_classes), train=True, rng=rng
                    )
                    epoch_losses.append(loss)
                    nn.accumulate(total, grads, scale=1.0 / len(batch))
                if config.clip_norm is not None:
                    total = nn.clip_gradients(total, config.clip_norm)
                adam.update(params, total)

            train_loss = float(np.mean(epoch_losses))
            val_loss, val_acc = evaluate(net, val_seqs)
        except ValueError as exc:
            if "non-finite" in str(exc):
                raise RuntimeError(f"divergence: non-finite loss at epoch {epoch}") from exc
            raise
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise RuntimeError(f"divergence: non-finite loss at epoch {epoch}")
        history.append(EpochStats(epoch, train_loss, val_loss, val_acc))

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = _snapshot(params)
        elif config.early_stopping and epoch - best_epoch > config.patience:
            break

    for k in params:
        params[k][:] = best_params[k]
    ckpt_meta = dict(meta or {})
    ckpt_meta.update({"seed": config.seed, "epoch": best_epoch})
    return TrainResult(checkpoint_from_network(net, ckpt_meta), history, best_epoch)


def history_csv(history: list[EpochStats]) -> str:
    lines = ["epoch,train_loss,val_loss,val_accuracy"]
    for s in history:
        lines.append(f"{s.epoch},{s.train_loss:.10g},{s.val_loss:.10g},{s.val_accuracy:.10g}")
    return "\n".join(lines) + "\n"


def compute_norm_stats(frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and std (floored at 1e-8) for input standardization."""
    mu = frames.mean(axis=0)
    sigma = np.maximum(frames.std(axis=0), 1e-8)
    return mu, sigma


def apply_norm(seq: FrameSequence, mu: np.ndarray, sigma: np.ndarray) -> FrameSequence:
    return FrameSequence(
        (seq.data - mu) / sigma, seq.frame_rate_hz, seq.layout, seq.labels
    )
