"""Per-frame feature sequences at the shared analysis rate."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as evio


@dataclass
class FrameSequence:
    """Matrix of per-frame feature vectors plus optional per-frame labels.

    data is (n_frames, dim); frame k starts at time k / frame_rate_hz.
    """

    data: np.ndarray
    frame_rate_hz: float
    layout: str = ""
    labels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"frame data must be 2-D, got ndim={arr.ndim}")
        if not self.frame_rate_hz > 0:
            raise ValueError(f"frame_rate_hz must be > 0, got {self.frame_rate_hz}")
        self.data = arr
        self.frame_rate_hz = float(self.frame_rate_hz)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (arr.shape[0],):
                raise ValueError(
                    f"labels shape {lab.shape} does not match {arr.shape[0]} frames"
                )
            self.labels = lab

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        """Window start time of each frame, in seconds."""
        return np.arange(self.n_frames) / self.frame_rate_hz

    def truncated(self, n: int) -> "FrameSequence":
        lab = None if self.labels is None else self.labels[:n]
        return FrameSequence(self.data[:n], self.frame_rate_hz, self.layout, lab)


def save_frames(frames: FrameSequence, path: str | Path) -> None:
    header = {
        "frame_rate_hz": frames.frame_rate_hz,
        "dim": frames.dim,
        "count": frames.n_frames,
        "layout": frames.layout,
    }
    blocks = {"data": frames.data}
    if frames.labels is not None:
        blocks["labels"] = frames.labels
    evio.write_blocks(path, header, blocks)


def load_frames(path: str | Path) -> FrameSequence:
    header, blocks = evio.read_blocks(path)
    labels = blocks.get("labels")
    return FrameSequence(
        blocks["data"].astype(np.float64),
        float(header["frame_rate_hz"]),
        header.get("layout", ""),
        labels,
    )
