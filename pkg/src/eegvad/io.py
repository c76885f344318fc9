"""File formats: raw float32 signals with JSON sidecars, header+block binaries, WAV."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signals import TimeSeries

_DTYPES = {"<f4": np.dtype("<f4"), "<i4": np.dtype("<i4")}


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def save_timeseries(ts: TimeSeries, path: str | Path) -> None:
    """Write little-endian float32 samples (row-major, channel by channel) plus a JSON sidecar."""
    path = Path(path)
    ts.data.astype("<f4").tofile(path)
    header = {
        "channels": ts.n_channels,
        "samples": ts.n_samples,
        "sample_rate_hz": ts.sample_rate_hz,
        "channel_names": list(ts.channel_names),
    }
    sidecar_path(path).write_text(_dumps(header) + "\n")


def load_timeseries(path: str | Path) -> TimeSeries:
    header = json.loads(sidecar_path(path).read_text())
    raw = np.fromfile(Path(path), dtype="<f4")
    n_ch, n_s = int(header["channels"]), int(header["samples"])
    if raw.size != n_ch * n_s:
        raise ValueError(
            f"{path}: expected {n_ch}x{n_s} samples, file holds {raw.size}"
        )
    data = raw.astype(np.float64).reshape(n_ch, n_s)
    return TimeSeries(data, float(header["sample_rate_hz"]), tuple(header["channel_names"]))


def load_wav(path: str | Path) -> TimeSeries:
    """Read a mono 16-bit PCM WAV file, scaled to [-1, 1)."""
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got {data.ndim} channels")
    if data.dtype != np.int16:
        raise ValueError(f"{path}: expected 16-bit PCM samples, got {data.dtype}")
    return TimeSeries(data.astype(np.float64) / 32768.0, float(rate), ("audio",))


def write_blocks(path: str | Path, header: dict, blocks: dict[str, np.ndarray]) -> None:
    """Single-file format: one JSON header line, then the binary blocks in order.

    The header gains a "blocks" entry listing (name, shape, dtype) so the
    reader can split the payload; block dtype is little-endian float32 unless
    the array is integer, which is stored as little-endian int32.
    """
    manifest = []
    payload = []
    for name, arr in blocks.items():
        arr = np.asarray(arr)
        code = "<i4" if np.issubdtype(arr.dtype, np.integer) else "<f4"
        manifest.append([name, list(arr.shape), code])
        payload.append(np.ascontiguousarray(arr.astype(_DTYPES[code])).tobytes())
    header = dict(header)
    header["blocks"] = manifest
    with open(path, "wb") as fh:
        fh.write(_dumps(header).encode("utf-8") + b"\n")
        for chunk in payload:
            fh.write(chunk)


def read_blocks(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    blocks: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape, code in header["blocks"]:
        dtype = _DTYPES[code]
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * dtype.itemsize
        if end > len(raw):
            raise ValueError(f"{path}: truncated block {name!r}")
        blocks[name] = np.frombuffer(raw[offset:end], dtype=dtype).reshape(shape).copy()
        offset = end
    return header, blocks
