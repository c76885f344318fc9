"""Kernel PCA with a degree-3 polynomial kernel for EEG feature denoising.

Fits on a (possibly subsampled) training matrix, double-centers the Gram
matrix, and keeps the leading eigenpairs scaled so that projecting is a
plain dot product against centered kernel rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as evio
from .frames import FrameSequence


@dataclass(frozen=True)
class KernelParams:
    degree: int = 3
    gamma: float | None = None  # None -> 1 / input_dim at fit time
    coef0: float = 1.0

    def resolved_gamma(self, dim: int) -> float:
        return self.gamma if self.gamma is not None else 1.0 / dim


def polynomial_kernel(x: np.ndarray, y: np.ndarray, params: KernelParams, dim: int | None = None) -> float:
    """(gamma <x, y> + coef0) ** degree for two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    gamma = params.resolved_gamma(dim if dim is not None else x.shape[0])
    return float((gamma * np.dot(x, y) + params.coef0) ** params.degree)


def _kernel_matrix(a: np.ndarray, b: np.ndarray, params: KernelParams) -> np.ndarray:
    gamma = params.resolved_gamma(a.shape[1])
    return (gamma * (a @ b.T) + params.coef0) ** params.degree


@dataclass
class KpcaModel:
    """Fitted state: training vectors, Gram centering statistics, eigenpairs.

    components holds alpha / sqrt(lambda) columns, so transform is
    centered_kernel_rows @ components. eigenvalues is the full clamped
    spectrum (descending) for the explained-variance curve.
    """

    training_vectors: np.ndarray
    params: KernelParams
    row_means: np.ndarray
    grand_mean: float
    eigenvalues: np.ndarray
    components: np.ndarray
    out_dim: int

    @property
    def n_train(self) -> int:
        return self.training_vectors.shape[0]

    @property
    def input_dim(self) -> int:
        return self.training_vectors.shape[1]


def _as_matrix(features: FrameSequence | np.ndarray) -> np.ndarray:
    if isinstance(features, FrameSequence):
        return features.data
    return np.asarray(features, dtype=np.float64)


def fit_kpca(
    features: FrameSequence | np.ndarray,
    out_dim: int = 30,
    params: KernelParams | None = None,
) -> KpcaModel:
    """Fit on N training vectors; keeps the top out_dim positive eigenpairs.

    The N x N Gram matrix is double-centered and eigendecomposed with a dense
    symmetric solver; eigenvalues below numerical noise are clamped to zero
    and never used as components.
    """
    params = params or KernelParams()
    x = _as_matrix(features)
    n = x.shape[0]
    if not np.isfinite(x).all():
        raise ValueError("non-finite input: training vectors must be finite")
    if n < out_dim + 1:
        raise ValueError(f"insufficient samples: need N >= out_dim + 1, got N={n}, out_dim={out_dim}")

    k = _kernel_matrix(x, x, params)
    row_means = k.mean(axis=1)
    grand_mean = float(row_means.mean())
    kc = k - row_means[:, None] - row_means[None, :] + grand_mean

    eigvals, eigvecs = np.linalg.eigh(kc)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    eigvals = np.where(eigvals > 0.0, eigvals, 0.0)

    tol = max(eigvals[0], 0.0) * 1e-12
    rank = int(np.count_nonzero(eigvals > tol))
    if rank == 0:
        raise ValueError("insufficient rank: centered kernel matrix has no positive eigenvalues")
    k_eff = min(out_dim, rank)
    components = eigvecs[:, :k_eff] / np.sqrt(eigvals[:k_eff])

    return KpcaModel(
        training_vectors=x.copy(),
        params=params,
        row_means=row_means,
        grand_mean=grand_mean,
        eigenvalues=eigvals,
        components=components,
        out_dim=k_eff,
    )


def transform(model: KpcaModel, features: FrameSequence | np.ndarray, chunk: int = 2048):
    """Project vectors onto the fitted components.

    Each row's kernel vector against the training set is centered with the
    stored statistics and multiplied into the scaled eigenvectors. Returns a
    FrameSequence when given one (rate and labels preserved), else an array.
    """
    x = _as_matrix(features)
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"dimension mismatch: model fitted on {model.input_dim}-dim vectors, got {x.shape[1]}"
        )
    out = np.empty((x.shape[0], model.out_dim))
    for start in range(0, x.shape[0], chunk):
        rows = x[start : start + chunk]
        k = _kernel_matrix(rows, model.training_vectors, model.params)
        kc = k - k.mean(axis=1, keepdims=True) - model.row_means[None, :] + model.grand_mean
        out[start : start + chunk] = kc @ model.components
    if isinstance(features, FrameSequence):
        return FrameSequence(
            out, features.frame_rate_hz, layout=f"kpca:{model.out_dim}", labels=features.labels
        )
    return out


def explained_variance_curve(model: KpcaModel) -> np.ndarray:
    """Cumulative eigenvalue mass: c_k = sum(lambda_1..k) / sum(all lambda)."""
    total = model.eigenvalues.sum()
    if total <= 0.0:
        raise ValueError("all-zero spectrum: explained variance undefined")
    return np.cumsum(model.eigenvalues) / total


def subsample_rows(x: np.ndarray, max_rows: int, seed: int) -> np.ndarray:
    """Uniform seeded subsample without replacement; identity when small enough."""
    if x.shape[0] <= max_rows:
        return x
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(x.shape[0], size=max_rows, replace=False))
    return x[idx]


def save_kpca(model: KpcaModel, path: str | Path) -> None:
    header = {
        "kind": "kpca",
        "degree": model.params.degree,
        "gamma": model.params.resolved_gamma(model.input_dim),
        "coef0": model.params.coef0,
        "n_train": model.n_train,
        "input_dim": model.input_dim,
        "out_dim": model.out_dim,
        "grand_mean": model.grand_mean,
    }
    evio.write_blocks(
        path,
        header,
        {
            "training_vectors": model.training_vectors,
            "row_means": model.row_means,
            "eigenvalues": model.eigenvalues,
            "components": model.components,
        },
    )


def load_kpca(path: str | Path) -> KpcaModel:
    header, blocks = evio.read_blocks(path)
    if header.get("kind") != "kpca":
        raise ValueError(f"{path}: not a kpca model file")
    params = KernelParams(int(header["degree"]), float(header["gamma"]), float(header["coef0"]))
    return KpcaModel(
        training_vectors=blocks["training_vectors"].astype(np.float64),
        params=params,
        row_means=blocks["row_means"].astype(np.float64),
        grand_mean=float(header["grand_mean"]),
        eigenvalues=blocks["eigenvalues"].astype(np.float64),
        components=blocks["components"].astype(np.float64),
        out_dim=int(header["out_dim"]),
    )
