"""Graph Fourier analysis: eigendecomposition, GFT, frequency histograms,
filter kernel responses and Dirichlet smoothness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SparseSymMatrix

MAX_DENSE_N = 3000
LAMBDA_MAX = 2.0


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues and column-orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self):
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class FrequencyHistogram:
    bucket_edges: np.ndarray
    mass: np.ndarray
    zero_signal: bool = False


def sym_eigendecompose(m, max_n: int = MAX_DENSE_N) -> Spectrum:
    """Full eigendecomposition of a symmetric matrix (dense LAPACK path).

    Eigenvalues in ``[-1e-10, 0)`` are clamped to exactly zero.
    """
    dense = m.to_dense() if isinstance(m, SparseSymMatrix) else np.asarray(m, dtype=np.float64)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise SpectralError(f"expected a square matrix, got {dense.shape}")
    n = dense.shape[0]
    if n > max_n:
        raise SpectralError(f"n={n} exceeds the dense eigensolver cap ({max_n}); subsample the graph")
    if not np.allclose(dense, dense.T, rtol=0.0, atol=1e-12):
        raise SpectralError("matrix is not symmetric")
    try:
        vals, vecs = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver did not converge: {exc}") from exc
    vals = np.where((vals < 0) & (vals >= -1e-10), 0.0, vals)
    return Spectrum(vals, vecs)


def graph_fourier_transform(s: Spectrum, x) -> np.ndarray:
    """Coefficients ``f(lambda_l) = sum_i x(i) e_l(i)``, i.e. ``E^T x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != s.n:
        raise SpectralError(f"signal length {x.shape[0]} != spectrum size {s.n}")
    return s.eigenvectors.T @ x


def inverse_graph_fourier_transform(s: Spectrum, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != s.n:
        raise SpectralError(f"coefficient length {f.shape[0]} != spectrum size {s.n}")
    return s.eigenvectors @ f


def frequency_histogram(s: Spectrum, x, buckets: int = 10,
                        mode: str = "energy") -> FrequencyHistogram:
    """Normalized spectral mass per uniform bucket of [0, 2].

    ``mode="energy"`` accumulates ``f(lambda)^2``; ``mode="amplitude"``
    accumulates ``|f(lambda)|``. The last bucket is closed and values that
    numerically fall outside [0, 2] land in the end buckets.
    """
    if mode not in ("energy", "amplitude"):
        raise ValueError(f"unknown histogram mode {mode!r}")
    f = graph_fourier_transform(s, x)
    weight = f * f if mode == "energy" else np.abs(f)
    edges = np.linspace(0.0, LAMBDA_MAX, buckets + 1)
    idx = np.floor(s.eigenvalues / LAMBDA_MAX * buckets).astype(np.int64)
    idx = np.clip(idx, 0, buckets - 1)
    mass = np.bincount(idx, weights=weight, minlength=buckets)
    total = mass.sum()
    if total <= 0.0:
        return FrequencyHistogram(edges, np.zeros(buckets), zero_signal=True)
    return FrequencyHistogram(edges, mass / total)


def mean_frequency(s: Spectrum, x) -> float:
    """Energy-weighted mean eigenvalue ``sum lambda f^2 / sum f^2``."""
    f = graph_fourier_transform(s, x)
    energy = f * f
    total = energy.sum()
    if total <= 0.0:
        return float("nan")
    return float(np.dot(s.eigenvalues, energy) / total)


def lgf_kernel_response(lam, k: int = 1):
    """Gain ``(1 - lambda)^K`` of K stacked low-pass propagation layers."""
    if k < 1:
        raise ValueError("layer count must be >= 1")
    return (1.0 - np.asarray(lam, dtype=np.float64)) ** k


def hgf_kernel_response(lam, k: int = 1):
    """Gain ``lambda^K`` of K stacked high-pass layers."""
    if k < 1:
        raise ValueError("layer count must be >= 1")
    return np.asarray(lam, dtype=np.float64) ** k


def kernel_response_table(k: int, step: float = 0.01):
    """Rows of (lambda, lgf_gain, hgf_gain) sampled on [0, 2]."""
    lam = np.round(np.arange(0.0, LAMBDA_MAX + step / 2, step), 10)
    return np.column_stack([lam, lgf_kernel_response(lam, k), hgf_kernel_response(lam, k)])


def smoothness(a: SparseSymMatrix, x) -> float:
    """Dirichlet energy ``sum_{(i,j) in E} A_ij (x_i - x_j)^2 = x^T (D - A) x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != a.n:
        raise SpectralError(f"signal length {x.shape[0]} != graph size {a.n}")
    rows = a.row_ids()
    diff = x[rows] - x[a.indices]
    return 0.5 * float(np.dot(a.data, diff * diff))
