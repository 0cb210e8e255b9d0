"""Representation-degeneration diagnostics: singular spectrum, 2-D SVD
projection and the mean pairwise distance of normalized embeddings."""

from __future__ import annotations

import warnings

import numpy as np

from . import kernels

EXACT_UNIFORMITY_MAX = 2000
SAMPLED_PAIRS = 1_000_000


def singular_spectrum(emb, center: bool = True) -> np.ndarray:
    """Singular values in descending order divided by the largest one."""
    x = np.asarray(emb, dtype=np.float64)
    if center:
        x = x - x.mean(axis=0)
    s = np.linalg.svd(x, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        raise ValueError("singular spectrum of a zero matrix is undefined")
    return s / s[0]


def project_2d(emb, center: bool = True) -> np.ndarray:
    """Coordinates along the top two right-singular directions.

    Each direction's sign is fixed so that its largest-magnitude component
    is positive; flipping the input's sign therefore flips the output sign.
    """
    x = np.asarray(emb, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("need at least two embedding dimensions")
    if center:
        x = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(x, full_matrices=False)
    basis = vt[:2].copy()
    for r in range(2):
        if basis[r, np.argmax(np.abs(basis[r]))] < 0:
            basis[r] = -basis[r]
    return x @ basis.T


def _normalized_rows(x):
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0
    if zero.any():
        warnings.warn(f"skipping {int(zero.sum())} zero rows in uniformity", RuntimeWarning)
    return x[~zero] / norms[~zero, None]


def uniformity(emb, seed: int = 0, exact_max: int = EXACT_UNIFORMITY_MAX,
               num_pairs: int = SAMPLED_PAIRS) -> float:
    """Mean L2 distance between unit-normalized rows over all unordered pairs.

    Larger means more spread out. Above ``exact_max`` rows the mean is
    estimated from ``num_pairs`` seeded random pairs.
    """
    u = _normalized_rows(np.asarray(emb, dtype=np.float64))
    n = u.shape[0]
    if n < 2:
        raise ValueError("uniformity needs at least two nonzero rows")
    if n <= exact_max:
        return kernels.mean_pair_distance(u)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, num_pairs)
    j = rng.integers(0, n - 1, num_pairs)
    j = j + (j >= i)  # distinct partner, uniform over the other n-1 rows
    diff = u[i] - u[j]
    return float(np.mean(np.sqrt(np.einsum("ij,ij->i", diff, diff))))
