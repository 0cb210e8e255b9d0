"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``DFGNN_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("DFGNN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def csr_spmm(indptr, indices, data, x):
    """Sparse (CSR) times dense product with fixed per-row accumulation order."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _impl.csr_spmm(indptr, indices, data, x)


def mean_pair_distance(u):
    """Mean L2 distance over all unordered pairs of rows of ``u``."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    return float(_impl.mean_pair_distance(u))


def mf_sgd_epoch(users, items, target, order, pu, qi, lr, reg):
    """One in-place SGD pass of scalar factorization, visiting ``order``."""
    _impl.mf_sgd_epoch(users, items, target, order, pu, qi, float(lr), float(reg))


def backends():
    """Map backend name to module, for benchmarks and cross-checks."""
    out = {"python": _kernels_py}
    if BACKEND == "cython":
        out["cython"] = _impl
    return out
