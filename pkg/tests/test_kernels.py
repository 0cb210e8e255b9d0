import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfgnn import kernels
from dfgnn import _kernels_py
from dfgnn.graph import SparseSymMatrix

BACKENDS = kernels.backends()


def test_backend_selection():
    if os.environ.get("DFGNN_PURE_PYTHON") == "1":
        assert kernels.BACKEND == "python" and set(BACKENDS) == {"python"}
    else:
        # the package is built with its extension in this environment
        assert kernels.BACKEND == "cython"
        assert set(BACKENDS) == {"python", "cython"}


def random_csr(rng, n, density=0.2):
    m = np.triu(rng.normal(size=(n, n)) * (rng.random((n, n)) < density))
    m = m + np.triu(m, 1).T
    return m, SparseSymMatrix.from_dense(m)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 40), d=st.integers(1, 6), seed=st.integers(0, 9999))
def test_spmm_backend_vs_dense(name, n, d, seed):
    rng = np.random.default_rng(seed)
    dense, m = random_csr(rng, n)
    x = rng.normal(size=(n, d))
    out = BACKENDS[name].csr_spmm(m.indptr, m.indices, m.data, x)
    assert np.max(np.abs(out - dense @ x)) < 1e-12


def test_spmm_backends_bit_identical(rng):
    dense, m = random_csr(rng, 80, 0.1)
    x = rng.normal(size=(80, 16))
    outs = [b.csr_spmm(m.indptr, m.indices, m.data, x) for b in BACKENDS.values()]
    assert all(np.array_equal(outs[0], o) for o in outs[1:])


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_mean_pair_distance_vs_loop(name, rng):
    u = rng.normal(size=(30, 5))
    brute = np.mean([np.linalg.norm(u[i] - u[j]) for i in range(30) for j in range(i + 1, 30)])
    assert abs(BACKENDS[name].mean_pair_distance(u) - brute) < 1e-12


def test_mf_epoch_backends_agree(rng):
    m = 200
    users = rng.integers(0, 20, m)
    items = rng.integers(0, 15, m)
    target = rng.uniform(-2, 2, m)
    order = rng.permutation(m)
    results = []
    for b in BACKENDS.values():
        pu, qi = np.full(20, 0.1), np.full(15, -0.2)
        b.mf_sgd_epoch(users, items, target, order, pu, qi, 0.01, 0.02)
        results.append((pu, qi))
    for pu, qi in results[1:]:
        assert np.allclose(pu, results[0][0], rtol=0, atol=1e-13)
        assert np.allclose(qi, results[0][1], rtol=0, atol=1e-13)


def test_mf_epoch_single_update():
    pu, qi = np.array([0.5]), np.array([2.0])
    _kernels_py.mf_sgd_epoch(np.array([0]), np.array([0]), np.array([3.0]), np.array([0]),
                             pu, qi, 0.1, 0.0)
    # err = 3 - 1 = 2; p += 0.1*2*2*2, q += 0.1*2*2*0.5 (both from the old values)
    assert np.allclose([pu[0], qi[0]], [1.3, 2.2])
