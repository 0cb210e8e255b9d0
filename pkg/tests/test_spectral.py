import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfgnn.graph import SparseSymMatrix, build_graph, normalized_laplacian, sign_adjacency
from dfgnn.spectral import (SpectralError, Spectrum, frequency_histogram, graph_fourier_transform,
                            hgf_kernel_response, inverse_graph_fourier_transform,
                            kernel_response_table, lgf_kernel_response, mean_frequency,
                            smoothness, sym_eigendecompose)

from conftest import random_graph

K2 = build_graph(1, 1, [(0, 0, 1)])
K2_LAP = normalized_laplacian(sign_adjacency(K2, 1))


def charpoly_coeffs(m):
    """Faddeev-LeVerrier: coefficients of det(tI - M), leading 1."""
    n = m.shape[0]
    coeffs = [1.0]
    mk = np.zeros_like(m)
    for k in range(1, n + 1):
        mk = m @ mk + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(m @ mk) / k)
    return np.array(coeffs)


def test_k2_laplacian_spectrum():
    s = sym_eigendecompose(K2_LAP)
    assert np.allclose(s.eigenvalues, [0, 2], atol=1e-14)
    e0, e1 = s.eigenvectors[:, 0], s.eigenvectors[:, 1]
    assert abs(abs(e0 @ np.array([1, 1])) / np.sqrt(2) - 1) < 1e-12
    assert abs(abs(e1 @ np.array([1, -1])) / np.sqrt(2) - 1) < 1e-12


def test_identity_spectrum():
    s = sym_eigendecompose(SparseSymMatrix.identity(4))
    assert np.allclose(s.eigenvalues, 1.0)


def test_random_6x6_matches_charpoly_roots(rng):
    for _ in range(20):
        a = rng.normal(size=(6, 6))
        m = (a + a.T) / 2
        roots = np.sort(np.roots(charpoly_coeffs(m)).real)
        assert np.allclose(sym_eigendecompose(m).eigenvalues, roots, atol=1e-8)


def test_spectrum_contract(rng):
    for _ in range(10):
        g = random_graph(rng, 15, 15)
        lap = normalized_laplacian(sign_adjacency(g, 1))
        s = sym_eigendecompose(lap)
        dense = lap.to_dense()
        scale = max(1.0, np.linalg.norm(dense))
        for k in range(s.n):
            e = s.eigenvectors[:, k]
            assert np.linalg.norm(dense @ e - s.eigenvalues[k] * e) <= 1e-8 * scale
        assert np.max(np.abs(s.eigenvectors.T @ s.eigenvectors - np.eye(s.n))) <= 1e-8
        assert np.all(np.diff(s.eigenvalues) >= 0)
        assert s.eigenvalues.min() >= 0.0


def test_small_negative_eigenvalues_clamped():
    s = sym_eigendecompose(np.diag([-1e-12, 1.0]))
    assert s.eigenvalues[0] == 0.0
    s = sym_eigendecompose(np.diag([-1e-3, 1.0]))
    assert s.eigenvalues[0] == -1e-3


def test_eigendecompose_errors():
    with pytest.raises(SpectralError, match="symmetric"):
        sym_eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(SpectralError, match="cap"):
        sym_eigendecompose(np.eye(5), max_n=4)


def test_gft_k2_examples():
    s = sym_eigendecompose(K2_LAP)
    f = graph_fourier_transform(s, [1.0, 1.0])
    assert np.allclose(np.abs(f), [np.sqrt(2), 0], atol=1e-12)
    f = graph_fourier_transform(s, [1.0, -1.0])
    assert np.allclose(np.abs(f), [0, np.sqrt(2)], atol=1e-12)
    with pytest.raises(SpectralError):
        graph_fourier_transform(s, [1.0, 2.0, 3.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_gft_roundtrip_and_parseval(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 10, 10)
    s = sym_eigendecompose(normalized_laplacian(sign_adjacency(g, 1)))
    x = rng.normal(size=s.n)
    f = graph_fourier_transform(s, x)
    assert np.max(np.abs(inverse_graph_fourier_transform(s, f) - x)) <= 1e-10
    assert abs(np.linalg.norm(f) - np.linalg.norm(x)) <= 1e-10


def test_histogram_k2():
    s = sym_eigendecompose(K2_LAP)
    h = frequency_histogram(s, [1.0, 1.0])
    assert np.allclose(h.mass, [1] + [0] * 9, atol=1e-12)
    assert np.allclose(h.bucket_edges, np.linspace(0, 2, 11))
    h = frequency_histogram(s, [1.0, -1.0])
    assert np.allclose(h.mass, [0] * 9 + [1], atol=1e-12)


def test_histogram_zero_signal_flag():
    h = frequency_histogram(sym_eigendecompose(K2_LAP), [0.0, 0.0])
    assert h.zero_signal and not h.mass.any()


def test_histogram_amplitude_mode():
    s = Spectrum(np.array([0.1, 1.9]), np.eye(2))
    h = frequency_histogram(s, [3.0, -1.0], mode="amplitude")
    assert np.allclose(h.mass[[0, 9]], [0.75, 0.25])
    h = frequency_histogram(s, [3.0, -1.0])
    assert np.allclose(h.mass[[0, 9]], [0.9, 0.1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_histogram_normalized_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n = 8
    vals = np.sort(rng.uniform(0, 2, n))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    x = rng.normal(size=n)
    h = frequency_histogram(Spectrum(vals, q), x)
    assert abs(h.mass.sum() - 1) <= 1e-12
    perm = rng.permutation(n)
    h2 = frequency_histogram(Spectrum(vals[perm], q[:, perm]), x)
    assert np.allclose(h.mass, h2.mass, atol=1e-14)


def test_disassortative_signal_has_higher_frequency():
    # 20 users x 20 items: signal agrees across edges (smooth) vs alternates sign
    for seed in range(5):
        rng = np.random.default_rng(seed)
        edges = [(u, i, 1) for u in range(20) for i in range(20) if rng.random() < 0.3]
        g = build_graph(20, 20, edges)
        s = sym_eigendecompose(normalized_laplacian(sign_adjacency(g, 1)))
        base = rng.uniform(0.5, 1.5, 40)
        smooth = base.copy()
        rough = np.r_[base[:20], -base[20:]]
        assert mean_frequency(s, rough) > mean_frequency(s, smooth)


def test_kernel_responses():
    assert lgf_kernel_response(0.0, 3) == 1.0
    assert lgf_kernel_response(0.5, 2) == 0.25
    assert lgf_kernel_response(1.5, 2) == 0.25
    assert lgf_kernel_response(1.5, 1) == -0.5
    assert hgf_kernel_response(0.0, 4) == 0.0
    assert hgf_kernel_response(2.0, 1) == 2.0
    assert hgf_kernel_response(1.5, 2) == 2.25
    with pytest.raises(ValueError):
        lgf_kernel_response(0.5, 0)


def test_low_pass_dominance():
    lam = np.linspace(0, 2, 201)
    for k in (2, 4):
        assert np.all(np.abs(lgf_kernel_response(lam, k)) <= lgf_kernel_response(0.0, k))
    for k in (1, 3):
        g = lgf_kernel_response(lam[lam <= 1], k)
        assert np.all(np.diff(g) <= 0)


def test_kernel_response_table():
    t = kernel_response_table(2, 0.01)
    assert t.shape == (201, 3)
    assert t[0].tolist() == [0.0, 1.0, 0.0]
    assert t[-1].tolist() == [2.0, 1.0, 4.0]


def test_smoothness_examples():
    a = sign_adjacency(K2, 1)
    assert smoothness(a, [1.0, -1.0]) == 4.0
    g = build_graph(3, 3, [(u, i, 1) for u in range(3) for i in range(3)])
    assert smoothness(sign_adjacency(g, 1), np.full(6, 2.5)) == 0.0


def test_smoothness_oracles(rng):
    for _ in range(10):
        g = random_graph(rng, 10, 10)
        a = sign_adjacency(g, 1)
        x = rng.normal(size=a.n)
        edge_sum = sum((x[u] - x[g.num_users + i]) ** 2 for u, i in g.pos_edges)
        dense = a.to_dense()
        quad = x @ (np.diag(dense.sum(1)) - dense) @ x
        assert abs(smoothness(a, x) - edge_sum) <= 1e-10
        assert abs(smoothness(a, x) - quad) <= 1e-10
