"""Frequency-domain comparison of the positive-only and negative-only graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import build_graph, sign_adjacency, normalized_laplacian
from .mf import MFConfig, node_signal, train_mf_1d
from .spectral import (FrequencyHistogram, frequency_histogram, mean_frequency,
                       smoothness, sym_eigendecompose, MAX_DENSE_N)


@dataclass
class SignAnalysis:
    histogram: FrequencyHistogram
    mean_frequency: float
    smoothness: float
    num_edges: int


def frequency_analysis(num_users, num_items, edges, signal, buckets=10, mode="energy",
                       max_n=MAX_DENSE_N) -> dict:
    """Histogram the GFT of ``signal`` on the normalized Laplacian of G+ and G-.

    ``edges`` is an (m, 3) array of (user, item, sign). Returns
    ``{+1: SignAnalysis, -1: SignAnalysis}``.
    """
    g = build_graph(num_users, num_items, edges)
    out = {}
    for sign in (1, -1):
        adj = sign_adjacency(g, sign)
        if len(g.edges(sign)) == 0:
            # no edges of this sign: nothing to analyse, flag it
            edges_ = np.linspace(0.0, 2.0, buckets + 1)
            out[sign] = SignAnalysis(FrequencyHistogram(edges_, np.zeros(buckets), True),
                                     float("nan"), 0.0, 0)
            continue
        spec = sym_eigendecompose(normalized_laplacian(adj), max_n=max_n)
        out[sign] = SignAnalysis(frequency_histogram(spec, signal, buckets, mode),
                                 mean_frequency(spec, signal), smoothness(adj, signal),
                                 len(g.edges(sign)))
    return out


def mf_signal(ratings, num_users, num_items, cfg: MFConfig | None = None) -> np.ndarray:
    """Train 1-D MF on (user, item, rating) rows and return the node signal."""
    return node_signal(train_mf_1d(ratings, num_users, num_items, cfg))
