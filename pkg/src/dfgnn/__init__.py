"""Dual-frequency graph neural network for sign-aware recommendation."""

from .graph import SignedBipartiteGraph, SparseSymMatrix, build_graph
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["SignedBipartiteGraph", "SparseSymMatrix", "build_graph", "BACKEND"]
