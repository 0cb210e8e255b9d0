"""Signed bipartite graphs and the sparse symmetric operators built on them.

Node convention used everywhere in the package: users take unified indices
``0 .. num_users-1`` and items take ``num_users .. num_users+num_items-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels

SYM_TOL = 1e-12


class GraphError(ValueError):
    """Invalid graph input (index out of range, conflicting signs, bad file)."""


@dataclass(frozen=True)
class SignedEdge:
    user: int
    item: int
    sign: int


class SparseSymMatrix:
    """Symmetric real matrix in compressed sparse row form.

    Column indices are sorted within each row and explicit zeros are dropped.
    Instances are treated as immutable.
    """

    __slots__ = ("n", "indptr", "indices", "data")

    def __init__(self, n, indptr, indices, data, check=True):
        self.n = int(n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False
        if check:
            self._validate()

    @classmethod
    def from_coo(cls, n, rows, cols, vals, check=True):
        """Assemble from triplets; duplicate coordinates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size:
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            key = rows * n + cols
            starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return cls(n, indptr, cols, vals, check=check)

    @classmethod
    def from_dense(cls, m):
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        rows, cols = np.nonzero(m)
        return cls.from_coo(m.shape[0], rows, cols, m[rows, cols])

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls.from_coo(n, idx, idx, np.ones(n))

    @property
    def nnz(self):
        return int(self.indices.shape[0])

    def row_ids(self):
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))

    def to_dense(self):
        out = np.zeros((self.n, self.n))
        out[self.row_ids(), self.indices] = self.data
        return out

    def diagonal(self):
        out = np.zeros(self.n)
        rows = self.row_ids()
        on_diag = rows == self.indices
        out[rows[on_diag]] = self.data[on_diag]
        return out

    def scaled(self, left):
        """Return ``diag(left) @ M @ diag(left)`` (stays symmetric)."""
        rows = self.row_ids()
        data = left[rows] * self.data * left[self.indices]
        return SparseSymMatrix.from_coo(self.n, rows, self.indices, data, check=False)

    def __matmul__(self, x):
        return spmm(self, x)

    def _validate(self):
        n = self.n
        if self.indptr.shape != (n + 1,) or self.indptr[0] != 0:
            raise ValueError("malformed row offsets")
        if np.any(np.diff(self.indptr) < 0) or self.indptr[-1] != self.indices.shape[0]:
            raise ValueError("row offsets must be monotone and end at nnz")
        if self.indices.shape != self.data.shape:
            raise ValueError("indices and values differ in length")
        if self.nnz == 0:
            return
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise ValueError("column index out of range")
        rows = self.row_ids()
        same_row = rows[1:] == rows[:-1]
        if np.any(self.indices[1:][same_row] <= self.indices[:-1][same_row]):
            raise ValueError("column indices must be strictly increasing within a row")
        # transpose in canonical order must reproduce the same pattern
        order = np.lexsort((rows, self.indices))
        if not (np.array_equal(self.indices[order], rows)
                and np.array_equal(rows[order], self.indices)):
            raise ValueError("matrix is not structurally symmetric")
        if np.max(np.abs(self.data[order] - self.data)) > SYM_TOL:
            raise ValueError("matrix values are not symmetric")

    def __repr__(self):
        return f"SparseSymMatrix(n={self.n}, nnz={self.nnz})"


def spmm(m: SparseSymMatrix, x: np.ndarray) -> np.ndarray:
    """Product ``M @ X`` for dense ``X`` of shape (n,) or (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    vec = x.ndim == 1
    if vec:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != m.n:
        raise ValueError(f"dimension mismatch: matrix is {m.n}x{m.n}, operand {x.shape}")
    out = kernels.csr_spmm(m.indptr, m.indices, m.data, x)
    return out[:, 0] if vec else out


@dataclass(frozen=True)
class SignedBipartiteGraph:
    """Users, items and sorted, deduplicated positive/negative edge arrays.

    ``pos_edges`` and ``neg_edges`` are int64 arrays of shape (m, 2) holding
    (user, item) pairs in user-major, item-minor order.
    """

    num_users: int
    num_items: int
    pos_edges: np.ndarray
    neg_edges: np.ndarray
    _ops: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_nodes(self):
        return self.num_users + self.num_items

    def edges(self, sign):
        if sign == 1:
            return self.pos_edges
        if sign == -1:
            return self.neg_edges
        raise ValueError(f"sign must be +1 or -1, got {sign}")

    def signed_edges(self):
        """All edges as an (m, 3) array of (user, item, sign)."""
        pos = np.column_stack([self.pos_edges, np.ones(len(self.pos_edges), dtype=np.int64)])
        neg = np.column_stack([self.neg_edges, -np.ones(len(self.neg_edges), dtype=np.int64)])
        out = np.vstack([pos, neg]).astype(np.int64)
        order = np.lexsort((out[:, 1], out[:, 0]))
        return out[order]

    def operator(self, name):
        """Cached per-sign operator: 'lgf+', 'lgf-', 'hgf-', 'lap+', 'lap-'."""
        if name not in self._ops:
            sign = 1 if name.endswith("+") else -1
            adj = sign_adjacency(self, sign)
            kind = name[:-1]
            if kind == "lgf":
                op = augmented_propagation(adj)
            elif kind in ("hgf", "lap"):
                op = high_pass_operator(adj)
            else:
                raise KeyError(name)
            self._ops[name] = op
        return self._ops[name]


def build_graph(num_users: int, num_items: int,
                edges: Iterable[Sequence[int]] | np.ndarray) -> SignedBipartiteGraph:
    """Validate, deduplicate and sort a signed edge list.

    Exact duplicates collapse to one edge; a (user, item) pair carrying both
    signs raises :class:`GraphError`.
    """
    if num_users < 0 or num_items < 0:
        raise GraphError("node counts must be nonnegative")
    if not isinstance(edges, np.ndarray):
        edges = [(e.user, e.item, e.sign) if isinstance(e, SignedEdge) else tuple(e)
                 for e in edges]
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GraphError("edges must be (user, item, sign) triples")
    u, i, s = arr[:, 0], arr[:, 1], arr[:, 2]
    bad = (u < 0) | (u >= num_users) | (i < 0) | (i >= num_items)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise GraphError(f"edge {tuple(arr[k])} has an index out of range "
                         f"({num_users} users, {num_items} items)")
    if not np.all((s == 1) | (s == -1)):
        raise GraphError("edge sign must be +1 or -1")
    arr = np.unique(arr, axis=0)
    pairs = arr[:, 0] * max(num_items, 1) + arr[:, 1]
    uniq, counts = np.unique(pairs, return_counts=True)
    if np.any(counts > 1):
        p = int(uniq[counts > 1][0])
        raise GraphError(f"conflicting signs for pair (user={p // max(num_items, 1)}, "
                         f"item={p % max(num_items, 1)})")
    pos = arr[arr[:, 2] == 1][:, :2]
    neg = arr[arr[:, 2] == -1][:, :2]
    return SignedBipartiteGraph(num_users, num_items,
                                np.ascontiguousarray(pos), np.ascontiguousarray(neg))


def sign_adjacency(g: SignedBipartiteGraph, sign: int) -> SparseSymMatrix:
    """0/1 adjacency over all N nodes holding only the edges of ``sign``."""
    e = g.edges(sign)
    users = e[:, 0]
    items = e[:, 1] + g.num_users
    rows = np.concatenate([users, items])
    cols = np.concatenate([items, users])
    return SparseSymMatrix.from_coo(g.num_nodes, rows, cols, np.ones(rows.shape[0]))


def degree_vector(a: SparseSymMatrix) -> np.ndarray:
    """Row sums ``d_i = sum_j A_ij``."""
    return np.bincount(a.row_ids(), weights=a.data, minlength=a.n).astype(np.float64)


def _inv_sqrt(d):
    out = np.zeros_like(d)
    nz = d > 0
    out[nz] = 1.0 / np.sqrt(d[nz])
    return out


def normalized_laplacian(a: SparseSymMatrix) -> SparseSymMatrix:
    """``I - D^{-1/2} A D^{-1/2}``; isolated nodes keep a unit diagonal."""
    scaled = a.scaled(_inv_sqrt(degree_vector(a)))
    rows = np.concatenate([np.arange(a.n), scaled.row_ids()])
    cols = np.concatenate([np.arange(a.n), scaled.indices])
    vals = np.concatenate([np.ones(a.n), -scaled.data])
    return SparseSymMatrix.from_coo(a.n, rows, cols, vals)


def augmented_propagation(a: SparseSymMatrix) -> SparseSymMatrix:
    """``D~^{-1/2} (A + I) D~^{-1/2}`` with ``D~ = D + I``."""
    rows = np.concatenate([a.row_ids(), np.arange(a.n)])
    cols = np.concatenate([a.indices, np.arange(a.n)])
    vals = np.concatenate([a.data, np.ones(a.n)])
    a_tilde = SparseSymMatrix.from_coo(a.n, rows, cols, vals)
    return a_tilde.scaled(1.0 / np.sqrt(degree_vector(a) + 1.0))


def high_pass_operator(a: SparseSymMatrix) -> SparseSymMatrix:
    """``D^{-1/2} (D - A) D^{-1/2}`` on the unaugmented graph.

    Identical to :func:`normalized_laplacian`; named separately because the
    encoder applies it to the negative-feedback graph.
    """
    return normalized_laplacian(a)


def read_edge_list(path):
    """Read ``user<TAB>item<TAB>sign`` lines; '#' lines and one header skipped."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise GraphError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
            except ValueError:
                if not rows:
                    continue  # header
                raise GraphError(f"{path}:{lineno}: non-integer field") from None
            if rows[-1][2] not in (1, -1):
                raise GraphError(f"{path}:{lineno}: sign must be +1 or -1")
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def write_edge_list(path, edges):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user_id\titem_id\tsign\n")
        for u, i, s in np.asarray(edges, dtype=np.int64).reshape(-1, 3):
            fh.write(f"{u}\t{i}\t{'+1' if s > 0 else '-1'}\n")
