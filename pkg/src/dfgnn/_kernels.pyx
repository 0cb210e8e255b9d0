# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels. Mirrors ``_kernels_py`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def csr_spmm(const cnp.int64_t[::1] indptr,
             const cnp.int64_t[::1] indices,
             const double[::1] data,
             const double[:, ::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t d = x.shape[1]
    out = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, jj, j, k
    cdef double a
    with nogil:
        for i in range(n):
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                a = data[jj]
                for k in range(d):
                    y[i, k] = y[i, k] + a * x[j, k]
    return out


def mean_pair_distance(const double[:, ::1] u):
    """Mean Euclidean distance over all unordered row pairs."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t d = u.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double total = 0.0, row_total, s, t
    if n < 2:
        return 0.0
    with nogil:
        for i in range(n - 1):
            row_total = 0.0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = u[i, k] - u[j, k]
                    s = s + t * t
                row_total = row_total + sqrt(s)
            total = total + row_total
    return total / (<double>n * (n - 1) / 2.0)


def mf_sgd_epoch(const cnp.int64_t[::1] users,
                 const cnp.int64_t[::1] items,
                 const double[::1] target,
                 const cnp.int64_t[::1] order,
                 double[::1] pu,
                 double[::1] qi,
                 double lr,
                 double reg):
    """One in-place SGD pass of 1-D factorization over ``order``."""
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t t, k, u, i
    cdef double p, q, err, gp, gq
    with nogil:
        for t in range(m):
            k = order[t]
            u = users[k]
            i = items[k]
            p = pu[u]
            q = qi[i]
            err = target[k] - p * q
            gp = -2.0 * err * q + 2.0 * reg * p
            gq = -2.0 * err * p + 2.0 * reg * q
            pu[u] = p - lr * gp
            qi[i] = q - lr * gq
