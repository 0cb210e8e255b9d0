"""Pure numpy versions of the compiled kernels.

Accumulation order matches ``_kernels.pyx`` (per row, entries in storage
order, starting from zero), so both backends agree bit for bit on spmm.
"""

import numpy as np


def csr_spmm(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    out = np.zeros((n, x.shape[1]), dtype=np.float64)
    if indices.shape[0] == 0:
        return out
    rows = np.repeat(np.arange(n), np.diff(indptr))
    # np.add.at is unbuffered and applies updates in index order
    np.add.at(out, rows, data[:, None] * x[indices])
    return out


def mean_pair_distance(u):
    n = u.shape[0]
    if n < 2:
        return 0.0
    total = 0.0
    for i in range(n - 1):
        diff = u[i + 1:] - u[i]
        total += float(np.sqrt(np.einsum("ij,ij->i", diff, diff)).sum())
    return total / (n * (n - 1) / 2.0)


def mf_sgd_epoch(users, items, target, order, pu, qi, lr, reg):
    for k in order.tolist():
        u = users[k]
        i = items[k]
        p = float(pu[u])
        q = float(qi[i])
        err = target[k] - p * q
        gp = -2.0 * err * q + 2.0 * reg * p
        gq = -2.0 * err * p + 2.0 * reg * q
        pu[u] = p - lr * gp
        qi[i] = q - lr * gq
