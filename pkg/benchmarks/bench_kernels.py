"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from dfgnn.graph import build_graph, sign_adjacency
from dfgnn.kernels import backends


def cases(rng):
    nu = ni = 1000
    pairs = rng.choice(nu * ni, size=20_000, replace=False)
    g = build_graph(nu, ni, [(int(p // ni), int(p % ni), 1) for p in pairs])
    a = sign_adjacency(g, 1)
    x = rng.normal(size=(a.n, 64))
    u = rng.normal(size=(800, 64))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    m = 20_000
    users = rng.integers(0, nu, m).astype(np.int64)
    items = rng.integers(0, ni, m).astype(np.int64)
    target = rng.normal(size=m)
    order = rng.permutation(m).astype(np.int64)
    pu, qi = rng.uniform(-0.05, 0.05, nu), rng.uniform(-0.05, 0.05, ni)
    return {
        "csr_spmm (2000 nodes, 40k nnz, d=64)":
            lambda k: k.csr_spmm(a.indptr, a.indices, a.data, x),
        "mean_pair_distance (800 x 64)":
            lambda k: k.mean_pair_distance(u),
        "mf_sgd_epoch (20k ratings)":
            lambda k: k.mf_sgd_epoch(users, items, target, order, pu.copy(), qi.copy(), 0.01, 0.01),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = backends()
    if "cython" not in impls:
        print("compiled extension not available; only the fallback is timed")
    print(f"{'kernel':40s} " + " ".join(f"{name:>12s}" for name in impls) + "   speedup")
    for label, fn in cases(np.random.default_rng(0)).items():
        best = {}
        for name, mod in impls.items():
            best[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        speed = best["python"] / best["cython"] if "cython" in best else float("nan")
        print(f"{label:40s} " + " ".join(f"{best[n] * 1e3:10.2f}ms" for n in impls)
              + f"   {speed:7.1f}x")


if __name__ == "__main__":
    main()
