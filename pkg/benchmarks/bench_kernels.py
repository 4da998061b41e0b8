#!/usr/bin/env python3
"""Time the two hot kernels on the numba and numpy backends.

Run: python3 benchmarks/bench_kernels.py [--n 1000000] [--dim 50]

The first numba call includes JIT compilation, so each kernel is warmed
once before timing. Expect an order of magnitude or more between backends
on the update sweep; the walk kernel is lighter but still loop-bound.
"""

import argparse
import time

import numpy as np
from numba import njit

from mcpca import _kernels


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--dim", type=int, default=50)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.standard_normal((args.n, args.dim))
    etas = 0.5 / (10.0 + np.arange(1, args.n + 1))
    w0 = rng.standard_normal(args.dim)
    w0 /= np.linalg.norm(w0)
    v1 = np.zeros(args.dim)
    v1[0] = 1.0
    counts = np.array([args.n], dtype=np.int64)

    P = rng.uniform(0.1, 1.0, (10, 10))
    P /= P.sum(axis=1, keepdims=True)
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(args.n)

    oja_nb = njit(cache=True)(_kernels._oja_errors_py)
    walk_nb = njit(cache=True)(_kernels._walk_states_py)
    # warm the JIT before timing
    oja_nb(X[:100], etas[:100], w0.copy(), np.array([100], dtype=np.int64), v1)
    walk_nb(cdf, u[:100], np.int64(0))

    rows = [
        ("oja_errors", "numpy",
         _time(_kernels._oja_errors_py, X, etas, w0.copy(), counts, v1, repeats=1)),
        ("oja_errors", "numba",
         _time(oja_nb, X, etas, w0.copy(), counts, v1)),
        ("walk_states", "numpy",
         _time(_kernels._walk_states_py, cdf, u, np.int64(0), repeats=1)),
        ("walk_states", "numba",
         _time(walk_nb, cdf, u, np.int64(0))),
    ]
    print(f"n={args.n} dim={args.dim}")
    print(f"{'kernel':<14}{'backend':<10}{'seconds':>10}")
    base = {}
    for kernel, backend, sec in rows:
        print(f"{kernel:<14}{backend:<10}{sec:>10.4f}")
        if backend == "numpy":
            base[kernel] = sec
        else:
            print(f"{'':<14}{'speedup':<10}{base[kernel] / sec:>10.1f}x")


if __name__ == "__main__":
    main()
