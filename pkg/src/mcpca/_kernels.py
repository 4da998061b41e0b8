"""Hot inner loops: the Oja update sweep and the Markov-chain walk.

Both are inherently sequential (each step depends on the previous one), so
they are compiled with numba when available. Set MCPCA_BACKEND=numpy to
force the pure-numpy fallback; `benchmarks/bench_kernels.py` compares the
two. Results agree to floating-point roundoff, and all randomness is drawn
outside the kernels, so a fixed seed reproduces the same stream on either
backend.
"""

from __future__ import annotations

import os

import numpy as np

_REQUESTED = os.environ.get("MCPCA_BACKEND", "numba").strip().lower()
if _REQUESTED not in ("numba", "numpy"):
    raise ValueError(f"MCPCA_BACKEND must be 'numba' or 'numpy', got {_REQUESTED!r}")


def _oja_errors_py(X, etas, w, counts, v1):
    # counts: sorted update counts (0 allowed, duplicates allowed) at which
    # the sin^2 error against v1 is recorded.
    n = X.shape[0]
    m = counts.shape[0]
    errs = np.empty(m)
    ci = 0
    for t in range(n):
        while ci < m and counts[ci] == t:
            c = w @ v1
            errs[ci] = 1.0 - c * c
            ci += 1
        x = X[t]
        w += etas[t] * (x @ w) * x
        w /= np.sqrt(w @ w)
    while ci < m:
        c = w @ v1
        errs[ci] = 1.0 - c * c
        ci += 1
    return errs


def _walk_states_py(cdf, u, s0):
    # cdf: per-state transition CDF rows (last entry 1); u: uniforms driving
    # each step; inverse-CDF draw = first index with cdf[s, j] > u.
    n = u.shape[0]
    m = cdf.shape[1]
    path = np.empty(n + 1, dtype=np.int64)
    path[0] = s0
    s = s0
    for t in range(n):
        x = u[t]
        lo = 0
        hi = m - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[s, mid] > x:
                hi = mid
            else:
                lo = mid + 1
        s = lo
        path[t + 1] = s
    return path


if _REQUESTED == "numba":
    from numba import njit

    _oja_errors_nb = njit(cache=True)(_oja_errors_py)
    _walk_states_nb = njit(cache=True)(_walk_states_py)
    _IMPL = {"oja": _oja_errors_nb, "walk": _walk_states_nb}
    BACKEND = "numba"
else:
    _IMPL = {"oja": _oja_errors_py, "walk": _walk_states_py}
    BACKEND = "numpy"


def oja_errors(samples: np.ndarray, etas: np.ndarray, w0: np.ndarray,
               counts: np.ndarray, v1: np.ndarray) -> np.ndarray:
    """Run the normalized rank-one update over `samples` and return the
    sin^2 error against v1 after each update count in `counts`."""
    w = np.ascontiguousarray(w0, dtype=np.float64).copy()
    return _IMPL["oja"](
        np.ascontiguousarray(samples, dtype=np.float64),
        np.ascontiguousarray(etas, dtype=np.float64),
        w,
        np.ascontiguousarray(counts, dtype=np.int64),
        np.ascontiguousarray(v1, dtype=np.float64),
    )


def walk_states(cdf: np.ndarray, u: np.ndarray, s0: int) -> np.ndarray:
    """Walk the chain: state s0, then one inverse-CDF draw per uniform in u."""
    return _IMPL["walk"](
        np.ascontiguousarray(cdf, dtype=np.float64),
        np.ascontiguousarray(u, dtype=np.float64),
        np.int64(s0),
    )
