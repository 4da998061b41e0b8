"""Offline baseline: empirical second-moment matrix and its top eigenvector.

The estimator is the leading eigenvector of Sigma_hat = (1/n) sum_i X_i X_i^T,
extracted by power iteration (a full eigendecomposition is never needed for
one direction and would not scale to large d).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .statedist import EnsembleCovariance
from .streaming import ErrorTrace, sin2_error, stream_checksum

_START_SEED = 0x0FF1CE
_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class EmpiricalCovariance:
    """Single-pass second-moment accumulator result."""

    sigma_hat: np.ndarray
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one sample")
        S = self.sigma_hat
        if np.max(np.abs(S - S.T)) > 1e-10 * max(1.0, np.abs(S).max()):
            raise ValueError("sigma_hat must be symmetric")


def accumulate(samples: np.ndarray) -> EmpiricalCovariance:
    """(1/n) sum_i x_i x_i^T in one pass over row blocks, O(d^2) memory."""
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("samples must be a nonempty (n, d) array")
    n, d = X.shape
    S = np.zeros((d, d))
    for a in range(0, n, _CHUNK):
        blk = X[a:a + _CHUNK]
        S += blk.T @ blk
    S /= n
    return EmpiricalCovariance(sigma_hat=0.5 * (S + S.T), n=n)


def merge(a: EmpiricalCovariance, b: EmpiricalCovariance) -> EmpiricalCovariance:
    """Weighted combination; associative up to roundoff."""
    n = a.n + b.n
    return EmpiricalCovariance(sigma_hat=(a.n * a.sigma_hat + b.n * b.sigma_hat) / n, n=n)


class PowerIterationResult(NamedTuple):
    vector: np.ndarray
    value: float
    converged: bool


def leading_eigenvector(emp: EmpiricalCovariance, tol: float = 1e-10,
                        max_iter: int = 10**5) -> PowerIterationResult:
    """Power iteration from a fixed-seed random start.

    Converged means successive iterates differ by less than `tol` in sin
    distance; hitting the iteration cap (a degenerate or near-degenerate
    top eigenspace) returns the last iterate with converged=False.
    """
    S = emp.sigma_hat
    if not np.any(S):
        raise ValueError("sigma_hat is zero; no leading direction exists")
    v = np.random.default_rng(_START_SEED).standard_normal(S.shape[0])
    v /= np.linalg.norm(v)
    converged = False
    for _ in range(max_iter):
        u = S @ v
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            # start vector fell in the kernel; re-seed deterministically
            v = np.random.default_rng(_START_SEED + 1).standard_normal(S.shape[0])
            v /= np.linalg.norm(v)
            continue
        u /= nrm
        if sin2_error(u, v) < tol * tol:
            v = u
            converged = True
            break
        v = u
    return PowerIterationResult(vector=v, value=float(v @ S @ v), converged=converged)


def offline_trace(samples: np.ndarray, checkpoints: np.ndarray,
                  truth: EnsembleCovariance, seed: int) -> ErrorTrace:
    """Evaluate the offline estimator at each checkpoint by extending one
    running accumulator over sample prefixes (no re-pass over the stream)."""
    X = np.asarray(samples, dtype=np.float64)
    cps = np.asarray(checkpoints, dtype=np.int64)
    d = X.shape[1]
    S = np.zeros((d, d))
    errs = np.empty(len(cps))
    prev = 0
    for i, cp in enumerate(cps):
        blk = X[prev:cp]
        S += blk.T @ blk
        prev = int(cp)
        emp = EmpiricalCovariance(sigma_hat=0.5 * (S + S.T) / cp, n=int(cp))
        errs[i] = sin2_error(leading_eigenvector(emp).vector, truth.v1)
    return ErrorTrace(checkpoints=cps, errors=errs, algorithm="offline",
                      seed=seed, stream_crc=stream_checksum(X))
