"""Streaming top-eigenvector estimation with the normalized rank-one update.

The estimate w is updated per sample as w <- normalize(w + eta x (x.w)),
which is (I + eta x x^T) w followed by renormalization, at O(d) cost.
Step sizes follow eta_i = alpha / ((lambda1 - lambda2) (beta + i)) in one
of two modes:

- "practical": alpha = 5, beta = 5 / (1 - |lambda2(P)|), the settings used
  by the experiment harness;
- "conservative": beta from `conservative_beta`, large enough to carry a
  high-probability guarantee; requires alpha > 2 and eta_0 <= 1/e.

Downsampled runs consume every k-th sample and re-index the schedule by
consumed count; error traces stay indexed by total stream position so the
full and downsampled curves share an x-axis.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateGapError, EmptyTraceError
from .seeds import mix64
from .statedist import EnsembleCovariance, StateDistributionSet, draw_path_samples

PRACTICAL = "practical"
CONSERVATIVE = "conservative"

FULL_OJA = "oja"
DOWNSAMPLED_OJA = "oja_downsampled"

# Per-trial sub-stream indices: seed_for(stream) = mix64(trial_seed, stream).
PATH_STREAM = 0
W0_STREAM = 1
NOISE_STREAM = 2


def conservative_beta(alpha: float, gap: float, delta: float, tau_mix: int,
                      eta0: float, v_bound: float, m_bound: float, lambda1: float,
                      lambda2_abs: float) -> float:
    """The conservative schedule offset:

    beta = 1000 alpha^2 max{tau_mix ln(1/eta0) (M + lambda1)^2,
                            (V / (1 - |lambda2(P)|) + lambda1^2) / 100}
           / ((lambda1 - lambda2)^2 ln(1 + delta/200))
    """
    if alpha <= 2.0:
        raise ValueError("alpha must exceed 2")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if gap <= 0.0:
        raise DegenerateGapError("eigengap must be positive")
    if not (0.0 < eta0 <= 1.0 / math.e):
        raise ValueError("eta0 must lie in (0, 1/e]")
    term_mix = tau_mix * math.log(1.0 / eta0) * (m_bound + lambda1) ** 2
    term_var = (v_bound / (1.0 - lambda2_abs) + lambda1**2) / 100.0
    return (1000.0 * alpha**2 * max(term_mix, term_var)
            / (gap**2 * math.log(1.0 + delta / 200.0)))


@dataclass(frozen=True)
class StepSchedule:
    """eta(i) = alpha / (gap (beta + i)); strictly decreasing and positive."""

    alpha: float
    beta: float
    gap: float
    mode: str = PRACTICAL

    def __post_init__(self):
        if self.mode not in (PRACTICAL, CONSERVATIVE):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("alpha and beta must be positive")
        if self.gap <= 0.0:
            raise DegenerateGapError("eigengap must be positive")
        if self.mode == CONSERVATIVE:
            if self.alpha <= 2.0:
                raise ValueError("conservative mode requires alpha > 2")
            if self.eta(0) > 1.0 / math.e + 1e-15:
                raise ValueError("conservative mode requires eta_0 <= 1/e")

    def eta(self, i):
        return self.alpha / (self.gap * (self.beta + i))

    @property
    def eta0(self) -> float:
        return self.eta(0)

    @property
    def eta0_exceeds_one(self) -> bool:
        """Aggressive-schedule flag, recorded in run metadata."""
        return self.eta(0) > 1.0

    def etas(self, n: int) -> np.ndarray:
        return self.eta(np.arange(1, n + 1, dtype=np.float64))

    def downsampled(self, k: int) -> "StepSchedule":
        """Schedule for a stream thinned by k: beta divided by k."""
        if k < 1:
            raise ValueError("k must be >= 1")
        return StepSchedule(self.alpha, self.beta / k, self.gap, self.mode)


def practical_schedule(gap: float, lambda2_abs: float) -> StepSchedule:
    """alpha = 5, beta = 5 / (1 - |lambda2(P)|)."""
    return StepSchedule(alpha=5.0, beta=5.0 / (1.0 - lambda2_abs), gap=gap,
                        mode=PRACTICAL)


def conservative_schedule(gap: float, delta: float, tau_mix: int, v_bound: float,
                          m_bound: float, lambda1: float, lambda2_abs: float,
                          alpha: float = 3.0,
                          eta0: float = 1.0 / math.e) -> StepSchedule:
    beta = conservative_beta(alpha, gap, delta, tau_mix, eta0, v_bound, m_bound,
                             lambda1, lambda2_abs)
    return StepSchedule(alpha=alpha, beta=beta, gap=gap, mode=CONSERVATIVE)


@dataclass(eq=False)
class OjaEstimator:
    """Unit-norm iterate plus the count of consumed samples."""

    w: np.ndarray
    t: int = 0

    @classmethod
    def random_init(cls, dim: int, seed: int) -> "OjaEstimator":
        """w0 uniform on the unit sphere (normalized standard Gaussian)."""
        w = np.random.default_rng(seed).standard_normal(dim)
        return cls(w=w / np.linalg.norm(w))


def oja_step(est: OjaEstimator, x: np.ndarray, eta: float) -> OjaEstimator:
    """One rank-one update; never materializes I + eta x x^T."""
    if eta < 0.0:
        raise ValueError("eta must be nonnegative")
    w = est.w
    w += eta * (x @ w) * x
    nrm = np.linalg.norm(w)
    # nonexpansive for eta >= 0, so collapse is impossible by construction
    assert nrm > 1e-300, "iterate norm collapsed"
    est.w = w / nrm
    est.t += 1
    return est


def sin2_error(w: np.ndarray, v1: np.ndarray) -> float:
    """1 - <w, v1>^2 for unit vectors; invariant to either sign."""
    c = float(w @ v1)
    return min(max(1.0 - c * c, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class ErrorTrace:
    """sin^2 errors recorded at increasing stream positions."""

    checkpoints: np.ndarray
    errors: np.ndarray
    algorithm: str
    seed: int
    stream_crc: int = 0

    def __post_init__(self):
        if np.any(np.diff(self.checkpoints) <= 0):
            raise ValueError("checkpoints must be strictly increasing")
        if np.any((self.errors < 0) | (self.errors > 1)):
            raise ValueError("errors must lie in [0, 1]")


def checkpoint_grid(n_max: int, start: int = 100, ratio: float = 1.25) -> np.ndarray:
    """Geometric checkpoint grid from `start` to n_max, n_max included."""
    if n_max < start:
        return np.array([n_max], dtype=np.int64)
    cps = []
    c = float(start)
    while c < n_max:
        cps.append(int(round(c)))
        c = max(c * ratio, c + 1.0)
    cps.append(n_max)
    return np.unique(np.array(cps, dtype=np.int64))


def stream_checksum(samples: np.ndarray) -> int:
    return zlib.crc32(np.ascontiguousarray(samples).tobytes())


def _validate_checkpoints(checkpoints: np.ndarray, n: int) -> np.ndarray:
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or cps.min() < 1 or cps.max() > n:
        raise ValueError("checkpoints must lie within [1, len(path)]")
    return cps


def _trial_streams(path: np.ndarray, dist: StateDistributionSet, seed: int,
                   samples: np.ndarray | None):
    w0 = OjaEstimator.random_init(dist.dim, mix64(seed, W0_STREAM)).w
    if samples is None:
        samples = draw_path_samples(dist, path,
                                    np.random.default_rng(mix64(seed, NOISE_STREAM)))
    return w0, samples


def run_oja(path: np.ndarray, dist: StateDistributionSet, schedule: StepSchedule,
            checkpoints: np.ndarray, truth: EnsembleCovariance, seed: int,
            samples: np.ndarray | None = None) -> ErrorTrace:
    """Full-stream run: every sample updates the iterate with eta(step).

    w0 and the sample draws derive from sub-seeds of `seed`; passing
    `samples` (drawn from the same sub-seed) skips regeneration only.
    """
    cps = _validate_checkpoints(checkpoints, len(path))
    w0, X = _trial_streams(path, dist, seed, samples)
    errs = _kernels.oja_errors(X, schedule.etas(len(path)), w0, cps, truth.v1)
    return ErrorTrace(checkpoints=cps, errors=np.clip(errs, 0.0, 1.0),
                      algorithm=FULL_OJA, seed=seed, stream_crc=stream_checksum(X))


def run_downsampled_oja(path: np.ndarray, dist: StateDistributionSet,
                        schedule: StepSchedule, k: int, checkpoints: np.ndarray,
                        truth: EnsembleCovariance, seed: int,
                        samples: np.ndarray | None = None) -> ErrorTrace:
    """Thinned run: only samples k, 2k, 3k, ... update the iterate, with the
    schedule indexed by consumed count. Checkpoints remain total stream
    positions, so traces are directly comparable with `run_oja`.

    `schedule` is applied to the thinned stream as given; callers following
    the harness convention pass schedule.downsampled(k).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(path):
        raise EmptyTraceError(f"skip factor {k} exceeds stream length {len(path)}")
    cps = _validate_checkpoints(checkpoints, len(path))
    w0, X = _trial_streams(path, dist, seed, samples)
    thinned = X[k - 1::k]
    errs = _kernels.oja_errors(thinned, schedule.etas(len(thinned)), w0,
                               cps // k, truth.v1)
    return ErrorTrace(checkpoints=cps, errors=np.clip(errs, 0.0, 1.0),
                      algorithm=DOWNSAMPLED_OJA, seed=seed,
                      stream_crc=stream_checksum(X))


def theory_skip_factor(profile, schedule: StepSchedule, n: int) -> int:
    """The analysis' skip choice k = tau_mix(eta_n^2) for an n-sample run."""
    eta_n = float(schedule.eta(n))
    return profile.tau_mix(min(eta_n**2, 0.5))
