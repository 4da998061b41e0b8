"""Per-state data distributions and the total covariance they induce.

Each chain state s carries a zero-mean distribution with covariance
Sigma_s = L_s L_s^T; a sample is X = L_s Z where Z has iid coordinates from
a standardized base noise (normalized Bernoulli or symmetric uniform).
The covariance that streaming PCA targets is the stationary mixture
Sigma = sum_s pi(s) Sigma_s.

The benchmark family follows the banded construction
Sigma_s(i, j) = exp(-|i-j| c_s) sigma_i sigma_j with c_s ramping linearly
from 1 to 10 across states and sigma_i = 5 i^(-sigma_beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGapError

BERNOULLI = "bernoulli"
UNIFORM = "uniform"

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class BaseNoise:
    """Standardized coordinate noise: per-coordinate mean 0, variance 1.

    bernoulli: Z = (B - p) / sqrt(p (1-p)) with B ~ Bernoulli(p).
    uniform:   Z ~ U(-sqrt(3), sqrt(3)).
    """

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in (BERNOULLI, UNIFORM):
            raise ValueError(f"unknown base noise kind {self.kind!r}")
        if self.kind == BERNOULLI:
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ValueError("bernoulli noise needs p in (0, 1)")
        elif self.p is not None:
            raise ValueError("uniform noise takes no parameter")

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == UNIFORM:
            return rng.uniform(-_SQRT3, _SQRT3, shape)
        p = self.p
        return ((rng.random(shape) < p).astype(np.float64) - p) / math.sqrt(p * (1.0 - p))

    def fourth_moment(self) -> float:
        """E[Z^4] of one standardized coordinate."""
        if self.kind == UNIFORM:
            return 9.0 / 5.0
        pq = self.p * (1.0 - self.p)
        return 1.0 / pq - 3.0

    def coordinate_support(self) -> np.ndarray:
        """Extreme points of one coordinate's support ([lo, hi])."""
        if self.kind == UNIFORM:
            return np.array([-_SQRT3, _SQRT3])
        p = self.p
        r = math.sqrt(p * (1.0 - p))
        return np.array([-p / r, (1.0 - p) / r])


@dataclass(frozen=True, eq=False)
class StateDistributionSet:
    """Covariance factors L_s (Sigma_s = L_s L_s^T) plus the base noise."""

    dim: int
    factors: np.ndarray       # (n_states, d, d)
    covariances: np.ndarray   # (n_states, d, d)
    base_noise: BaseNoise

    def __post_init__(self):
        if self.factors.shape != self.covariances.shape or self.factors.ndim != 3:
            raise ValueError("factors and covariances must both be (n_states, d, d)")
        if self.factors.shape[1:] != (self.dim, self.dim):
            raise ValueError("state matrices must be dim x dim")
        for k in range(self.covariances.shape[0]):
            S = self.covariances[k]
            if np.max(np.abs(S - S.T)) > 1e-10 * max(1.0, np.abs(S).max()):
                raise ValueError(f"state covariance {k} is not symmetric")
        # shared across trials and threads; freeze to keep that safe
        self.factors.setflags(write=False)
        self.covariances.setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.factors.shape[0]


@dataclass(frozen=True, eq=False)
class EnsembleCovariance:
    """Total covariance Sigma with its top eigenpair and orthocomplement."""

    sigma: np.ndarray
    lambda1: float
    lambda2: float
    gap: float
    v1: np.ndarray
    v_perp: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class AssumptionBounds:
    """v_bound: operator-norm bound on E[(XX^T - Sigma)^2];
    m_bound: (essential-sup surrogate) bound on ||XX^T - Sigma||_2."""

    v_bound: float
    m_bound: float

    def __post_init__(self):
        if self.v_bound < 0 or self.m_bound < 0:
            raise ValueError("bounds must be nonnegative")
        if self.v_bound > self.m_bound**2 * (1.0 + 1e-12) + 1e-12:
            raise ValueError("v_bound must not exceed m_bound^2")


def factor_covariance(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root with eigenvalues clamped at 0 (roundoff guard)."""
    w, V = np.linalg.eigh(sigma)
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def from_covariances(sigmas: np.ndarray, noise: BaseNoise) -> StateDistributionSet:
    """Build a distribution set from explicit per-state covariances."""
    # copy: the stored arrays are frozen, which must not leak to the caller
    sigmas = np.array(sigmas, dtype=np.float64)
    factors = np.stack([factor_covariance(S) for S in sigmas])
    return StateDistributionSet(dim=sigmas.shape[1], factors=factors,
                                covariances=sigmas, base_noise=noise)


def banded_covariance(dim: int, decay: float, coord_scales: np.ndarray) -> np.ndarray:
    """Sigma(i, j) = exp(-|i-j| decay) * scale_i * scale_j."""
    idx = np.arange(dim, dtype=np.float64)
    D = np.abs(idx[:, None] - idx[None, :])
    return np.exp(-D * decay) * np.outer(coord_scales, coord_scales)


def make_benchmark_states(n_states: int, dim: int, sigma_beta: float, seed: int,
                          noise: str = BERNOULLI) -> StateDistributionSet:
    """The benchmark construction: decay c_s = 1 + 9 (s-1)/(n-1) across
    states s = 1..n, coordinate scales sigma_i = 5 i^(-sigma_beta).

    For Bernoulli base noise, p is drawn once from U(0, 0.05) with `seed`
    and shared across coordinates and states.
    """
    if n_states < 2 or dim < 2:
        raise ValueError("need n_states >= 2 and dim >= 2")
    if sigma_beta <= 0.0:
        raise ValueError("sigma_beta must be positive")
    if noise == BERNOULLI:
        rng = np.random.default_rng(seed)
        p = 0.0
        while p <= 1e-9:
            p = rng.uniform(0.0, 0.05)
        base = BaseNoise(BERNOULLI, p)
    elif noise == UNIFORM:
        base = BaseNoise(UNIFORM)
    else:
        raise ValueError(f"unknown noise kind {noise!r}")
    scales = 5.0 * np.arange(1, dim + 1, dtype=np.float64) ** (-sigma_beta)
    sigmas = np.stack([
        banded_covariance(dim, 1.0 + 9.0 * s / (n_states - 1), scales)
        for s in range(n_states)
    ])
    return from_covariances(sigmas, base)


def draw_sample(dist: StateDistributionSet, state: int,
                rng: np.random.Generator) -> np.ndarray:
    """One draw X = L_state Z."""
    if not (0 <= state < dist.n_states):
        raise ValueError("state index out of range")
    z = dist.base_noise.draw(rng, dist.dim)
    return dist.factors[state] @ z


def draw_path_samples(dist: StateDistributionSet, path: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Draws for a whole state path, one row per step.

    The base-noise matrix is drawn in a single call, so the output is a
    pure function of (dist, path, rng state) independent of state grouping.
    """
    Z = dist.base_noise.draw(rng, (len(path), dist.dim))
    X = np.empty_like(Z)
    for s in range(dist.n_states):
        mask = path == s
        if mask.any():
            X[mask] = Z[mask] @ dist.factors[s].T
    return X


def total_covariance(dist: StateDistributionSet, pi: np.ndarray) -> EnsembleCovariance:
    """Sigma = sum_s pi(s) Sigma_s with its eigendecomposition.

    Raises DegenerateGapError when lambda1 - lambda2 falls below 1e-10
    (step-size schedules are undefined for a tied top eigenvalue).
    """
    pi = np.asarray(pi, dtype=np.float64)
    if len(pi) != dist.n_states:
        raise ValueError("pi length must match the number of states")
    sigma = np.einsum("s,sij->ij", pi, dist.covariances)
    sigma = 0.5 * (sigma + sigma.T)
    w, V = np.linalg.eigh(sigma)
    lambda1, lambda2 = float(w[-1]), float(w[-2])
    gap = lambda1 - lambda2
    if gap < 1e-10:
        raise DegenerateGapError(f"top eigenvalues are tied (gap {gap:.3e})")
    v1 = V[:, -1]
    if v1[np.argmax(np.abs(v1))] < 0:
        v1 = -v1
    return EnsembleCovariance(sigma=sigma, lambda1=lambda1, lambda2=lambda2, gap=gap,
                              v1=v1, v_perp=V[:, :-1], eigenvalues=w)


def estimate_assumption_bounds(dist: StateDistributionSet, pi: np.ndarray,
                               n_probe: int, seed: int) -> AssumptionBounds:
    """Monte-Carlo estimates of the two moment bounds, with a 20% margin.

    v_bound estimates ||E[(XX^T - Sigma)^2]||_2 over stationary probes.
    m_bound is the 1 - 1e-6 empirical quantile of ||XX^T - Sigma||_2; for
    uniform base noise the true essential sup is finite and the quantile
    approaches it, while for Bernoulli noise the (B-p)/sqrt(p(1-p)) tail
    makes this a high-quantile surrogate rather than an exact a.s. bound.
    """
    if n_probe < 1000:
        raise ValueError("n_probe must be at least 1000")
    pi = np.asarray(pi, dtype=np.float64)
    sigma = np.einsum("s,sij->ij", pi, dist.covariances)
    rng = np.random.default_rng(seed)
    states = rng.choice(dist.n_states, size=n_probe, p=pi)
    X = draw_path_samples(dist, states, rng)
    acc = np.zeros_like(sigma)
    norms = np.empty(n_probe)
    for i in range(n_probe):
        D = np.outer(X[i], X[i]) - sigma
        acc += D @ D
        norms[i] = np.abs(np.linalg.eigvalsh(D)).max()
    v_hat = float(np.abs(np.linalg.eigvalsh(acc / n_probe)).max())
    m_hat = float(np.quantile(norms, 1.0 - 1e-6))
    return AssumptionBounds(v_bound=1.2 * v_hat, m_bound=1.2 * m_hat)
