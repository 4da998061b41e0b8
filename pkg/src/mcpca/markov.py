"""Finite-state Markov chains: spectral analysis, mixing times, sampling.

The model throughout is a row-stochastic transition matrix P over n states,
assumed irreducible and aperiodic (checked), usually reversible. Provides:

- chain constructors: the lazy uniform-jump chain used by the experiment
  harness, two-state chains, and random reversible / symmetric chains;
- spectral analysis: stationary distribution via power iteration, second
  eigenvalue magnitude via the symmetrized kernel (reversible) or a
  repeated-squaring spectral-radius estimate (general);
- exact worst-start total-variation distance from stationarity and the
  mixing time derived from it, with cached matrix powers;
- stationary path sampling with explicit seeding;
- the reversed conditional kernel P(state at time t | state at time t+k),
  computed from the exact joint law of the stationary chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ErgodicityError, ReversibilityError

ROW_SUM_TOL = 1e-12
DETAILED_BALANCE_TOL = 1e-10
ERGODICITY_TOL = 1e-10
_PI_TOL = 1e-13
_PI_MAX_ITER = 10**6


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic transition matrix over a finite state space."""

    n_states: int
    probs: np.ndarray

    def __post_init__(self):
        P = np.ascontiguousarray(self.probs, dtype=np.float64)
        if P.shape != (self.n_states, self.n_states):
            raise ValueError(f"probs must be {self.n_states}x{self.n_states}, got {P.shape}")
        if self.n_states < 2:
            raise ValueError("need at least 2 states")
        if np.any(P < 0.0) or np.any(P > 1.0):
            raise ValueError("transition probabilities must lie in [0, 1]")
        rs = P.sum(axis=1)
        if np.max(np.abs(rs - 1.0)) > ROW_SUM_TOL:
            raise ValueError("rows must sum to 1 within 1e-12")
        P.setflags(write=False)
        object.__setattr__(self, "probs", P)


@dataclass(frozen=True, eq=False)
class ChainSpectrum:
    """Stationary distribution and spectral metadata of an ergodic chain."""

    stationary: np.ndarray
    lambda2_abs: float
    reversible: bool
    pi_min: float


def make_rho_chain(n_states: int, rho: float) -> TransitionMatrix:
    """Chain that stays put with probability 1-rho and otherwise jumps
    uniformly to one of the other states. Symmetric, hence reversible with
    uniform stationary distribution; |lambda2| = |1 - rho*n/(n-1)|."""
    if n_states < 2:
        raise ValueError("n_states must be >= 2")
    if not (0.0 < rho < 1.0):
        raise ValueError("rho must lie strictly inside (0, 1)")
    P = np.full((n_states, n_states), rho / (n_states - 1))
    np.fill_diagonal(P, 1.0 - rho)
    return TransitionMatrix(n_states, P)


def make_two_state_chain(a: float, b: float) -> TransitionMatrix:
    """Two states with flip probabilities a (0 -> 1) and b (1 -> 0)."""
    return TransitionMatrix(2, np.array([[1.0 - a, a], [b, 1.0 - b]]))


def random_reversible_chain(n_states: int, rng: np.random.Generator,
                            low: float = 0.2, high: float = 1.0) -> TransitionMatrix:
    """Reversible chain from symmetric positive weights W: P = W / rowsum(W),
    stationary distribution proportional to the row sums."""
    W = rng.uniform(low, high, (n_states, n_states))
    W = 0.5 * (W + W.T)
    P = W / W.sum(axis=1, keepdims=True)
    P = P / P.sum(axis=1, keepdims=True)
    return TransitionMatrix(n_states, P)


def random_symmetric_chain(n_states: int, rng: np.random.Generator) -> TransitionMatrix:
    """Symmetric doubly stochastic chain via symmetric Sinkhorn scaling."""
    A = rng.uniform(0.2, 1.0, (n_states, n_states))
    A = 0.5 * (A + A.T)
    for _ in range(10_000):
        d = 1.0 / np.sqrt(A.sum(axis=1))
        A = A * d[:, None] * d[None, :]
        if np.max(np.abs(A.sum(axis=1) - 1.0)) < 1e-14:
            break
    A = A / A.sum(axis=1, keepdims=True)
    return TransitionMatrix(n_states, A)


def _is_primitive(P: np.ndarray) -> bool:
    # Zero pattern of P^(n^2) via boolean repeated squaring; Wielandt's bound
    # puts the primitivity index below n^2, and positivity persists once hit.
    n = P.shape[0]
    B = P > 0.0
    step = 1
    while step < n * n:
        B = B @ B
        step *= 2
    return bool(B.all())


def _stationary_power_iteration(P: np.ndarray) -> np.ndarray:
    v = np.full(P.shape[0], 1.0 / P.shape[0])
    PT = P.T.copy()
    for _ in range(_PI_MAX_ITER):
        w = PT @ v
        w /= w.sum()
        if np.abs(w - v).max() < _PI_TOL:
            return w
        v = w
    return v


def _spectral_radius_deflated(P: np.ndarray, pi: np.ndarray) -> float:
    # |lambda2(P)| = spectral radius of P minus its stationary projector,
    # via Gelfand's formula on repeatedly squared, renormalized powers.
    # Robust to complex eigenvalue pairs of non-reversible chains.
    M = P - np.outer(np.ones_like(pi), pi)
    log_scale = 0.0
    for _ in range(50):
        c = np.linalg.norm(M, 2)
        if c == 0.0 or not np.isfinite(c):
            return 0.0
        M = (M / c) @ (M / c)
        log_scale = 2.0 * (log_scale + math.log(c))
    return math.exp((log_scale + math.log(max(np.linalg.norm(M, 2), 1e-300))) / 2**50)


def symmetrized_kernel(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Pi^(1/2) P Pi^(-1/2); self-adjoint exactly when the chain is reversible."""
    r = np.sqrt(pi)
    return (r[:, None] * P) / r[None, :]


def analyze_spectrum(chain: TransitionMatrix) -> ChainSpectrum:
    """Stationary distribution, |lambda2(P)|, and the detailed-balance check.

    Raises ErgodicityError for reducible/periodic chains or when |lambda2|
    is within 1e-10 of 1.
    """
    P = chain.probs
    if not _is_primitive(P):
        raise ErgodicityError("chain is not irreducible and aperiodic")
    pi = _stationary_power_iteration(P)
    db_gap = np.max(np.abs(pi[:, None] * P - pi[None, :] * P.T))
    reversible = bool(db_gap <= DETAILED_BALANCE_TOL)
    if reversible:
        w = np.linalg.eigvalsh(symmetrized_kernel(P, pi))
        lambda2 = max(abs(float(w[0])), abs(float(w[-2])))
    else:
        lambda2 = _spectral_radius_deflated(P, pi)
    if lambda2 >= 1.0 - ERGODICITY_TOL:
        raise ErgodicityError(f"second eigenvalue magnitude {lambda2} is numerically 1")
    return ChainSpectrum(stationary=pi, lambda2_abs=lambda2, reversible=reversible,
                         pi_min=float(pi.min()))


def _tv_from_stationary(Pt: np.ndarray, pi: np.ndarray) -> float:
    return float(0.5 * np.abs(Pt - pi[None, :]).sum(axis=1).max())


@dataclass(eq=False)
class MixingProfile:
    """Worst-start total-variation distance d_mix(t) with cached matrix powers."""

    chain: TransitionMatrix
    spectrum: ChainSpectrum
    _squares: list = field(default_factory=list, repr=False)
    _d_cache: dict = field(default_factory=dict, repr=False)

    def power(self, t: int) -> np.ndarray:
        """Exact P^t via binary decomposition of t over cached squarings."""
        if t < 0:
            raise ValueError("t must be >= 0")
        n = self.chain.n_states
        if t == 0:
            return np.eye(n)
        if not self._squares:
            self._squares.append(self.chain.probs.copy())
        while (1 << len(self._squares)) <= t:
            last = self._squares[-1]
            self._squares.append(last @ last)
        out = None
        bit = 0
        while (1 << bit) <= t:
            if t & (1 << bit):
                out = self._squares[bit] if out is None else out @ self._squares[bit]
            bit += 1
        return out

    def d_mix(self, t: int) -> float:
        """sup_x TV(P^t(x, .), pi), computed exactly."""
        if t not in self._d_cache:
            self._d_cache[t] = _tv_from_stationary(self.power(t), self.spectrum.stationary)
        return self._d_cache[t]

    def tau_mix(self, eps: float) -> int:
        """Smallest t >= 1 with d_mix(t) <= eps (doubling, then bisection)."""
        if not (0.0 < eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        hi = 1
        while self.d_mix(hi) > eps:
            hi *= 2
        lo = hi // 2  # d_mix(lo) > eps (or lo = 0)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.d_mix(mid) <= eps:
                hi = mid
            else:
                lo = mid
        return hi

    @property
    def tau_mix_quarter(self) -> int:
        return self.tau_mix(0.25)


def mixing_profile(chain: TransitionMatrix, spectrum: ChainSpectrum) -> MixingProfile:
    return MixingProfile(chain, spectrum)


def d_mix(chain: TransitionMatrix, spectrum: ChainSpectrum, t: int) -> float:
    """Worst-start TV distance from stationarity after t steps."""
    return mixing_profile(chain, spectrum).d_mix(t)


def tau_mix(chain: TransitionMatrix, spectrum: ChainSpectrum, eps: float) -> int:
    """Smallest t >= 1 with d_mix(t) <= eps."""
    return mixing_profile(chain, spectrum).tau_mix(eps)


def _inverse_cdf(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def sample_path(chain: TransitionMatrix, spectrum: ChainSpectrum,
                length: int, seed: int) -> np.ndarray:
    """Stationary path: first state drawn from pi, then categorical steps.

    All uniforms come from one seeded generator, so the path is a pure
    function of the seed on every backend.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    u = np.random.default_rng(seed).random(length)
    pi_cdf = np.cumsum(spectrum.stationary)
    pi_cdf[-1] = 1.0
    s0 = _inverse_cdf(pi_cdf, u[0])
    if length == 1:
        return np.array([s0], dtype=np.int64)
    cdf = np.cumsum(chain.probs, axis=1)
    cdf[:, -1] = 1.0
    return _kernels.walk_states(cdf, u[1:], s0)


def reversed_conditional(chain: TransitionMatrix, spectrum: ChainSpectrum,
                         k: int) -> np.ndarray:
    """Matrix R with R[t, s] = P(state k steps in the past = s | current = t),
    for the stationary chain; computed from the exact joint law. For a
    reversible chain this equals P^k row for row.
    """
    if not spectrum.reversible:
        raise ReversibilityError("reversed conditional kernel requires a reversible chain")
    if k < 0:
        raise ValueError("k must be >= 0")
    pi = spectrum.stationary
    Pk = mixing_profile(chain, spectrum).power(k)
    joint = pi[:, None] * Pk          # joint[s, t] = pi(s) P^k(s, t)
    return joint.T / pi[:, None]


def spectral_deviation(chain: TransitionMatrix, spectrum: ChainSpectrum,
                       t: int) -> np.ndarray:
    """Pi^(1/2) (P^t - 1 1^T Pi) Pi^(-1/2): the similarity-transformed
    deviation of the t-step kernel from its stationary projector. For a
    reversible chain its operator norm is at most |lambda2(P)|^t."""
    pi = spectrum.stationary
    Pt = mixing_profile(chain, spectrum).power(t)
    r = np.sqrt(pi)
    return (r[:, None] * (Pt - pi[None, :])) / r[None, :]
