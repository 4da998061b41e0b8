"""Brute-force numerical verification of the spectral machinery on small
instances.

Every check here is deterministic: conditional laws come from exact matrix
powers and Bayes' rule, and the moment constants are computed in closed
form, so each assertion is a hard inequality rather than a statistical
test. The four checks cover

- qnorm: the similarity-transformed deviation of P^t from its stationary
  projector has operator norm at most |lambda2(P)|^t;
- covdecay: the conditional cross-covariance of centered sample outer
  products decays geometrically in the time separation;
- prodapprox: short products of (I + eta_t X_t X_t^T) stay close to the
  identity (coarse bound) and to identity-plus-linear-term (fine bound);
- revmix: the reversed conditional kernel is exactly as far from
  stationarity as the forward kernel.

Exact moment constants: with X = L z and z iid standardized coordinates
with fourth moment m4,

    E[||X||^2 X X^T] = tr(Sigma_s) Sigma_s + 2 Sigma_s^2
                       + (m4 - 3) L diag(L^T L) L^T,

which gives E[(X X^T - Sigma)^2] per state in closed form. The almost-sure
deviation bound is an exact maximum over the noise support: all 2^d sign
patterns for the two-point Bernoulli coordinates, and the cube vertices
(where the convex part of the norm is maximized) together with the
lambda1 floor attained at z = 0 for the uniform law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .markov import (ChainSpectrum, MixingProfile, TransitionMatrix, analyze_spectrum,
                     mixing_profile, random_reversible_chain, random_symmetric_chain,
                     reversed_conditional, sample_path, spectral_deviation)
from .seeds import mix64
from .statedist import (BERNOULLI, UNIFORM, BaseNoise, StateDistributionSet,
                        draw_path_samples, from_covariances)
from .streaming import StepSchedule

DEFAULT_CORPUS_SEED = 186282
MAX_STATES = 8
MAX_DIM = 6
QNORM_SLACK = 1e-10
REVMIX_TOL = 1e-12
PRODUCT_EPS = 0.01

SUITES = ("qnorm", "covdecay", "prodapprox", "revmix")


@dataclass(frozen=True)
class Violation:
    suite: str
    instance_id: int
    location: str
    observed: float
    bound: float

    def line(self) -> str:
        return "\t".join([self.suite, str(self.instance_id), self.location,
                          repr(self.observed), repr(self.bound)])


@dataclass(frozen=True, eq=False)
class SmallInstance:
    """A chain/distribution pair small enough for exact enumeration."""

    instance_id: int
    chain: TransitionMatrix
    spectrum: ChainSpectrum
    dist: StateDistributionSet
    profile: MixingProfile
    sigma: np.ndarray
    lambda1: float
    g_mats: np.ndarray      # G(s) = Sigma_s - Sigma (state means are zero)
    v_exact: float          # ||E[(XX^T - Sigma)^2]||_2, exact
    m_exact: float          # sup ||XX^T - Sigma||_2 over the noise support


def exact_square_deviation(dist: StateDistributionSet, pi: np.ndarray,
                           sigma: np.ndarray) -> np.ndarray:
    """E[(X X^T - Sigma)^2] under the stationary state mixture, exactly."""
    m4 = dist.base_noise.fourth_moment()
    out = np.zeros_like(sigma)
    sig2 = sigma @ sigma
    for s in range(dist.n_states):
        L = dist.factors[s]
        S = dist.covariances[s]
        col_sq = np.einsum("ij,ij->j", L, L)           # diag(L^T L)
        fourth = np.trace(S) * S + 2.0 * (S @ S) + (m4 - 3.0) * (L * col_sq) @ L.T
        out += pi[s] * (fourth - S @ sigma - sigma @ S + sig2)
    return out


def _support_vectors(noise: BaseNoise, dim: int) -> np.ndarray:
    lo, hi = noise.coordinate_support()
    grid = np.array([lo, hi])
    bits = (np.arange(2**dim)[:, None] >> np.arange(dim)[None, :]) & 1
    return grid[bits]


def exact_norm_bound(dist: StateDistributionSet, sigma: np.ndarray,
                     lambda1: float) -> float:
    """sup over the sample support of ||x x^T - Sigma||_2, exactly.

    Bernoulli support is the full 2^d lattice of coordinate values. For the
    uniform cube the positive part of the norm is convex in z (maximized at
    vertices) and the negative part never exceeds lambda1, attained at the
    interior point z = 0.
    """
    Z = _support_vectors(dist.base_noise, dist.dim)
    uniform = dist.base_noise.kind == UNIFORM
    worst = lambda1 if uniform else 0.0
    for s in range(dist.n_states):
        X = Z @ dist.factors[s].T
        for x in X:
            w = np.linalg.eigvalsh(np.outer(x, x) - sigma)
            val = float(w[-1]) if uniform else float(max(abs(w[0]), abs(w[-1])))
            worst = max(worst, val)
    return worst


def build_instance(chain: TransitionMatrix, dist: StateDistributionSet,
                   instance_id: int = 0) -> SmallInstance:
    if chain.n_states > MAX_STATES or dist.dim > MAX_DIM:
        raise ValueError("instance too large for exact enumeration")
    spectrum = analyze_spectrum(chain)
    pi = spectrum.stationary
    sigma = np.einsum("s,sij->ij", pi, dist.covariances)
    lambda1 = float(np.linalg.eigvalsh(sigma)[-1])
    g_mats = dist.covariances - sigma[None, :, :]
    drift = np.einsum("s,sij->ij", pi, g_mats)
    if np.abs(drift).max() > 1e-12:
        raise ValueError("stationarity identity sum_s pi(s) G(s) = 0 failed")
    v_exact = float(np.abs(np.linalg.eigvalsh(
        exact_square_deviation(dist, pi, sigma))).max())
    m_exact = exact_norm_bound(dist, sigma, lambda1)
    return SmallInstance(instance_id=instance_id, chain=chain, spectrum=spectrum,
                         dist=dist, profile=mixing_profile(chain, spectrum),
                         sigma=sigma, lambda1=lambda1, g_mats=g_mats,
                         v_exact=v_exact, m_exact=m_exact)


def random_instance(index: int, master_seed: int = DEFAULT_CORPUS_SEED) -> SmallInstance:
    """Reproducible random instance; every fourth chain is symmetric."""
    rng = np.random.default_rng(mix64(master_seed, index))
    n = int(rng.integers(2, MAX_STATES + 1))
    d = int(rng.integers(2, MAX_DIM + 1))
    if index % 4 == 0:
        chain = random_symmetric_chain(n, rng)
    else:
        chain = random_reversible_chain(n, rng)
    if rng.random() < 0.5:
        noise = BaseNoise(BERNOULLI, float(rng.uniform(0.02, 0.05)))
    else:
        noise = BaseNoise(UNIFORM)
    roots = rng.standard_normal((n, d, d)) * 0.7
    sigmas = np.einsum("sij,skj->sik", roots, roots)
    return build_instance(chain, from_covariances(sigmas, noise), instance_id=index)


def make_corpus(n_instances: int,
                master_seed: int = DEFAULT_CORPUS_SEED) -> list[SmallInstance]:
    return [random_instance(i, master_seed) for i in range(n_instances)]


def check_q_norm(instance: SmallInstance, t_max: int) -> list[tuple[int, float, float]]:
    """Rows (t, ||Q_t||_2, |lambda2|^t) for t = 1..t_max."""
    lam2 = instance.spectrum.lambda2_abs
    rows = []
    for t in range(1, t_max + 1):
        Q = spectral_deviation(instance.chain, instance.spectrum, t)
        rows.append((t, float(np.linalg.norm(Q, 2)), lam2**t))
    return rows


def q_norm_violations(instance: SmallInstance, t_max: int) -> list[Violation]:
    return [Violation("qnorm", instance.instance_id, f"t={t}", q, b + QNORM_SLACK)
            for t, q, b in check_q_norm(instance, t_max)
            if q > b + QNORM_SLACK]


def check_covariance_decay(instance: SmallInstance, k: int, S: np.ndarray,
                           eta: float) -> list[Violation]:
    """Exact conditional cross-covariance against the geometric-decay bound.

    For every separation a = j - i in 1..k and conditioning state x0, forms
    E[(X_i X_i^T - Sigma) S X_j X_j^T | s_{i+k} = x0] by summing the closed
    state-conditional expectations over the exact joint law
    P(s_i = s, s_j = t | s_{i+k} = x0) = pi(s) P^a(s,t) P^(k-a)(t,x0) / pi(x0),
    and asserts operator norm <= (|lambda2|^a V + 8 eta^2 M (M+lambda1)) ||S||_2.
    """
    prof = instance.profile
    if prof.d_mix(k) > eta * eta:
        raise ValueError("k must satisfy d_mix(k) <= eta^2 (k = tau_mix(eta^2))")
    pi = instance.spectrum.stationary
    lam2 = instance.spectrum.lambda2_abs
    s_norm = float(np.linalg.norm(S, 2))
    GS = np.einsum("sij,jk->sik", instance.g_mats, S)
    A = instance.dist.covariances
    slack = 8.0 * eta * eta * instance.m_exact * (instance.m_exact + instance.lambda1)
    out = []
    for a in range(1, k + 1):
        Pa = prof.power(a)
        Pb = prof.power(k - a)
        # C[t] = sum_s pi(s) P^a(s,t) G(s) S A(t)
        U = np.einsum("st,sij->tij", pi[:, None] * Pa, GS)
        C = np.einsum("tij,tjk->tik", U, A)
        bound = (lam2**a * instance.v_exact + slack) * s_norm
        for x0 in range(instance.chain.n_states):
            E = np.einsum("t,tij->ij", Pb[:, x0] / pi[x0], C)
            observed = float(np.linalg.norm(E, 2))
            if observed > bound + QNORM_SLACK:
                out.append(Violation("covdecay", instance.instance_id,
                                     f"j-i={a},x0={x0}", observed, bound))
    return out


def check_matrix_product_approx(instance: SmallInstance, n_windows: int, k: int,
                                schedule: StepSchedule, seed: int) -> list[Violation]:
    """Materialized window products against the two approximation bounds.

    Each window draws k consecutive stationary samples, forms the product
    prod_t (I + eta_t X_t X_t^T) explicitly, and asserts
      ||B - I||_2 <= (1 + eps) k eta_m (M + lambda1)            (coarse)
      ||B - I - sum_t eta_t X_t X_t^T||_2 <= k^2 eta_m^2 (M+lambda1)^2
    with eps = 1/100; eta_m is the largest step in the window. Requires
    eta_m k (M + lambda1) <= eps.
    """
    d = instance.dist.dim
    cap = instance.m_exact + instance.lambda1
    out = []
    for w in range(n_windows):
        rng = np.random.default_rng(mix64(seed, 2 * w + 1))
        start = int(rng.integers(1, 64))
        etas = schedule.eta(np.arange(start, start + k, dtype=np.float64))
        if etas[0] * k * cap > PRODUCT_EPS:
            raise ValueError("window violates eta * k * (M + lambda1) <= 1/100")
        path = sample_path(instance.chain, instance.spectrum, k, mix64(seed, 2 * w))
        X = draw_path_samples(instance.dist, path, rng)
        B = np.eye(d)
        linear = np.zeros((d, d))
        for t in range(k):
            outer = np.outer(X[t], X[t])
            B = (np.eye(d) + etas[t] * outer) @ B
            linear += etas[t] * outer
        coarse = float(np.linalg.norm(B - np.eye(d), 2))
        coarse_bound = (1.0 + PRODUCT_EPS) * k * etas[0] * cap
        if coarse > coarse_bound + QNORM_SLACK:
            out.append(Violation("prodapprox", instance.instance_id,
                                 f"window={w},order=1", coarse, coarse_bound))
        fine = float(np.linalg.norm(B - np.eye(d) - linear, 2))
        fine_bound = (k * etas[0] * cap) ** 2
        if fine > fine_bound + QNORM_SLACK:
            out.append(Violation("prodapprox", instance.instance_id,
                                 f"window={w},order=2", fine, fine_bound))
    return out


def check_reverse_mixing(instance: SmallInstance, k: int) -> list[Violation]:
    """Sup-TV of the reversed conditional kernel equals d_mix(k) exactly."""
    R = reversed_conditional(instance.chain, instance.spectrum, k)
    pi = instance.spectrum.stationary
    tv = float(0.5 * np.abs(R - pi[None, :]).sum(axis=1).max())
    target = instance.profile.d_mix(k)
    if abs(tv - target) > REVMIX_TOL:
        return [Violation("revmix", instance.instance_id, f"k={k}", tv, target)]
    return []


def _product_schedule(instance: SmallInstance, k: int) -> StepSchedule:
    # eta_1 k (M + lambda1) = 0.009 < 1/100, decaying as 1/(9 + i)
    target = 0.009 / (k * (instance.m_exact + instance.lambda1))
    beta = 9.0
    return StepSchedule(alpha=target * (beta + 1.0), beta=beta, gap=1.0)


def run_suite(suite: str, n_instances: int = 100,
              master_seed: int = DEFAULT_CORPUS_SEED,
              windows_per_instance: int = 10,
              product_window: int = 8) -> tuple[int, list[Violation]]:
    """Run one of qnorm|covdecay|prodapprox|revmix|all over the corpus.

    Returns (number of checks performed, violations).
    """
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    checks = 0
    violations: list[Violation] = []
    for i in range(n_instances):
        inst = random_instance(i, master_seed)
        if suite in ("qnorm", "all"):
            violations += q_norm_violations(inst, t_max=20)
            checks += 20
        if suite in ("covdecay", "all"):
            eta = 0.05
            k = inst.profile.tau_mix(eta * eta)
            rng = np.random.default_rng(mix64(master_seed, 10**6 + i))
            root = rng.standard_normal((inst.dist.dim, inst.dist.dim))
            for S in (np.eye(inst.dist.dim), root @ root.T):
                violations += check_covariance_decay(inst, k, S, eta)
                checks += k * inst.chain.n_states
        if suite in ("prodapprox", "all"):
            violations += check_matrix_product_approx(
                inst, windows_per_instance, product_window,
                _product_schedule(inst, product_window),
                seed=mix64(master_seed, 2 * 10**6 + i))
            checks += 2 * windows_per_instance
        if suite in ("revmix", "all"):
            for kk in range(0, 11):
                violations += check_reverse_mixing(inst, kk)
                checks += 1
    return checks, violations
