import numpy as np
import pytest

from mcpca.errors import DegenerateGapError
from mcpca.markov import analyze_spectrum, make_rho_chain, sample_path
from mcpca.statedist import (BERNOULLI, UNIFORM, BaseNoise, banded_covariance,
                             draw_path_samples, draw_sample,
                             estimate_assumption_bounds, from_covariances,
                             make_benchmark_states, total_covariance)

# dense symmetric eigensolver oracle, run once at desk scale and frozen
DESK_LAMBDA1 = 25.02911529182348
DESK_LAMBDA2 = 6.238796650959895
DESK_GAP = 18.790318640863585


def bench_dist(n_states=10, dim=50, sigma_beta=1.0, seed=7, noise=BERNOULLI):
    return make_benchmark_states(n_states, dim, sigma_beta, seed=seed, noise=noise)


class TestBaseNoise:
    def test_moments_statistical(self):
        # 1e5-sample check of the unit mean/variance normalization, 3 sigma
        rng = np.random.default_rng(0)
        for noise in (BaseNoise(UNIFORM), BaseNoise(BERNOULLI, 0.03)):
            z = noise.draw(rng, 100_000)
            m4 = noise.fourth_moment()
            assert abs(z.mean()) < 3.0 / np.sqrt(len(z))
            assert abs((z**2).mean() - 1.0) < 3.0 * np.sqrt((m4 - 1.0) / len(z))

    def test_uniform_fourth_moment_quadrature(self):
        # independent oracle: Gauss-Legendre quadrature of z^4 over the support
        nodes, weights = np.polynomial.legendre.leggauss(8)
        s3 = np.sqrt(3.0)
        quad = np.sum(weights * (s3 * nodes) ** 4) / 2.0
        assert BaseNoise(UNIFORM).fourth_moment() == pytest.approx(quad, rel=1e-12)

    def test_bernoulli_fourth_moment_enumeration(self):
        p = 0.04
        lo, hi = BaseNoise(BERNOULLI, p).coordinate_support()
        enum = (1 - p) * lo**4 + p * hi**4
        assert BaseNoise(BERNOULLI, p).fourth_moment() == pytest.approx(enum, rel=1e-12)
        # support is the standardized two-point law
        assert (1 - p) * lo + p * hi == pytest.approx(0.0, abs=1e-12)
        assert (1 - p) * lo**2 + p * hi**2 == pytest.approx(1.0, rel=1e-12)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            BaseNoise(BERNOULLI)
        with pytest.raises(ValueError):
            BaseNoise(UNIFORM, 0.1)
        with pytest.raises(ValueError):
            BaseNoise("gaussian")


class TestBenchmarkConstruction:
    def test_decay_rate_endpoints(self):
        # c_1 = 1 and c_n = 10: recover c_s from the (0, 1) entry
        dist = bench_dist(dim=10)
        scales = 5.0 * np.arange(1, 11, dtype=float) ** -1.0
        c_first = -np.log(dist.covariances[0][0, 1] / (scales[0] * scales[1]))
        c_last = -np.log(dist.covariances[-1][0, 1] / (scales[0] * scales[1]))
        assert c_first == pytest.approx(1.0, rel=1e-12)
        assert c_last == pytest.approx(10.0, rel=1e-12)

    def test_full_scale_gap_near_twenty(self):
        dist = bench_dist(dim=1000)
        chain = make_rho_chain(10, 0.2)
        spec = analyze_spectrum(chain)
        truth = total_covariance(dist, spec.stationary)
        assert abs(truth.gap - 20.0) < 2.5

    def test_desk_scale_matches_frozen_eigensolver_oracle(self):
        dist = bench_dist(dim=50)
        truth = total_covariance(dist, np.full(10, 0.1))
        assert truth.lambda1 == pytest.approx(DESK_LAMBDA1, abs=1e-8)
        assert truth.lambda2 == pytest.approx(DESK_LAMBDA2, abs=1e-8)
        assert truth.gap == pytest.approx(DESK_GAP, abs=1e-8)

    def test_factor_reconstruction(self):
        dist = bench_dist(dim=40)
        for s in range(dist.n_states):
            L = dist.factors[s]
            S = dist.covariances[s]
            rel = np.linalg.norm(L @ L.T - S) / np.linalg.norm(S)
            assert rel <= 1e-8

    def test_bernoulli_p_drawn_once_in_range(self):
        dist = bench_dist()
        assert 0.0 < dist.base_noise.p < 0.05
        again = bench_dist()
        assert again.base_noise.p == dist.base_noise.p

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            make_benchmark_states(10, 50, 0.0, seed=1)
        with pytest.raises(ValueError):
            make_benchmark_states(1, 50, 1.0, seed=1)
        with pytest.raises(ValueError):
            make_benchmark_states(10, 50, 1.0, seed=1, noise="cauchy")


class TestDrawSample:
    def test_zero_factor_gives_zero(self):
        dist = from_covariances(np.zeros((3, 4, 4)), BaseNoise(UNIFORM))
        x = draw_sample(dist, 1, np.random.default_rng(0))
        assert np.array_equal(x, np.zeros(4))

    def test_out_of_range_state(self):
        dist = bench_dist(dim=5)
        with pytest.raises(ValueError):
            draw_sample(dist, 10, np.random.default_rng(0))

    def test_empirical_mean_vanishes(self):
        dist = bench_dist(dim=5, noise=UNIFORM)
        rng = np.random.default_rng(42)
        X = draw_path_samples(dist, np.full(10**6, 3), rng)
        sigmas = np.sqrt(np.diag(dist.covariances[3]))
        assert np.all(np.abs(X.mean(axis=0)) < 4.0 * sigmas / 1e3)

    def test_empirical_covariance_one_percent(self):
        # well-conditioned single state so 1e6 draws resolve every entry to 1%
        sigma = banded_covariance(5, -np.log(0.8), np.full(5, np.sqrt(2.0)))
        dist = from_covariances(sigma[None, :, :], BaseNoise(UNIFORM))
        X = draw_path_samples(dist, np.zeros(10**6, dtype=np.int64),
                              np.random.default_rng(2))
        emp = X.T @ X / len(X)
        assert np.max(np.abs(emp - sigma) / np.abs(sigma)) < 0.01

    def test_path_samples_match_per_state_covariances(self):
        dist = bench_dist(dim=6, noise=UNIFORM)
        chain = make_rho_chain(10, 0.5)
        spec = analyze_spectrum(chain)
        path = sample_path(chain, spec, 2000, seed=5)
        X = draw_path_samples(dist, path, np.random.default_rng(5))
        assert X.shape == (2000, 6)
        # rows for one state only mix that state's factor
        s0 = path[0]
        z = np.linalg.lstsq(dist.factors[s0], X[0], rcond=None)[0]
        assert np.allclose(dist.factors[s0] @ z, X[0], atol=1e-8)


class TestTotalCovariance:
    def test_single_state_mixture(self):
        rng = np.random.default_rng(3)
        root = rng.standard_normal((4, 4))
        sigma = root @ root.T + np.diag([3.0, 2.0, 1.0, 0.5])
        dist = from_covariances(sigma[None, :, :], BaseNoise(UNIFORM))
        truth = total_covariance(dist, np.array([1.0]))
        w, V = np.linalg.eigh(sigma)
        assert truth.lambda1 == pytest.approx(w[-1], rel=1e-12)
        assert abs(truth.v1 @ V[:, -1]) == pytest.approx(1.0, abs=1e-10)

    def test_mixture_identity_brute_force(self):
        dist = bench_dist(dim=12)
        pi = np.random.default_rng(0).dirichlet(np.ones(10))
        truth = total_covariance(dist, pi)
        brute = sum(pi[s] * dist.covariances[s] for s in range(10))
        assert np.max(np.abs(truth.sigma - brute)) <= 1e-12

    def test_degenerate_gap_rejected(self):
        sigmas = np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
        dist = from_covariances(sigmas, BaseNoise(UNIFORM))
        with pytest.raises(DegenerateGapError):
            total_covariance(dist, np.array([0.5, 0.5]))

    def test_eigenbasis_orthonormal_and_residual(self):
        dist = bench_dist(dim=30)
        truth = total_covariance(dist, np.full(10, 0.1))
        basis = np.column_stack([truth.v1, truth.v_perp])
        assert np.max(np.abs(basis.T @ basis - np.eye(30))) < 1e-10
        resid = np.linalg.norm(truth.sigma @ truth.v1 - truth.lambda1 * truth.v1)
        assert resid <= 1e-8 * truth.lambda1

    def test_stationary_stream_mean_shrinks(self):
        dist = bench_dist(dim=8, noise=UNIFORM)
        chain = make_rho_chain(10, 0.2)
        spec = analyze_spectrum(chain)
        truth = total_covariance(dist, spec.stationary)
        path = sample_path(chain, spec, 10**6, seed=31)
        X = draw_path_samples(dist, path, np.random.default_rng(31))
        sig = np.sqrt(np.diag(truth.sigma))
        norms = {}
        for n in (10**4, 10**5, 10**6):
            mean = X[:n].mean(axis=0)
            # states are conditionally independent of the noise, so the mean
            # has exactly covariance Sigma / n; check per-coordinate 3 sigma
            assert np.all(np.abs(mean) < 3.0 * sig / np.sqrt(n))
            norms[n] = np.linalg.norm(mean)
        assert norms[10**6] < norms[10**4]


class TestAssumptionBounds:
    def test_degenerate_stream_is_zero(self):
        dist = from_covariances(np.zeros((2, 3, 3)), BaseNoise(UNIFORM))
        bounds = estimate_assumption_bounds(dist, np.array([0.5, 0.5]),
                                            n_probe=1000, seed=0)
        assert bounds.v_bound == 0.0
        assert bounds.m_bound == 0.0

    def test_uniform_scalar_support(self):
        # d=1, Sigma=1, uniform: X^2 in [0, 3] so ||X^2 - 1|| <= 2, est <= 2.4
        dist = from_covariances(np.ones((1, 1, 1)), BaseNoise(UNIFORM))
        bounds = estimate_assumption_bounds(dist, np.array([1.0]),
                                            n_probe=5000, seed=1)
        assert bounds.m_bound <= 2.4 + 1e-9
        assert bounds.m_bound > 1.0

    def test_variance_below_norm_squared(self):
        for seed in range(3):
            dist = bench_dist(dim=10, seed=seed, noise=UNIFORM)
            bounds = estimate_assumption_bounds(dist, np.full(10, 0.1),
                                                n_probe=1000, seed=seed)
            assert bounds.v_bound <= bounds.m_bound**2 + 1e-9
            # schedules assume the normalization m_bound + lambda1 >= 1
            truth = total_covariance(dist, np.full(10, 0.1))
            assert bounds.m_bound + truth.lambda1 >= 1.0

    def test_small_probe_count_rejected(self):
        dist = bench_dist(dim=5)
        with pytest.raises(ValueError):
            estimate_assumption_bounds(dist, np.full(10, 0.1), n_probe=10, seed=0)
