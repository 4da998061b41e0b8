import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcpca.errors import DegenerateGapError, EmptyTraceError
from mcpca.markov import analyze_spectrum, make_rho_chain, sample_path
from mcpca.seeds import mix64
from mcpca.statedist import (UNIFORM, BaseNoise, draw_path_samples, from_covariances,
                             total_covariance)
from mcpca.streaming import (NOISE_STREAM, W0_STREAM, OjaEstimator, StepSchedule,
                             checkpoint_grid, oja_step, practical_schedule,
                             run_downsampled_oja, run_oja, sin2_error, conservative_beta,
                             conservative_schedule)


def _beta_reference(alpha, gap, delta, tau, eta0, v, m, lam1, lam2):
    # straight-line re-implementation, deliberately using different calls
    mix_term = tau * math.log(1.0 / eta0) * (m + lam1) * (m + lam1)
    var_term = (v / (1.0 - lam2) + lam1 * lam1) / 100.0
    top = 1000.0 * alpha * alpha * (mix_term if mix_term > var_term else var_term)
    return top / (gap * gap * math.log1p(delta / 200.0))


class TestConservativeBeta:
    def test_numeric_against_dual_implementation(self):
        args = dict(alpha=3.0, gap=1.0, delta=0.5, tau_mix=6, eta0=1.0 / math.e,
                    v_bound=4.0, m_bound=3.0, lambda1=2.0, lambda2_abs=0.5)
        got = conservative_beta(**args)
        want = _beta_reference(3.0, 1.0, 0.5, 6, 1.0 / math.e, 4.0, 3.0, 2.0, 0.5)
        assert got == pytest.approx(want, rel=1e-12)

    def test_monotone_in_variance_bound(self):
        base = dict(alpha=3.0, gap=1.0, delta=0.5, tau_mix=6, eta0=1.0 / math.e,
                    m_bound=3.0, lambda1=2.0, lambda2_abs=0.5)
        for v in (0.5, 4.0, 100.0, 1e4):
            assert (conservative_beta(v_bound=2 * v, **base)
                    >= conservative_beta(v_bound=v, **base))

    def test_linear_in_tau_when_mix_term_dominates(self):
        base = dict(alpha=3.0, gap=1.0, delta=0.5, eta0=1.0 / math.e,
                    v_bound=1e-6, m_bound=3.0, lambda1=2.0, lambda2_abs=0.5)
        b1 = conservative_beta(tau_mix=50, **base)
        b2 = conservative_beta(tau_mix=100, **base)
        assert b2 == pytest.approx(2.0 * b1, rel=1e-12)

    def test_degenerate_gap_rejected(self):
        with pytest.raises(DegenerateGapError):
            conservative_beta(3.0, 0.0, 0.5, 6, 1 / math.e, 4.0, 3.0, 2.0, 0.5)

    def test_bad_alpha_delta(self):
        with pytest.raises(ValueError):
            conservative_beta(2.0, 1.0, 0.5, 6, 1 / math.e, 4.0, 3.0, 2.0, 0.5)
        with pytest.raises(ValueError):
            conservative_beta(3.0, 1.0, 1.5, 6, 1 / math.e, 4.0, 3.0, 2.0, 0.5)


class TestStepSchedule:
    def test_strictly_decreasing_positive(self):
        sched = practical_schedule(gap=18.8, lambda2_abs=7 / 9)
        etas = sched.etas(1000)
        assert np.all(etas > 0)
        assert np.all(np.diff(etas) < 0)

    def test_practical_defaults(self):
        sched = practical_schedule(gap=2.0, lambda2_abs=0.5)
        assert sched.alpha == 5.0
        assert sched.beta == pytest.approx(10.0)

    def test_downsampled_divides_beta(self):
        sched = practical_schedule(gap=2.0, lambda2_abs=0.5)
        assert sched.downsampled(10).beta == pytest.approx(sched.beta / 10)

    def test_conservative_mode_constraints(self):
        sched = conservative_schedule(gap=1.0, delta=0.5, tau_mix=6, v_bound=4.0,
                                 m_bound=3.0, lambda1=2.0, lambda2_abs=0.5)
        assert sched.eta0 <= 1.0 / math.e
        assert sched.alpha > 2.0
        with pytest.raises(ValueError):
            StepSchedule(alpha=2.5, beta=1e-3, gap=1.0, mode="conservative")

    def test_aggressive_schedule_flagged(self):
        assert StepSchedule(alpha=5.0, beta=1.0, gap=0.1).eta0_exceeds_one
        assert not practical_schedule(gap=18.8, lambda2_abs=7 / 9).eta0_exceeds_one


class TestOjaStep:
    def test_orthogonal_sample_is_noop(self):
        est = OjaEstimator(w=np.array([1.0, 0.0]))
        oja_step(est, np.array([0.0, 1.0]), eta=1.0)
        assert np.allclose(est.w, [1.0, 0.0], atol=1e-15)
        assert est.t == 1

    def test_hand_example(self):
        # (I + x x^T) w for w = e1, x = (1, 1): (2, 1), normalized (2,1)/sqrt5
        est = OjaEstimator(w=np.array([1.0, 0.0]))
        oja_step(est, np.array([1.0, 1.0]), eta=1.0)
        assert np.allclose(est.w, np.array([2.0, 1.0]) / np.sqrt(5.0), atol=1e-14)
        # materialized-matrix oracle
        mat = np.eye(2) + np.outer([1.0, 1.0], [1.0, 1.0])
        ref = mat @ np.array([1.0, 0.0])
        assert np.allclose(est.w, ref / np.linalg.norm(ref), atol=1e-14)

    def test_zero_eta_keeps_w(self):
        w = np.random.default_rng(0).standard_normal(5)
        w /= np.linalg.norm(w)
        est = OjaEstimator(w=w.copy())
        oja_step(est, np.random.default_rng(1).standard_normal(5), eta=0.0)
        assert np.allclose(est.w, w, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    w=arrays(np.float64, 5, elements=st.floats(-3, 3)),
    x=arrays(np.float64, 5, elements=st.floats(-5, 5)),
    eta=st.floats(0.0, 10.0),
)
def test_rank_one_matches_materialized_update(w, x, eta):
    nrm = np.linalg.norm(w)
    if nrm < 1e-3:
        w = np.ones(5)
        nrm = np.linalg.norm(w)
    w = w / nrm
    est = oja_step(OjaEstimator(w=w.copy()), x, eta)
    assert abs(np.linalg.norm(est.w) - 1.0) <= 1e-12
    ref = (np.eye(5) + eta * np.outer(x, x)) @ w
    ref /= np.linalg.norm(ref)
    assert np.linalg.norm(est.w - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_unit_norm_along_random_streams(seed):
    rng = np.random.default_rng(seed)
    est = OjaEstimator(w=np.array([1.0, 0.0, 0.0]))
    for _ in range(50):
        oja_step(est, rng.standard_normal(3) * rng.uniform(0, 4), rng.uniform(0, 2))
        assert abs(np.linalg.norm(est.w) - 1.0) <= 1e-12


class TestSin2:
    def test_endpoints(self):
        v = np.array([1.0, 0.0])
        assert sin2_error(v, v) == 0.0
        assert sin2_error(np.array([0.0, 1.0]), v) == 1.0

    def test_sign_invariance(self):
        rng = np.random.default_rng(4)
        w = rng.standard_normal(6)
        w /= np.linalg.norm(w)
        v = rng.standard_normal(6)
        v /= np.linalg.norm(v)
        vals = {sin2_error(s * w, t * v) for s in (1, -1) for t in (1, -1)}
        assert len(vals) == 1
        assert 0.0 <= vals.pop() <= 1.0


def _constant_direction_setup(dim=4, scale=100.0):
    # two identical states so the chain is irrelevant; all mass on one axis
    sigma = np.zeros((dim, dim))
    sigma[0, 0] = scale
    dist = from_covariances(np.stack([sigma, sigma]), BaseNoise(UNIFORM))
    chain = make_rho_chain(2, 0.5)
    spec = analyze_spectrum(chain)
    truth = total_covariance(dist, spec.stationary)
    return chain, spec, dist, truth


class TestRunOja:
    def test_rank_one_data_converges_to_machine_zero(self):
        chain, spec, dist, truth = _constant_direction_setup()
        path = sample_path(chain, spec, 10, seed=3)
        sched = StepSchedule(alpha=1000.0, beta=1.0, gap=truth.gap)
        trace = run_oja(path, dist, sched, np.array([10]), truth, seed=5)
        assert trace.errors[-1] <= 1e-15

    def test_product_form_equivalence(self):
        # after n steps the iterate is parallel to the materialized product
        # applied to w0, checked at d = 10, n = 100
        rng = np.random.default_rng(77)
        d, n = 10, 100
        X = rng.standard_normal((n, d))
        etas = 0.2 / (5.0 + np.arange(1, n + 1))
        w0 = rng.standard_normal(d)
        w0 /= np.linalg.norm(w0)
        est = OjaEstimator(w=w0.copy())
        B = np.eye(d)
        for t in range(n):
            oja_step(est, X[t], etas[t])
            B = (np.eye(d) + etas[t] * np.outer(X[t], X[t])) @ B
        u = B @ w0
        u /= np.linalg.norm(u)
        assert sin2_error(est.w, u) <= 1e-8

    def test_checkpoint_validation(self):
        chain, spec, dist, truth = _constant_direction_setup()
        path = sample_path(chain, spec, 50, seed=1)
        sched = practical_schedule(truth.gap, spec.lambda2_abs)
        with pytest.raises(ValueError):
            run_oja(path, dist, sched, np.array([0, 10]), truth, seed=1)
        with pytest.raises(ValueError):
            run_oja(path, dist, sched, np.array([10, 100]), truth, seed=1)

    def test_same_seed_reproduces_trace(self):
        chain, spec, dist, truth = _constant_direction_setup()
        path = sample_path(chain, spec, 200, seed=9)
        sched = practical_schedule(truth.gap, spec.lambda2_abs)
        cps = np.array([10, 50, 200])
        a = run_oja(path, dist, sched, cps, truth, seed=11)
        b = run_oja(path, dist, sched, cps, truth, seed=11)
        assert np.array_equal(a.errors, b.errors)


class TestDownsampled:
    def _setup(self, n=2000, dim=6):
        chain = make_rho_chain(10, 0.2)
        spec = analyze_spectrum(chain)
        rng = np.random.default_rng(0)
        roots = rng.standard_normal((10, dim, dim))
        sig = np.einsum("sij,skj->sik", roots, roots)
        sig[0, 0, 0] += 10.0  # split the top eigenvalues
        dist = from_covariances(sig, BaseNoise(UNIFORM))
        truth = total_covariance(dist, spec.stationary)
        path = sample_path(chain, spec, n, seed=21)
        sched = practical_schedule(truth.gap, spec.lambda2_abs)
        return chain, spec, dist, truth, path, sched

    def test_k_one_identical_to_full(self):
        _, _, dist, truth, path, sched = self._setup()
        cps = checkpoint_grid(len(path))
        full = run_oja(path, dist, sched, cps, truth, seed=33)
        down = run_downsampled_oja(path, dist, sched, 1, cps, truth, seed=33)
        assert np.array_equal(full.errors, down.errors)

    def test_equals_oja_on_prethinned_stream(self):
        # independent route: thin the samples by hand and drive oja_step
        _, _, dist, truth, path, sched = self._setup()
        k = 7
        cps = np.array([50, 500, 2000])
        seed = 55
        down = run_downsampled_oja(path, dist, sched.downsampled(k), k, cps,
                                   truth, seed=seed)
        X = draw_path_samples(dist, path,
                              np.random.default_rng(mix64(seed, NOISE_STREAM)))
        thinned = X[k - 1::k]
        est = OjaEstimator(
            w=OjaEstimator.random_init(dist.dim, mix64(seed, W0_STREAM)).w)
        dsched = sched.downsampled(k)
        errs = []
        counts = cps // k
        for t in range(len(thinned)):
            errs += [sin2_error(est.w, truth.v1)] * int(np.sum(counts == t))
            oja_step(est, thinned[t], dsched.eta(t + 1))
        errs += [sin2_error(est.w, truth.v1)] * int(np.sum(counts == len(thinned)))
        assert np.allclose(down.errors, errs, atol=1e-12)

    def test_update_count(self):
        # k = 10 over 1e5 samples performs exactly 1e4 updates
        chain, spec, dist, truth = _constant_direction_setup(dim=3)
        path = sample_path(chain, spec, 10**5, seed=2)
        sched = StepSchedule(alpha=1000.0, beta=1.0, gap=truth.gap)
        X = draw_path_samples(dist, path, np.random.default_rng(1))
        assert len(X[9::10]) == 10**4
        trace = run_downsampled_oja(path, dist, sched, 10, np.array([10**5]),
                                    truth, seed=3, samples=X)
        assert trace.errors.shape == (1,)

    def test_oversized_skip_rejected(self):
        _, _, dist, truth, path, sched = self._setup(n=100)
        with pytest.raises(EmptyTraceError):
            run_downsampled_oja(path, dist, sched, 101, np.array([100]),
                                truth, seed=1)

    def test_theory_skip_factor(self):
        # the analysis' choice k = tau_mix(eta_n^2) is usable directly
        from mcpca.markov import mixing_profile
        from mcpca.streaming import theory_skip_factor

        chain, spec, dist, truth, path, sched = self._setup(n=2000)
        prof = mixing_profile(chain, spec)
        k = theory_skip_factor(prof, sched, len(path))
        eta_n = sched.eta(len(path))
        assert prof.d_mix(k) <= eta_n**2
        assert k == prof.tau_mix(eta_n**2)
        trace = run_downsampled_oja(path, dist, sched.downsampled(k), k,
                                    np.array([2000]), truth, seed=4)
        assert trace.errors.shape == (1,)


class TestCheckpointGrid:
    def test_grid_shape(self):
        g = checkpoint_grid(100_000)
        assert g[0] == 100
        assert g[-1] == 100_000
        assert np.all(np.diff(g) > 0)
        ratios = g[1:] / g[:-1].astype(float)
        assert ratios.max() <= 1.26

    def test_small_horizon(self):
        assert np.array_equal(checkpoint_grid(50), [50])
