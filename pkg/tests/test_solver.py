import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    brute_distortion,
    brute_lagrangian,
    brute_marginal_update,
    identity_state,
    random_state,
)
from distributed_rd.io import parse_problem
from distributed_rd.oracles import kkt_residual
from distributed_rd.probability import binary_entropy
from distributed_rd.problem import ProblemSpec, two_bsc_problem, wyner_ziv_problem
from distributed_rd.region import marginal_information_rates
from distributed_rd.solver import (
    ConditionalDependenceWarning,
    SolverConfig,
    expected_distortion,
    initial_state,
    lagrangian,
    rates,
    solve,
    update_decoder,
    update_encoder,
    update_marginal,
)

H3 = binary_entropy(0.3)


class TestObjective:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_lagrangian_matches_nested_loops(self, two_bsc, seed):
        st_ = random_state(two_bsc, seed)
        assert lagrangian(two_bsc, st_, 1.7) == pytest.approx(brute_lagrangian(two_bsc, st_, 1.7), abs=1e-12)

    def test_distortion_matches_nested_loops(self, two_bsc):
        st_ = random_state(two_bsc, 5)
        assert expected_distortion(two_bsc, st_) == pytest.approx(brute_distortion(two_bsc, st_), abs=1e-14)

    def test_dependent_pair_lagrangian(self):
        spec = parse_problem("dependent_pair")
        st_ = random_state(spec, 3)
        assert lagrangian(spec, st_, 0.4) == pytest.approx(brute_lagrangian(spec, st_, 0.4), abs=1e-12)

    def test_zero_rate_distortion(self, two_bsc):
        # constant encoders: estimate each bit from y alone, error 0.3 + 0.3
        st_ = initial_state(two_bsc, "uniform")
        st_.q = [np.tile([1.0, 0.0, 0.0], (2, 1)) for _ in range(2)]
        st_.Q = [update_marginal(two_bsc, st_, i) for i in range(2)]
        st_.dec = update_decoder(two_bsc, st_)
        assert rates(two_bsc, st_) == [0.0, 0.0]
        assert expected_distortion(two_bsc, st_) == pytest.approx(0.6, abs=1e-12)

    def test_identity_encoders(self, two_bsc):
        spec, st_ = identity_state(two_bsc)
        assert rates(spec, st_) == pytest.approx([H3, H3], abs=1e-12)
        assert marginal_information_rates(spec, st_) == pytest.approx([H3, H3], abs=1e-12)
        assert expected_distortion(spec, st_) == pytest.approx(0.0, abs=1e-15)


class TestUpdates:
    @pytest.mark.parametrize("seed", [0, 4])
    def test_marginal_update_matches_full_joint_form(self, two_bsc, seed):
        st_ = random_state(two_bsc, seed)
        for m in range(2):
            assert np.allclose(update_marginal(two_bsc, st_, m), brute_marginal_update(two_bsc, st_, m), atol=1e-13)

    def test_marginal_update_is_minimizer(self, two_bsc):
        st_ = random_state(two_bsc, 7)
        st_.Q[0] = update_marginal(two_bsc, st_, 0)
        base = lagrangian(two_bsc, st_, 1.0)
        rng = np.random.default_rng(0)
        for _ in range(20):
            other = st_.copy()
            other.Q[0] = rng.dirichlet(np.ones(3), size=2)
            assert lagrangian(two_bsc, other, 1.0) >= base - 1e-12

    def test_encoder_update_is_minimizer(self, two_bsc):
        st_ = random_state(two_bsc, 8)
        st_.q[1] = update_encoder(two_bsc, st_, 1, 2.0)
        base = lagrangian(two_bsc, st_, 2.0)
        rng = np.random.default_rng(1)
        for scale in (1e-1, 1e-3):
            for _ in range(10):
                other = st_.copy()
                pert = st_.q[1] * np.exp(scale * rng.standard_normal(st_.q[1].shape))
                other.q[1] = pert / pert.sum(axis=1, keepdims=True)
                assert lagrangian(two_bsc, other, 2.0) >= base - 1e-12

    def test_decoder_is_bayes(self, two_bsc):
        st_ = random_state(two_bsc, 9)
        st_.dec = update_decoder(two_bsc, st_)
        base = lagrangian(two_bsc, st_, 1.0)
        assert set(np.unique(st_.dec)) <= {0.0, 1.0}
        rng = np.random.default_rng(2)
        for _ in range(20):
            other = st_.copy()
            d = rng.dirichlet(np.ones(4), size=(3, 3, 2))
            other.dec = np.moveaxis(d, -1, 0)
            assert lagrangian(two_bsc, other, 1.0) >= base - 1e-12

    def test_decoder_ties_lowest_index(self, wz):
        st_ = initial_state(wz, "uniform")
        st_.q = [np.full((2, 3), 1 / 3)]
        st_.Q = [update_marginal(wz, st_, 0)]
        dec = update_decoder(wz, st_)
        # y alone decides; for each y the estimate is y
        assert np.all(dec[0, :, 0] == 1) and np.all(dec[1, :, 1] == 1)

    @given(seed=st.integers(0, 1000), lam=st.floats(0.05, 20.0), c=st.floats(0.1, 10.0))
    @settings(max_examples=25, deadline=None)
    def test_encoder_update_scale_invariance(self, seed, lam, c):
        spec = two_bsc_problem()
        scaled = ProblemSpec(spec.joint, spec.distortion * c, spec.aux_sizes)
        st_ = random_state(spec, seed)
        a = update_encoder(spec, st_, 0, lam)
        b = update_encoder(scaled, st_, 0, lam / c)
        assert np.allclose(a, b, atol=1e-12)

    @given(seed=st.integers(0, 1000), lam=st.floats(0.0, 50.0))
    @settings(max_examples=25, deadline=None)
    def test_each_update_descends(self, seed, lam):
        spec = two_bsc_problem()
        st_ = random_state(spec, seed)
        prev = lagrangian(spec, st_, lam)
        for m in (0, 1):
            st_.Q[m] = update_marginal(spec, st_, m)
            cur = lagrangian(spec, st_, lam)
            assert cur <= prev + 1e-10
            prev = cur
            st_.q[m] = update_encoder(spec, st_, m, lam)
            cur = lagrangian(spec, st_, lam)
            assert cur <= prev + 1e-10
            prev = cur
        st_.dec = update_decoder(spec, st_)
        assert lagrangian(spec, st_, lam) <= prev + 1e-10


class TestSolve:
    def test_lambda_zero_corner(self, two_bsc):
        r = solve(two_bsc, SolverConfig(lam=0.0, restarts=2))
        assert max(r.rates) <= 1e-6
        assert r.distortion == pytest.approx(0.6, abs=1e-3)
        assert kkt_residual(two_bsc, r.state, 0.0) < 1e-9

    def test_large_lambda_corner(self, two_bsc):
        r = solve(two_bsc, SolverConfig(lam=1e3, restarts=2))
        assert r.distortion <= 1e-3
        assert r.rates == pytest.approx([H3, H3], abs=0.02)

    def test_trace_monotone(self, two_bsc):
        r = solve(two_bsc, SolverConfig(lam=3.0, restarts=3))
        for tr in r.restart_traces:
            assert np.max(np.diff(tr)) <= 1e-10
        assert r.lagrangian == min(r.restart_lagrangians)

    def test_deterministic(self, two_bsc):
        cfg = SolverConfig(lam=2.5, restarts=3, rng_seed=11)
        a, b = solve(two_bsc, cfg), solve(two_bsc, cfg)
        assert a.lagrangian == b.lagrangian and a.rates == b.rates

    def test_uniform_tilt_state_not_stationary(self, two_bsc):
        st_ = initial_state(two_bsc, "uniform")
        assert kkt_residual(two_bsc, st_, 1.0) > 1e-2

    def test_uniform_mode_runs_once(self, two_bsc):
        r = solve(two_bsc, SolverConfig(lam=3.0, init_mode="uniform", restarts=5))
        assert len(r.restart_lagrangians) == 1 and r.converged

    def test_warm_start_only(self, two_bsc):
        first = solve(two_bsc, SolverConfig(lam=3.0, restarts=2))
        again = solve(two_bsc, SolverConfig(lam=3.0), warm_start=first.state, cold_restarts=0)
        assert again.lagrangian <= first.lagrangian + 1e-12
        with pytest.raises(ValueError):
            solve(two_bsc, SolverConfig(lam=3.0), cold_restarts=0)

    def test_dependence_warning(self):
        spec = parse_problem("dependent_pair")
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            r = solve(spec, SolverConfig(lam=1.0, restarts=1))
        assert any(issubclass(w.category, ConditionalDependenceWarning) for w in rec)
        assert not r.region_exact

    def test_rate_weights_shift_rates(self, two_bsc):
        even = solve(two_bsc, SolverConfig(lam=3.0, restarts=4))
        tilted = solve(two_bsc, SolverConfig(lam=3.0, restarts=4, rate_weights=(1.0, 4.0)))
        assert tilted.rates[1] <= even.rates[1] + 1e-9
        assert tilted.rates[1] < tilted.rates[0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(lam=-1.0)
        with pytest.raises(ValueError):
            SolverConfig(init_mode="bogus")
        with pytest.raises(ValueError):
            SolverConfig(rate_weights=(1.0,)).weights(2)

    @pytest.mark.parametrize("lam", [0.5, 2.0, 6.0])
    def test_kkt_on_bundled(self, bundled, lam):
        r = solve(bundled, SolverConfig(lam=lam, restarts=3))
        assert r.converged
        assert kkt_residual(bundled, r.state, lam) < 1e-5
