"""Tests for the simulator and the exact finite-window oracle."""

from __future__ import annotations

import numpy as np
import pytest

from asep_exact.qfunc import DomainError, ModelParams, q_exp
from asep_exact.sim import (
    LatticeState,
    Observable,
    ctmc_exact_expectation,
    default_window,
    init_halfflat,
    mc_expectation,
    run_until,
)

PARAMS = ModelParams.from_tau(0.5)


def flux_height(state: LatticeState, x: int) -> int:
    """Height at x built from the tracked current and signed occupancies."""
    hat = 2 * state.occ.astype(int) - 1
    if x > 0:
        span = hat[1 - state.left : x + 1 - state.left]
        return 2 * state.flux0 + int(np.sum(span))
    if x == 0:
        return 2 * state.flux0
    span = hat[x + 1 - state.left : 1 - state.left]
    return 2 * state.flux0 - int(np.sum(span))


class TestInitHalfflat:
    def test_positive_evens_occupied(self):
        state = init_halfflat((-4, 6))
        assert list(state.positions()) == [2, 4, 6]
        assert state.flux0 == 0

    def test_small_window_has_no_particles(self):
        state = init_halfflat((-2, 1))
        assert state.positions().size == 0

    def test_initial_counts_follow_floor(self):
        state = init_halfflat((-6, 9))
        for x in range(0, 10):
            assert state.count_leq(x) == x // 2

    def test_window_must_contain_origin(self):
        with pytest.raises(DomainError):
            init_halfflat((1, 5))


class TestRunUntil:
    def test_zero_time_is_identity(self):
        state = init_halfflat((-4, 6))
        before = state.occ.copy()
        run_until(state, 0.0, PARAMS, np.random.default_rng(3))
        assert np.array_equal(state.occ, before)
        assert state.flux0 == 0

    def test_left_only_drift_reaches_boundary(self):
        # With the right rate ~0, the single particle at 2 walks to the
        # closed left boundary, crossing the 1 -> 0 bond exactly once.
        params = ModelParams(p=1e-12, q=1.0 - 1e-12)
        state = init_halfflat((-2, 2))
        run_until(state, 60.0, params, np.random.default_rng(11))
        assert list(state.positions()) == [-2]
        assert state.flux0 == 1

    def test_exclusion_preserved_over_many_events(self):
        state = init_halfflat((-8, 10))
        rng = np.random.default_rng(5)
        run_until(state, 2e5, PARAMS, rng, check=True)
        assert int(np.sum(state.occ)) == 5
        assert np.all(state.occ <= 1)

    def test_flux_height_identity_pathwise(self):
        # All particles start right of the origin, so the current-based
        # height coincides with 2 N_x - x at every site and sampled time.
        rng = np.random.default_rng(17)
        for t in (0.3, 0.9, 2.0):
            state = init_halfflat((-20, 22))
            run_until(state, t, PARAMS, rng)
            for x in range(-6, 9):
                assert flux_height(state, x) == 2 * state.count_leq(x) - x

    def test_negative_time_rejected(self):
        state = init_halfflat((-4, 6))
        with pytest.raises(DomainError):
            run_until(state, -1.0, PARAMS, np.random.default_rng(0))


class TestMCExpectation:
    def test_deterministic_at_time_zero(self):
        obs = Observable.tau_pow_N(1, 4)
        mean, stderr = mc_expectation(obs, 0.0, PARAMS, 200, seed=1)
        assert mean == pytest.approx(0.25, abs=1e-15)
        assert stderr < 1e-15

    def test_qtilde_deterministic_at_time_zero(self):
        obs = Observable.qtilde_product((2, 4))
        mean, stderr = mc_expectation(obs, 0.0, PARAMS, 200, seed=1)
        assert mean == pytest.approx(0.5, abs=1e-15)
        assert stderr < 1e-15

    def test_etau_deterministic_at_time_zero(self):
        obs = Observable.etau_of_zeta_tauN(-0.4, 2)
        mean, _ = mc_expectation(obs, 0.0, PARAMS, 200, seed=1)
        expected = float(np.real(q_exp(-0.4 * 0.5, 0.5)))
        assert mean == pytest.approx(expected, abs=1e-14)

    def test_height_indicator_at_time_zero(self):
        # h(0, x) = -(x mod 2), so the indicator of h >= 0 sees even sites.
        even = Observable.height_indicator(4, 0.0)
        odd = Observable.height_indicator(5, 0.0)
        assert mc_expectation(even, 0.0, PARAMS, 200, seed=1)[0] == 1.0
        assert mc_expectation(odd, 0.0, PARAMS, 200, seed=1)[0] == 0.0

    def test_reproducible_by_seed(self):
        obs = Observable.tau_pow_N(1, 0)
        a = mc_expectation(obs, 0.6, PARAMS, 3000, seed=42, window=(-9, 9))
        b = mc_expectation(obs, 0.6, PARAMS, 3000, seed=42, window=(-9, 9))
        c = mc_expectation(obs, 0.6, PARAMS, 3000, seed=43, window=(-9, 9))
        assert a == b
        assert a != c

    def test_sample_count_validated(self):
        with pytest.raises(DomainError):
            mc_expectation(Observable.tau_pow_N(1, 0), 1.0, PARAMS, 99, seed=0)

    def test_site_outside_window_rejected(self):
        with pytest.raises(DomainError):
            mc_expectation(Observable.tau_pow_N(1, 12), 1.0, PARAMS, 200, seed=0, window=(-6, 6))

    def test_default_window_scales_with_time(self):
        lo, hi = default_window(Observable.tau_pow_N(1, 3), 2.0)
        assert lo == -40 and hi == 43


class TestCTMCOracle:
    def test_time_zero_is_deterministic(self):
        obs = Observable.tau_pow_N(1, 4)
        assert ctmc_exact_expectation(obs, 0.0, PARAMS, (-4, 6)) == pytest.approx(0.25, abs=1e-15)

    def test_matches_monte_carlo_on_shared_window(self):
        # Same truncated dynamics evaluated by two independent methods.
        obs = Observable.tau_pow_N(1, 0)
        window = (-5, 5)
        exact_val = ctmc_exact_expectation(obs, 0.4, PARAMS, window)
        mean, stderr = mc_expectation(obs, 0.4, PARAMS, 40000, seed=7, window=window)
        assert abs(mean - exact_val) < 4.0 * stderr

    def test_qtilde_matches_monte_carlo_on_shared_window(self):
        obs = Observable.qtilde_product((1,))
        window = (-5, 5)
        exact_val = ctmc_exact_expectation(obs, 0.5, PARAMS, window)
        mean, stderr = mc_expectation(obs, 0.5, PARAMS, 40000, seed=11, window=window)
        assert abs(mean - exact_val) < 4.0 * stderr

    def test_window_doubling_insensitivity(self):
        obs = Observable.tau_pow_N(1, 0)
        small = ctmc_exact_expectation(obs, 0.25, PARAMS, (-4, 6))
        big = ctmc_exact_expectation(obs, 0.25, PARAMS, (-8, 12))
        assert abs(small - big) < 1e-8

    def test_state_cap_refusal_reports_count(self):
        with pytest.raises(DomainError) as err:
            ctmc_exact_expectation(Observable.tau_pow_N(1, 0), 0.5, PARAMS, (-20, 20))
        assert "states" in str(err.value)

    def test_height_indicator_consistency(self):
        # For half-flat data the current equals the count left of the origin,
        # so both oracles see the same indicator law.
        obs = Observable.height_indicator(1, -1.0)
        window = (-5, 5)
        exact_val = ctmc_exact_expectation(obs, 0.4, PARAMS, window)
        mean, stderr = mc_expectation(obs, 0.4, PARAMS, 40000, seed=3, window=window)
        assert abs(mean - exact_val) < 4.0 * max(stderr, 1e-4)


class TestLatticeState:
    def test_rejects_bad_window(self):
        with pytest.raises(DomainError):
            LatticeState(left=3, right=3, occ=np.zeros(1, dtype=np.int8))

    def test_rejects_double_occupancy(self):
        with pytest.raises(DomainError):
            LatticeState(left=0, right=2, occ=np.array([0, 2, 0], dtype=np.int8))

    def test_rejects_length_mismatch(self):
        with pytest.raises(DomainError):
            LatticeState(left=0, right=2, occ=np.zeros(5, dtype=np.int8))
