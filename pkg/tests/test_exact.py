"""Tests for the contour-integral moment evaluators.

Oracle strategy: time-zero values have closed forms because the initial
data is deterministic, positive-time values are pinned by the exact
finite-window generator oracle and by frozen Monte Carlo anchors, and the
three independent representations of the single-site moments must agree
with each other to quadrature accuracy.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asep_exact import exact as ex
from asep_exact.qfunc import (
    DomainError,
    ModelParams,
    PoleError,
    QTruncation,
    q_factorial,
)
from asep_exact.quad import CostGuardError
from asep_exact.sim import Observable, ctmc_exact_expectation

PARAMS = ModelParams.from_tau(0.5)
EV = ex.EvalParams(params=PARAMS)


def make_ev(tau: float, **kwargs) -> ex.EvalParams:
    return ex.EvalParams(params=ModelParams.from_tau(tau), **kwargs)


class TestRates:
    def test_single_particle_rate_vanishes_at_one(self):
        assert ex.eps(1.0, PARAMS) == pytest.approx(0.0, abs=1e-15)

    def test_single_particle_rate_value(self):
        params = ModelParams.from_p(1.0 / 3.0)
        assert ex.eps(2.0, params) == pytest.approx(0.5, abs=1e-15)

    def test_rate_symmetric_under_xi_to_tau_over_xi(self):
        tau = PARAMS.tau
        for xi in (0.4 + 0.3j, 1.7 - 0.2j, 2.0 + 0j):
            left = ex.eps(xi, PARAMS)
            right = ex.eps(tau / xi, PARAMS)
            assert abs(left - right) < 1e-14

    def test_tilde_rate_vanishes_at_zero(self):
        assert abs(ex.eps_tilde(0.0, PARAMS)) < 1e-15

    def test_tilde_rate_is_composition(self):
        tau = PARAMS.tau
        for z in (0.2 + 0.1j, -0.5 + 0.4j, 0.8j):
            xi = (1.0 - tau * z) / (1.0 - z)
            assert abs(ex.eps_tilde(z, PARAMS) - ex.eps(xi, PARAMS)) < 1e-13

    def test_hat_rate_is_shifted_tilde_rate(self):
        tau = PARAMS.tau
        for y in (0.1 + 0.2j, -0.3 - 0.1j):
            assert abs(ex.eps_hat(y, PARAMS) - ex.eps_tilde(-y / tau, PARAMS)) < 1e-14

    def test_rates_are_array_transparent(self):
        z = np.array([0.1 + 0.1j, -0.2 + 0.3j])
        out = ex.eps_tilde(z, PARAMS)
        assert out.shape == z.shape
        assert abs(out[0] - ex.eps_tilde(z[0], PARAMS)) < 1e-15

    def test_pole_arguments_rejected(self):
        with pytest.raises(PoleError):
            ex.eps(0.0, PARAMS)
        with pytest.raises(PoleError):
            ex.eps_tilde(1.0, PARAMS)
        with pytest.raises(PoleError):
            ex.eps_tilde(1.0 / PARAMS.tau, PARAMS)


class TestEnumeration:
    def test_compositions_lexicographic(self):
        got = [c.parts for c in ex.compositions(4, 2)]
        assert got == [(1, 3), (2, 2), (3, 1)]

    def test_composition_counts(self):
        for m in range(1, 8):
            for k in range(1, m + 1):
                assert len(ex.compositions(m, k)) == math.comb(m - 1, k - 1)

    def test_compositions_degenerate(self):
        assert [c.parts for c in ex.compositions(0, 0)] == [()]
        assert ex.compositions(3, 0) == []
        assert ex.compositions(2, 3) == []

    def test_partitions_descending(self):
        got = [p.parts for p in ex.partitions_of(5)]
        assert got[0] == (5,)
        assert got[-1] == (1, 1, 1, 1, 1)
        assert len(got) == 7
        assert all(sum(p) == 5 for p in got)
        assert got == sorted(got, reverse=True)

    def test_partitions_of_zero(self):
        assert [p.parts for p in ex.partitions_of(0)] == [()]

    def test_partition_accessors(self):
        lam = ex.Partition(parts=(2, 2, 1))
        assert lam.length == 3
        assert lam.weight == 5
        assert lam.multiplicities() == {2: 2, 1: 1}

    def test_invalid_parts_rejected(self):
        with pytest.raises(DomainError):
            ex.Composition(parts=(2, 0))
        with pytest.raises(DomainError):
            ex.Partition(parts=(1, 2))
        with pytest.raises(DomainError):
            ex.compositions(-1, 2)


class TestCauchyDeterminant:
    def test_closed_form_matches_lu(self):
        rng = np.random.default_rng(7)
        for k in (2, 3, 4):
            u = rng.normal(size=(5, k)) + 1j * rng.normal(size=(5, k))
            w = rng.normal(size=(5, k)) + 1j * rng.normal(size=(5, k))
            a = ex.cauchy_det(u, w)
            b = ex.cauchy_det_lu(u, w)
            assert np.max(np.abs(a - b) / np.abs(b)) < 1e-12

    def test_scalar_case(self):
        u = np.array([2.0 + 1j])
        w = np.array([0.5 - 1j])
        assert abs(ex.cauchy_det(u, w) - (-1.0 / (u[0] - w[0]))) < 1e-15


class TestQtildeMoments:
    @pytest.mark.parametrize(
        "xs,expected",
        [
            ((2,), 1.0),
            ((2, 4), 0.5),
            ((2, 4, 6), 0.125),
            ((1, 4), 0.0),
            ((-2, 2), 0.0),
            ((2, 3), 0.0),
        ],
    )
    def test_time_zero_closed_form(self, xs, expected):
        assert ex.qtilde_initial(xs, PARAMS) == pytest.approx(expected, abs=1e-15)
        val = ex.qtilde_moments(xs, 0.0, EV)
        assert abs(val.value - expected) < 1e-9

    def test_matches_generator_oracle_one_site(self):
        oracle = ctmc_exact_expectation(Observable.qtilde_product((1,)), 0.3, PARAMS, (-6, 8))
        val = ex.qtilde_moments((1,), 0.3, EV)
        assert abs(val.value - oracle) < 1e-8

    def test_matches_generator_oracle_two_sites(self):
        oracle = ctmc_exact_expectation(
            Observable.qtilde_product((2, 4)), 0.5, PARAMS, (-8, 12)
        )
        val = ex.qtilde_moments((2, 4), 0.5, EV)
        assert abs(val.value - oracle) < 1e-8
        assert abs(val.value.imag) < 1e-9

    def test_result_reports_nodes_and_error(self):
        val = ex.qtilde_moments((2, 4), 0.5, EV)
        assert val.err_estimate < 1e-8
        assert len(val.node_counts) == 2

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.qtilde_moments((), 0.5, EV)
        with pytest.raises(DomainError):
            ex.qtilde_moments((1, 2, 3, 4, 5), 0.5, EV)
        with pytest.raises(DomainError):
            ex.qtilde_moments((3, 2), 0.5, EV)
        with pytest.raises(DomainError):
            ex.qtilde_moments((2, 2), 0.5, EV)
        with pytest.raises(DomainError):
            ex.qtilde_moments((2, 4), -0.1, EV)


class TestVerifyAnsatz:
    @pytest.mark.parametrize("xs", [(2, 3), (2, 4), (3, 5)])
    @pytest.mark.parametrize("t", [0.3, 0.7])
    def test_evolution_boundary_and_initial(self, xs, t):
        rep = ex.verify_ansatz(xs, t, EV)
        assert rep.ode_residual < 1e-6
        for b in rep.boundary_residuals:
            assert b < 1e-7
        assert rep.initial_gap < 1e-9

    def test_single_site(self):
        rep = ex.verify_ansatz((2,), 0.5, EV)
        assert rep.ode_residual < 1e-6
        assert rep.boundary_residuals == ()

    def test_boundary_only_for_adjacent_pairs(self):
        assert len(ex.verify_ansatz((2, 3), 0.3, EV).boundary_residuals) == 1
        assert len(ex.verify_ansatz((2, 4), 0.3, EV).boundary_residuals) == 0

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.verify_ansatz((2, 3), 0.0, EV)
        with pytest.raises(DomainError):
            ex.verify_ansatz((1, 2, 3, 4), 0.5, EV)


class TestNestedMoment:
    @pytest.mark.parametrize("tau", [0.3, 0.6])
    def test_time_zero_closed_form(self, tau):
        ev = make_ev(tau)
        for k in (1, 2, 3):
            for x in range(0, 6):
                val = ex.nested_moment(k, x, 0.0, ev)
                assert abs(val.value - tau ** (k * (x // 2))) < 1e-9

    def test_zeroth_moment_is_one(self):
        assert ex.nested_moment(0, 3, 0.7, EV).value == pytest.approx(1.0)

    def test_positive_time_is_real(self):
        val = ex.nested_moment(2, 1, 0.5, EV)
        assert abs(val.value.imag) < 1e-9
        assert 0.0 < val.value.real <= 1.0

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.nested_moment(4, 1, 0.5, EV)
        with pytest.raises(DomainError):
            ex.nested_moment(2, 1, -0.5, EV)


class TestPartitionMoment:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_matches_nested_route(self, k):
        ev = make_ev(0.4)
        a = ex.partition_moment(k, 3, 0.7, ev)
        b = ex.nested_moment(k, 3, 0.7, ev)
        assert abs(a.value - b.value) < 1e-8

    @pytest.mark.parametrize("tau", [0.3, 0.6])
    def test_time_zero_closed_form(self, tau):
        ev = make_ev(tau)
        for k in (1, 2, 3):
            val = ex.partition_moment(k, 4, 0.0, ev)
            assert abs(val.value - tau ** (2 * k)) < 1e-9

    def test_depth_four_time_zero(self):
        val = ex.partition_moment(4, 2, 0.0, make_ev(0.3))
        assert abs(val.value - 0.3**4) < 1e-6

    def test_depth_five_with_raised_budget(self):
        ev = ex.EvalParams(
            params=ModelParams.from_tau(0.2),
            trunc=QTruncation(tol=1e-6),
            max_points=1 << 33,
        )
        val = ex.partition_moment(5, 2, 0.0, ev)
        assert abs(val.value - 0.2**5) < 1e-6

    def test_depth_five_refused_at_default_budget(self):
        with pytest.raises(CostGuardError, match="budget"):
            ex.partition_moment(5, 2, 0.0, make_ev(0.2))

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.partition_moment(6, 2, 0.0, EV)
        with pytest.raises(DomainError):
            ex.partition_moment(2, 2, -1.0, EV)


class TestHalfflatMoments:
    def test_expansion_term_degenerate_cases(self):
        assert ex.halfflat_nu(0, 0, 2, 0.5, EV) == pytest.approx(1.0)
        assert ex.halfflat_nu(0, 3, 2, 0.5, EV) == 0.0
        assert ex.halfflat_nu(3, 2, 2, 0.5, EV) == 0.0

    @pytest.mark.parametrize("tau", [0.3, 0.6])
    def test_time_zero_exactness_grid(self, tau):
        ev = make_ev(tau)
        for m in (1, 2, 3):
            for x in range(0, 7):
                val = ex.halfflat_moment(m, x, 0.0, ev)
                assert abs(val.value - tau ** (m * (x // 2))) < 1e-9

    def test_fourth_moment_time_zero(self):
        val = ex.halfflat_moment(4, 2, 0.0, make_ev(0.3))
        assert abs(val.value - 0.3**4) < 1e-6

    @pytest.mark.parametrize("k,tau,x,t", [(2, 0.6, 1, 0.5), (3, 0.3, 3, 1.0)])
    def test_three_routes_agree(self, k, tau, x, t):
        ev = make_ev(tau)
        a = ex.nested_moment(k, x, t, ev)
        b = ex.partition_moment(k, x, t, ev)
        c = ex.halfflat_moment(k, x, t, ev)
        err = max(a.err_estimate, b.err_estimate, c.err_estimate)
        tol = max(1e-8, 10.0 * err)
        assert abs(a.value - b.value) < tol
        assert abs(a.value - c.value) < tol
        assert abs(b.value - c.value) < tol

    def test_frozen_monte_carlo_anchors(self):
        val1 = ex.halfflat_moment(1, 0, 1.0, EV)
        val2 = ex.halfflat_moment(2, 0, 1.0, EV)
        assert abs(val1.value - 0.943752) < 4.0 * 1.58e-4
        assert abs(val2.value - 0.915465) < 4.0 * 2.37e-4

    def test_monotone_in_order(self):
        ev = make_ev(0.6)
        vals = [ex.halfflat_moment(m, 1, 0.5, ev).value.real for m in (1, 2, 3)]
        assert vals[0] > vals[1] > vals[2]

    def test_monotone_in_site(self):
        vals = [ex.halfflat_moment(1, x, 0.5, EV).value.real for x in range(0, 5)]
        assert all(vals[i] > vals[i + 1] for i in range(len(vals) - 1))

    def test_values_in_unit_interval(self):
        for x in (-2, 0, 3):
            v = ex.halfflat_moment(2, x, 0.4, EV).value
            assert 0.0 < v.real <= 1.0 + 1e-12
            assert abs(v.imag) < 1e-9

    def test_zeroth_moment_is_one(self):
        assert ex.halfflat_moment(0, 2, 0.5, EV).value == pytest.approx(1.0)

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.halfflat_moment(5, 2, 0.5, EV)
        with pytest.raises(DomainError):
            ex.halfflat_moment(2, 2, -0.5, EV)
        with pytest.raises(DomainError):
            ex.halfflat_nu(5, 6, 2, 0.5, EV)


class TestTauLaplace:
    def test_series_at_zero_argument_is_one(self):
        assert abs(ex.tau_laplace_series(0.0, 2, 0.5, 10, EV) - 1.0) < 1e-14

    def test_series_matches_double_integral(self):
        ev = make_ev(0.3)
        series = ex.tau_laplace_series(-0.2, 1, 0.3, 12, ev)
        lines = ex.tau_laplace_mb(-0.2, 1, 0.3, 2, ev)
        assert abs(series - lines) < 1e-5

    def test_residue_completed_order_one_is_tight(self):
        ev = make_ev(0.3)
        series = ex.tau_laplace_series(-0.2, 1, 0.3, 12, ev)
        lines = ex.tau_laplace_mb(-0.2, 1, 0.3, 1, ev)
        assert abs(series - lines) < 1e-7

    def test_line_reproduces_geometric_series(self):
        zeta = -0.37
        s_nodes, s_weights = ex._mb_line_nodes(14.0, 0.8)
        val = np.sum(
            s_weights * np.pi / np.sin(-np.pi * s_nodes) * np.exp(s_nodes * np.log(-zeta))
        )
        assert abs(val - zeta / (1.0 - zeta)) < 1e-10

    def test_small_argument_limit(self):
        ev = make_ev(0.3)
        val = ex.tau_laplace_mb(-1e-10, 1, 0.3, 1, ev)
        assert abs(val - 1.0) < 1e-8

    def test_negative_argument_values_in_unit_interval(self):
        for zeta in (-0.2, -0.5):
            v = ex.tau_laplace_series(zeta, 2, 0.5, 10, EV)
            assert 0.0 < v.real <= 1.0
            assert abs(v.imag) < 1e-9

    def test_warns_near_nonnegative_axis(self):
        ev = make_ev(0.3, trunc=QTruncation(tol=1e-6))
        with pytest.warns(RuntimeWarning, match="line truncated"):
            ex.tau_laplace_mb(0.2 + 0.001j, 1, 0.3, 1, ev)

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.tau_laplace_series(1.2, 2, 0.5, 10, EV)
        with pytest.raises(DomainError):
            ex.tau_laplace_series(-0.2, 2, 0.5, 6, EV)
        with pytest.raises(DomainError):
            ex.tau_laplace_mb(0.3, 2, 0.5, 1, EV)
        with pytest.raises(DomainError):
            ex.tau_laplace_mb(-0.3, 2, 0.5, 3, EV)
        with pytest.raises(DomainError):
            ex.tau_laplace_mb(-0.3, 2, -0.5, 1, EV)


class TestDualityIdentity:
    def test_single_particle_at_origin(self):
        params = ModelParams.from_tau(0.37)
        lhs, rhs, gap = ex.duality_identity_check((0,), 0, 1, params)
        assert lhs == pytest.approx(0.37)
        assert gap < 1e-14

    def test_empty_configuration(self):
        lhs, rhs, gap = ex.duality_identity_check((), 3, 2, PARAMS)
        assert lhs == pytest.approx(1.0)
        assert gap < 1e-14

    def test_random_ten_site_configurations(self):
        params = ModelParams.from_tau(0.37)
        rng = np.random.default_rng(11)
        for _ in range(50):
            eta = tuple(int(y) for y in np.flatnonzero(rng.integers(0, 2, size=10)) - 4)
            _, _, gap = ex.duality_identity_check(eta, int(rng.integers(-4, 6)), 2, params)
            assert gap < 1e-12

    @given(
        mask=st.integers(min_value=0, max_value=(1 << 12) - 1),
        x=st.integers(min_value=-5, max_value=10),
        k=st.integers(min_value=0, max_value=3),
        tau=st.sampled_from([0.37, 0.61]),
    )
    @settings(max_examples=100, deadline=None)
    def test_identity_holds_for_arbitrary_configurations(self, mask, x, k, tau):
        eta = tuple(i - 5 for i in range(12) if (mask >> i) & 1)
        _, _, gap = ex.duality_identity_check(eta, x, k, ModelParams.from_tau(tau))
        assert gap < 1e-12

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.duality_identity_check((0,), 0, 5, PARAMS)


class TestSymmetrizationChecks:
    def test_two_variable_sum_telescopes(self):
        tau = PARAMS.tau
        y1, y2 = 0.7 + 0.2j, -0.4 + 0.9j
        total = (y2 - tau * y1) / (y2 - y1) + (y1 - tau * y2) / (y1 - y2)
        assert abs(total - q_factorial(2, tau)) < 1e-14
        assert abs(total - (1.0 + tau)) < 1e-14

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_small_sizes_exact(self, n):
        assert ex.symmetrization_checks(n, 50, PARAMS, seed=0) < 1e-12

    def test_four_variables_many_draws(self):
        assert ex.symmetrization_checks(4, 100, PARAMS, seed=1) < 1e-9

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            ex.symmetrization_checks(6, 10, PARAMS)
        with pytest.raises(DomainError):
            ex.symmetrization_checks(2, 0, PARAMS)


class TestCostControls:
    def test_budget_override_is_honored(self):
        ev = ex.EvalParams(params=PARAMS, max_points=1 << 8)
        with pytest.raises(CostGuardError, match="budget"):
            ex.qtilde_moments((2, 4), 0.5, ev)

    def test_default_parameters(self):
        assert EV.max_points == ex.DEFAULT_MAX_POINTS
        assert EV.rule.nodes_per_piece >= 8
