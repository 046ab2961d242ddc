"""Tests for the continuum-limit moment evaluators.

Oracles: k=1 values reduce to Gaussian CDF / heat-kernel closed forms; the
log-Gamma evaluator is checked against scipy and its own functional
identities; higher orders are pinned by cross-representation agreement
(ordered-point ladder vs collapsed strings vs the chamber route) and by
contour-independence and node-doubling self-checks.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special

from asep_exact import bose
from asep_exact.qfunc import DomainError, PoleError
from asep_exact.quad import QuadratureRule


def phi(x: float, t: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0 * t)))


def heat_kernel(x: float, t: float) -> float:
    return math.exp(-x * x / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


class TestLogGamma:
    def test_matches_scipy(self):
        rng = np.random.default_rng(3)
        z = rng.uniform(-6.0, 8.0, 400) + 1j * rng.uniform(-30.0, 30.0, 400)
        z = z[np.abs(z.imag) > 1e-3]
        mine = np.exp(bose.log_gamma(z))
        ref = np.exp(special.loggamma(z))
        assert np.max(np.abs(mine - ref) / np.abs(ref)) < 1e-12

    def test_reflection_identity(self):
        rng = np.random.default_rng(9)
        z = rng.uniform(-3.0, 4.0, 200) + 1j * rng.uniform(-5.0, 5.0, 200)
        z = z[np.abs(z.imag) > 0.05]
        lhs = np.exp(bose.log_gamma(z) + bose.log_gamma(1.0 - z))
        rhs = np.pi / np.sin(np.pi * z)
        assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-10

    def test_recurrence(self):
        for z in (0.3 + 2.0j, -1.4 + 0.7j, 5.0 - 3.0j):
            gap = np.exp(bose.log_gamma(z + 1.0) - bose.log_gamma(z)) - z
            assert abs(gap) < 1e-12 * abs(z)

    def test_known_values(self):
        assert abs(np.exp(bose.log_gamma(1.0)) - 1.0) < 1e-14
        assert abs(np.exp(bose.log_gamma(0.5)) - math.sqrt(math.pi)) < 1e-13

    def test_scalar_and_array_shapes(self):
        scalar = bose.log_gamma(2.0 + 1.0j)
        assert isinstance(scalar, complex)
        arr = bose.log_gamma(np.array([2.0 + 1.0j, 0.5 - 0.5j]))
        assert arr.shape == (2,)
        assert abs(arr[0] - scalar) < 1e-14

    def test_pole_rejected(self):
        with pytest.raises(PoleError):
            bose.log_gamma(0.0)
        with pytest.raises(PoleError):
            bose.log_gamma(-3.0)

    def test_self_check_meets_contract(self):
        contract = bose.GammaEval()
        assert contract.self_check() < contract.tol


class TestBoseParams:
    def test_default_ladder_is_valid(self):
        for k in (1, 2, 3):
            for theta in (0.0, 2.5):
                ladder = bose.default_ladder(k, theta)
                assert len(ladder) == k
                for a in range(k - 1):
                    assert ladder[a] - ladder[a + 1] - 1.0 >= bose.LADDER_MARGIN
                assert ladder[-1] >= bose.LADDER_MARGIN

    def test_ladder_validation(self):
        with pytest.raises(DomainError):
            bose.BoseParams(alpha_ladder=(1.5, 0.6))
        with pytest.raises(DomainError):
            bose.BoseParams(alpha_ladder=(1.5, -0.2))
        with pytest.raises(DomainError):
            bose.BoseParams(alpha_ladder=())

    def test_field_validation(self):
        with pytest.raises(DomainError):
            bose.BoseParams(theta=-0.1)
        with pytest.raises(DomainError):
            bose.BoseParams(alpha=0.0)


class TestDeltaBoseMoment:
    @pytest.mark.parametrize("x,t", [(0.0, 1.0), (0.5, 0.8), (-1.0, 2.0)])
    def test_single_point_is_gaussian_cdf(self, x, t):
        val = bose.delta_bose_moment((x,), t, 0.0)
        assert abs(val.value - phi(x, t)) < 1e-8

    def test_single_point_tilted_closed_form(self):
        theta, x, t = 1.0, 0.5, 0.8
        target = math.exp(-theta * x + 0.5 * theta**2 * t) * phi(x - theta * t, t)
        val = bose.delta_bose_moment((x,), t, theta)
        assert abs(val.value - target) < 1e-8

    def test_ladder_independence(self):
        a = bose.delta_bose_moment((0.0, 0.6), 0.9, 0.0)
        b = bose.delta_bose_moment(
            (0.0, 0.6), 0.9, 0.0, bose=bose.BoseParams(alpha_ladder=(2.2, 0.7))
        )
        assert abs(a.value - b.value) < 1e-7

    def test_pair_values_real_positive(self):
        val = bose.delta_bose_moment((-0.3, 0.4), 1.0, 0.0)
        assert abs(val.value.imag) < 1e-9
        assert val.value.real > 0.0

    def test_far_ladder_warns(self):
        with pytest.warns(RuntimeWarning, match="far from the tilt"):
            bose.delta_bose_moment(
                (0.0,), 1.0, 30.0, bose=bose.BoseParams(alpha_ladder=(0.5,))
            )

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            bose.delta_bose_moment((), 1.0, 0.0)
        with pytest.raises(DomainError):
            bose.delta_bose_moment((0.0, 0.0), 1.0, 0.0)
        with pytest.raises(DomainError):
            bose.delta_bose_moment((0.0, 0.5, 1.0, 1.5), 1.0, 0.0)
        with pytest.raises(DomainError):
            bose.delta_bose_moment((0.0,), 0.0, 0.0)
        with pytest.raises(DomainError):
            bose.delta_bose_moment((0.0,), 1.0, -1.0)
        with pytest.raises(DomainError):
            bose.delta_bose_moment(
                (0.0,), 1.0, 0.0, bose=bose.BoseParams(alpha_ladder=(1.8, 0.5))
            )


class TestNarrowWedgeMoment:
    @pytest.mark.parametrize("x,t", [(0.0, 1.0), (0.7, 0.5)])
    def test_single_point_is_heat_kernel(self, x, t):
        val = bose.narrow_wedge_moment((x,), t)
        assert abs(val.value - heat_kernel(x, t)) < 1e-8

    def test_reached_by_hard_tilt(self):
        free = bose.narrow_wedge_moment((0.0,), 1.0)
        tilted = bose.delta_bose_moment((0.0,), 1.0, 50.0)
        assert abs(50.0 * tilted.value - free.value) < 1e-3

    def test_stable_under_node_doubling(self):
        a = bose.narrow_wedge_moment((0.0, 0.5), 1.0)
        b = bose.narrow_wedge_moment((0.0, 0.5), 1.0, rule=QuadratureRule(nodes_per_piece=128))
        assert abs(a.value - b.value) < 1e-8

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            bose.narrow_wedge_moment((0.5, 0.1), 1.0)
        with pytest.raises(DomainError):
            bose.narrow_wedge_moment((0.0,), -1.0)


class TestCollapsedMoment:
    @pytest.mark.parametrize("x,t", [(0.0, 1.0), (0.5, 0.8)])
    def test_single_string_is_gaussian_cdf(self, x, t):
        val = bose.she_halfflat_moment_collapsed(1, x, t, 0.0)
        assert abs(val.value - phi(x, t)) < 1e-8

    def test_zeroth_moment_is_one(self):
        val = bose.she_halfflat_moment_collapsed(0, 0.3, 1.0, 0.0)
        assert val.value == 1.0 + 0j

    def test_matches_ordered_route_at_coincident_points(self):
        col = bose.she_halfflat_moment_collapsed(2, 0.5, 0.8, 0.0)
        sep = bose.delta_bose_moment((0.5, 0.5 + 1e-9), 0.8, 0.0)
        assert abs(col.value - sep.value) < 1e-6

    def test_matches_ordered_route_third_moment(self):
        col = bose.she_halfflat_moment_collapsed(3, 0.3, 0.6, 0.0)
        sep = bose.delta_bose_moment((0.3, 0.3 + 1e-9, 0.3 + 2e-9), 0.6, 0.0)
        assert abs(col.value - sep.value) < 1e-6

    def test_matches_ordered_route_with_tilt(self):
        col = bose.she_halfflat_moment_collapsed(2, 0.2, 0.7, 1.3)
        sep = bose.delta_bose_moment((0.2, 0.2 + 1e-9), 0.7, 1.3)
        assert abs(col.value - sep.value) < 1e-6

    def test_string_order_invariance(self):
        rule = QuadratureRule()
        a = bose._collapsed_term((1, 2), 0.3, 0.6, 0.0, 0.5, rule)
        b = bose._collapsed_term((2, 1), 0.3, 0.6, 0.0, 0.5, rule)
        assert abs(a.value - b.value) < 1e-12

    def test_values_real_positive(self):
        for k in (1, 2, 3):
            val = bose.she_halfflat_moment_collapsed(k, 0.4, 0.9, 0.0)
            assert abs(val.value.imag) < 1e-9
            assert val.value.real > 0.0

    def test_near_pole_abscissa_warns(self):
        with pytest.warns(RuntimeWarning, match="ill-conditioned"):
            bose.she_halfflat_moment_collapsed(
                3, 0.3, 0.6, 0.0, bose=bose.BoseParams(alpha=0.25 + 2e-7)
            )

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            bose.she_halfflat_moment_collapsed(4, 0.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            bose.she_halfflat_moment_collapsed(2, 0.0, 0.0, 0.0)
        with pytest.raises(DomainError):
            bose.she_halfflat_moment_collapsed(2, 0.0, 1.0, -0.5)


class TestWeylLinearity:
    def test_single_point_no_tilt(self):
        assert bose.weyl_linearity_check(1, 0.3, 1.0, 0.0) < 1e-6

    def test_single_point_tilted(self):
        assert bose.weyl_linearity_check(1, 0.0, 1.0, 1.0) < 1e-6

    def test_pair_no_tilt(self):
        assert bose.weyl_linearity_check(2, 0.0, 0.5, 0.0) < 1e-4

    def test_pair_tilted(self):
        assert bose.weyl_linearity_check(2, 0.4, 0.8, 1.0) < 1e-4

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            bose.weyl_linearity_check(3, 0.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            bose.weyl_linearity_check(1, 0.0, -1.0, 0.0)
