"""Contour-integral evaluators for the half-flat exclusion process.

Implemented routes, all exact at the level of the stated formulas and
cross-verifiable against each other and against the simulators:

- ordered-site product moments of tau^(N_{x-1}) eta_x on a circle around 1;
- single-site moments of tau^(k N_x) on k nested two-piece contours;
- the same moments as a partition-indexed sum over geometric strings on one
  shared contour around -tau and 0;
- the same moments as a composition-indexed sum with q-Pochhammer pair
  weights on a contour around -1 and 0;
- the q-deformed Laplace transform of tau^(N_x), both as a moment series
  and as a Mellin-Barnes double integral;
- brute-force identity checks (moment duality, symmetrization sums).

A recurring subtlety: summing the ordered geometric series
sum_{x_1<...<x_l<=x} prod_a xi_a^(x_a - 1) = prod_a xi_a^x / (xi_1...xi_a - 1)
leaves exponent x, not x-1.  The single-site evaluators below therefore feed
site + 1 into kernels whose displayed exponent is site - 1; the t=0 anchors
and the independent simulators pin this normalization.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .qfunc import (
    DEFAULT_TRUNC,
    DomainError,
    ModelParams,
    PoleError,
    QTruncation,
    germ_f,
    germ_g,
    germ_h,
    poch_finite,
    q_binomial,
    q_factorial,
)
from .quad import (
    CostGuardError,
    MomentResult,
    QuadratureRule,
    c1_rho_radius,
    nested_radii,
)

__all__ = [
    "Composition",
    "Partition",
    "EvalParams",
    "AnsatzReport",
    "compositions",
    "partitions_of",
    "eps",
    "eps_tilde",
    "eps_hat",
    "cauchy_det",
    "cauchy_det_lu",
    "qtilde_moments",
    "verify_ansatz",
    "nested_moment",
    "partition_moment",
    "halfflat_nu",
    "halfflat_moment",
    "tau_laplace_series",
    "tau_laplace_mb",
    "duality_identity_check",
    "symmetrization_checks",
]

DEFAULT_MAX_POINTS = 1 << 30


@dataclass(frozen=True)
class Composition:
    """Ordered tuple of positive integers."""

    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(p < 1 for p in self.parts):
            raise DomainError(f"composition parts must be >= 1, got {self.parts}")

    @property
    def weight(self) -> int:
        return sum(self.parts)


@dataclass(frozen=True)
class Partition:
    """Nonincreasing positive parts."""

    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(p < 1 for p in self.parts):
            raise DomainError(f"partition parts must be >= 1, got {self.parts}")
        if any(self.parts[i] < self.parts[i + 1] for i in range(len(self.parts) - 1)):
            raise DomainError(f"partition parts must be nonincreasing, got {self.parts}")

    @property
    def length(self) -> int:
        return len(self.parts)

    @property
    def weight(self) -> int:
        return sum(self.parts)

    def multiplicities(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for p in self.parts:
            out[p] = out.get(p, 0) + 1
        return out


def compositions(m: int, k: int) -> list[Composition]:
    """All ordered k-tuples of positive integers summing to m, lexicographic."""
    if m < 0 or k < 0:
        raise DomainError("need m, k >= 0")
    if k == 0:
        return [Composition(parts=())] if m == 0 else []
    out: list[Composition] = []

    def rec(prefix: tuple[int, ...], rest: int, slots: int) -> None:
        if slots == 1:
            out.append(Composition(parts=prefix + (rest,)))
            return
        for first in range(1, rest - slots + 2):
            rec(prefix + (first,), rest - first, slots - 1)

    if m >= k:
        rec((), m, k)
    return out


def partitions_of(k: int) -> list[Partition]:
    """All partitions of k, parts nonincreasing, lexicographically descending."""
    if k < 0:
        raise DomainError("need k >= 0")
    if k == 0:
        return [Partition(parts=())]
    out: list[Partition] = []

    def rec(prefix: tuple[int, ...], rest: int, cap: int) -> None:
        if rest == 0:
            out.append(Partition(parts=prefix))
            return
        for first in range(min(cap, rest), 0, -1):
            rec(prefix + (first,), rest - first, first)

    rec((), k, k)
    return out


@dataclass(frozen=True)
class EvalParams:
    """Model parameters plus truncation and quadrature settings.

    rule.nodes_per_piece acts as a floor; evaluators raise per-axis node
    counts automatically from the pole geometry of each contour family.
    """

    params: ModelParams
    trunc: QTruncation = field(default_factory=lambda: DEFAULT_TRUNC)
    rule: QuadratureRule = field(default_factory=QuadratureRule)
    max_points: int = DEFAULT_MAX_POINTS


# ---------------------------------------------------------------------------
# Jump-rate symbols.


def eps(xi, params: ModelParams):
    """p/xi + q xi - 1."""
    xi = np.asarray(xi, dtype=complex)
    if np.any(np.abs(xi) < 1e-13):
        raise PoleError("eps has a pole at xi = 0")
    out = params.p / xi + params.q * xi - 1.0
    return complex(out) if out.ndim == 0 else out


def eps_tilde(z, params: ModelParams):
    """eps evaluated at (1 - tau z)/(1 - z)."""
    z = np.asarray(z, dtype=complex)
    tau = params.tau
    if np.any(np.abs(1.0 - z) < 1e-13) or np.any(np.abs(1.0 - tau * z) < 1e-13):
        raise PoleError("eps_tilde has poles at z = 1 and z = 1/tau")
    out = params.p * (1.0 - z) / (1.0 - tau * z) + params.q * (1.0 - tau * z) / (1.0 - z) - 1.0
    return complex(out) if out.ndim == 0 else out


def eps_hat(y, params: ModelParams):
    """eps_tilde evaluated at -y/tau."""
    return eps_tilde(-np.asarray(y, dtype=complex) / params.tau, params)


# ---------------------------------------------------------------------------
# Cauchy determinants det[-1/(u_a - w_b)].


def cauchy_det(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Closed-form det[-1/(u_a - w_b)] over the trailing axis of u, w."""
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    k = u.shape[-1]
    out = np.full(u.shape[:-1], (-1.0) ** k, dtype=complex)
    for a in range(k):
        for b in range(k):
            out = out / (u[..., a] - w[..., b])
            if b > a:
                out = out * (u[..., a] - u[..., b]) * (w[..., b] - w[..., a])
    return out


def cauchy_det_lu(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Same determinant via LU on explicitly assembled matrices."""
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    mats = -1.0 / (u[..., :, None] - w[..., None, :])
    return np.linalg.det(mats)


# ---------------------------------------------------------------------------
# Node-count heuristics (trapezoid error ~ ratio^n for circle contours).


def _auto_nodes(ratio: float, tol: float) -> int:
    if not (0.0 < ratio < 1.0):
        raise DomainError(f"convergence ratio must lie in (0,1), got {ratio}")
    return int(math.ceil(math.log(1.0 / tol) / -math.log(ratio))) + 32


def _essential_nodes(amp: float, tol: float) -> int:
    # Smallest n with amp^n/n! < tol: Fourier tail of exp(A e^{-i theta}).
    if amp <= 0.5:
        return 8
    target = math.log(1.0 / tol)
    n = max(8, int(amp))
    while n < 200_000:
        if math.lgamma(n + 1) - n * math.log(amp) > target:
            return n
        n += 4
    raise ArithmeticError("essential-singularity node count diverged")


def _round_even(n: int) -> int:
    return n + (n % 2)


def _c1_nodes(params: ModelParams, rho: float, t: float, tol: float, floor: int) -> int:
    tau = params.tau
    ratios = [
        rho / (1.0 - tau - tau * rho),
        rho / (tau**-0.5 - 1.0),
        rho / ((1.0 - tau * (1.0 + rho)) / (tau * (1.0 + rho))),
    ]
    n = max(_auto_nodes(r, tol) for r in ratios if 0 < r < 1)
    amp = t * params.q * (1.0 - tau + tau * rho) / rho
    return _round_even(max(floor, n, _essential_nodes(amp, tol)))


def _gamma_m10_nodes(params: ModelParams, radius: float, tol: float, floor: int) -> int:
    tau = params.tau
    ratios = [1.0 / radius, radius * tau**0.5, radius * radius * tau]
    n = max(_auto_nodes(r, tol) for r in ratios if 0 < r < 1)
    return _round_even(max(floor, n))


def _gamma_mtau0_nodes(params: ModelParams, tol: float, floor: int) -> int:
    tau = params.tau
    n = _auto_nodes(tau**0.25, tol)
    return _round_even(max(floor, n))


# ---------------------------------------------------------------------------
# Tensor-product evaluation over circle axes.


def _circle_nodes(center: complex, radius: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * theta)
    return z, (z - center) / n


def _axis_nodes(pieces: list[tuple[complex, float, int]]) -> dict:
    """Concatenated trapezoid nodes for a union of circles, plus a half grid."""
    zs, ws, zh, wh = [], [], [], []
    for center, radius, n in pieces:
        n = _round_even(n)
        z, w = _circle_nodes(center, radius, n)
        zs.append(z)
        ws.append(w)
        zh.append(z[::2])
        wh.append(2.0 * w[::2])
    return {
        "z": np.concatenate(zs),
        "w": np.concatenate(ws),
        "z_half": np.concatenate(zh),
        "w_half": np.concatenate(wh),
    }


_EINSUM_LETTERS = "ijklm"


def _grid_eval(axes, diag_fn, pair_fn, max_points: int, half: bool) -> complex:
    """Sum over the tensor grid of prod_a diag_a prod_{a<b} pair_ab.

    axes: list of node dicts from _axis_nodes; diag_fn(a, z) -> 1-D factor;
    pair_fn(a, b, za, zb) -> 2-D factor on the (a, b) subgrid.
    """
    k = len(axes)
    if k > len(_EINSUM_LETTERS):
        raise CostGuardError(f"tensor evaluation supports at most {len(_EINSUM_LETTERS)} axes, got {k}")
    key_z, key_w = ("z_half", "w_half") if half else ("z", "w")
    sizes = [axes[a][key_z].size for a in range(k)]
    if math.prod(sizes) > max_points:
        raise CostGuardError(
            f"tensor grid of {math.prod(sizes)} points exceeds budget {max_points} "
            f"(axes: {sizes})"
        )
    operands = []
    subs = []
    for a in range(k):
        operands.append(diag_fn(a, axes[a][key_z]) * axes[a][key_w])
        subs.append(_EINSUM_LETTERS[a])
    for a in range(k):
        for b in range(a + 1, k):
            za = axes[a][key_z][:, None]
            zb = axes[b][key_z][None, :]
            operands.append(pair_fn(a, b, za, zb))
            subs.append(_EINSUM_LETTERS[a] + _EINSUM_LETTERS[b])
    if k == 1:
        return complex(np.sum(operands[0]))
    expr = ",".join(subs) + "->"
    return complex(np.einsum(expr, *operands, optimize=True))


def _tensor_result(axes, diag_fn, pair_fn, prefactor: complex, method: str, max_points: int) -> MomentResult:
    value = prefactor * _grid_eval(axes, diag_fn, pair_fn, max_points, half=False)
    coarse = prefactor * _grid_eval(axes, diag_fn, pair_fn, max_points, half=True)
    return MomentResult(
        value=value,
        err_estimate=abs(value - coarse),
        method=method,
        node_counts=tuple(axes[a]["z"].size for a in range(len(axes))),
    )


# ---------------------------------------------------------------------------
# Ordered-site product moments (circle around 1).


def _qtilde_kernel(ev: EvalParams, xs, t: float):
    params = ev.params
    tau = params.tau
    rho = c1_rho_radius(params)
    n = _c1_nodes(params, rho, t, ev.trunc.tol, ev.rule.nodes_per_piece)
    axes = [_axis_nodes([(1.0 + 0j, rho, n)]) for _ in xs]

    def diag(a, z):
        ratio = (1.0 - tau * z) / (1.0 - z)
        return ratio ** (xs[a] - 1) * np.exp(eps_tilde(z, params) * t) / (tau * z * z - 1.0)

    def pair(a, b, za, zb):
        return (za - zb) / (za - tau * zb) * (1.0 - za * zb) / (1.0 - tau * za * zb)

    prefactor = tau ** (len(xs) * (len(xs) - 1) / 2.0)
    return axes, diag, pair, prefactor


def _qtilde_value(xs, t: float, ev: EvalParams) -> MomentResult:
    axes, diag, pair, pref = _qtilde_kernel(ev, xs, t)
    return _tensor_result(axes, diag, pair, pref, "c1_tensor", ev.max_points)


def qtilde_moments(xs, t: float, ev: EvalParams) -> MomentResult:
    """Expected product over sites x_a of eta_{x_a} tau^(N_{x_a - 1}) at time t.

    Strictly increasing integer sites, at most four of them.
    """
    xs = tuple(int(v) for v in xs)
    if not xs or len(xs) > 4:
        raise DomainError(f"need 1 <= k <= 4 sites, got {len(xs)}")
    if any(xs[i] >= xs[i + 1] for i in range(len(xs) - 1)):
        raise DomainError(f"sites must be strictly increasing, got {xs}")
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    return _qtilde_value(xs, t, ev)


def qtilde_initial(xs, params: ModelParams) -> float:
    """Deterministic time-zero value: tau^(-k) prod 1{x_a positive even} tau^(x_a/2)."""
    tau = params.tau
    out = tau ** (-len(tuple(xs)))
    for x in xs:
        if x <= 0 or x % 2 != 0:
            return 0.0
        out *= tau ** (x / 2.0)
    return float(out)


@dataclass(frozen=True)
class AnsatzReport:
    ode_residual: float
    boundary_residuals: tuple[float, ...]
    initial_gap: float
    value: complex


def verify_ansatz(xs, t: float, ev: EvalParams) -> AnsatzReport:
    """Residuals of the defining evolution equations for the product moments.

    Checks, by quadrature of the same integral at shifted arguments:
    (a) d/dt u = sum_j [p u(x_j down) + q u(x_j up) - u] via Richardson-
    extrapolated centered differences; (b) at adjacent pairs x_{l+1}=x_l+1,
    p u(x_{l+1} down) + q u(x_l up) = u; (c) the time-zero value.
    """
    xs = tuple(int(v) for v in xs)
    if not xs or len(xs) > 3:
        raise DomainError(f"need 1 <= k <= 3 sites, got {len(xs)}")
    if any(xs[i] >= xs[i + 1] for i in range(len(xs) - 1)):
        raise DomainError(f"sites must be strictly increasing, got {xs}")
    if t <= 0:
        raise DomainError(f"need t > 0, got {t}")
    params = ev.params
    u = _qtilde_value(xs, t, ev).value

    def u_at(sites, at_t=t) -> complex:
        return _qtilde_value(tuple(sites), at_t, ev).value

    gen = 0j
    for j in range(len(xs)):
        lower = list(xs)
        lower[j] -= 1
        upper = list(xs)
        upper[j] += 1
        gen += params.p * u_at(lower) + params.q * u_at(upper) - u

    dt = min(1e-4, t / 4.0)
    d_coarse = (u_at(xs, t + dt) - u_at(xs, t - dt)) / (2.0 * dt)
    d_fine = (u_at(xs, t + dt / 2.0) - u_at(xs, t - dt / 2.0)) / dt
    du = (4.0 * d_fine - d_coarse) / 3.0
    ode_residual = abs(du - gen)

    boundary = []
    for ell in range(len(xs) - 1):
        if xs[ell + 1] == xs[ell] + 1:
            lower = list(xs)
            lower[ell + 1] -= 1
            upper = list(xs)
            upper[ell] += 1
            boundary.append(abs(params.p * u_at(lower) + params.q * u_at(upper) - u))

    initial_gap = abs(_qtilde_value(xs, 0.0, ev).value - qtilde_initial(xs, params))
    return AnsatzReport(
        ode_residual=float(ode_residual),
        boundary_residuals=tuple(float(b) for b in boundary),
        initial_gap=float(initial_gap),
        value=u,
    )


# ---------------------------------------------------------------------------
# Nested-contour moments of tau^(k N_x).


def _nested_weight(y, site: int, t: float, params: ModelParams):
    tau = params.tau
    ratio = (1.0 + y) / (1.0 + y / tau)
    return (tau + y) / (tau - y * y) * ratio ** (site - 1) * np.exp(t * eps_hat(y, params))


def nested_moment(k: int, x: int, t: float, ev: EvalParams) -> MomentResult:
    """Expected tau^(k N_x) at time t via k nested two-piece contours."""
    if k < 0 or k > 3:
        raise DomainError(f"need 0 <= k <= 3, got {k}")
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    params = ev.params
    tau = params.tau
    if k == 0:
        return MomentResult(1.0 + 0j, 0.0, "nested_tensor", ())
    tol = ev.trunc.tol
    floor = ev.rule.nodes_per_piece
    r, s = nested_radii(k, params)
    site = x + 1
    amp_res = t * params.q * tau * (1.0 - tau)
    axes = []
    for a in range(k):
        n0 = max(
            _auto_nodes(tau**0.5, tol),
            _auto_nodes(r[a] / (tau - r[a]), tol),
            _essential_nodes(amp_res / (tau - r[a]), tol),
            floor,
        )
        ns = max(
            _auto_nodes(tau**0.5, tol),
            _essential_nodes(amp_res / s[a], tol),
            floor,
        )
        axes.append(_axis_nodes([(0j, float(r[a]), n0), (-tau + 0j, float(s[a]), ns)]))

    def diag(a, y):
        return _nested_weight(y, site, t, params) / y

    def pair(a, b, ya, yb):
        return (ya - yb) / (ya - tau * yb) * (1.0 - ya * yb / tau**2) / (1.0 - ya * yb / tau)

    prefactor = tau ** (k * (k - 1) / 2.0)
    return _tensor_result(axes, diag, pair, prefactor, "nested_tensor", ev.max_points)


# ---------------------------------------------------------------------------
# Partition-indexed moments on the shared contour around -tau and 0.


def partition_moment(k: int, x: int, t: float, ev: EvalParams) -> MomentResult:
    """Expected tau^(k N_x) as a partition sum over geometric strings."""
    if k < 0 or k > 5:
        raise DomainError(f"need 0 <= k <= 5, got {k}")
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    params = ev.params
    tau = params.tau
    if k == 0:
        return MomentResult(1.0 + 0j, 0.0, "partition_tensor", ())
    tol = ev.trunc.tol if k <= 3 else max(ev.trunc.tol, 1e-8)
    radius = tau**0.75
    site = x + 1
    amp_res = t * params.q * tau * (1.0 - tau)
    n = max(
        _gamma_mtau0_nodes(params, tol, ev.rule.nodes_per_piece),
        _essential_nodes(amp_res / (radius - tau), tol),
    )
    axis = _axis_nodes([(0j, radius, n)])

    total = 0j
    total_coarse = 0j
    counts: list[int] = []
    for lam in partitions_of(k):
        ell = lam.length
        mult_factor = 1.0
        for m_a in lam.multiplicities().values():
            mult_factor *= math.factorial(m_a)
        pref = (1.0 - tau) ** k / mult_factor
        axes = [axis] * ell
        parts = lam.parts

        def diag(a, w, parts=parts):
            la = parts[a]
            out = -1.0 / (w * (tau**la - 1.0))
            for j in range(la):
                out = out * _nested_weight(tau**j * w, site, t, params)
            for i in range(la):
                for j in range(i + 1, la):
                    z = tau ** (i + j) * w * w
                    out = out * (1.0 - z / tau**2) / (1.0 - z / tau)
            return out

        def pair(a, b, wa, wb, parts=parts):
            la, lb = parts[a], parts[b]
            ua = tau**la * wa
            ub = tau**lb * wb
            out = (ua - ub) * (wb - wa) / ((ua - wb) * (ub - wa))
            for i in range(la):
                for j in range(lb):
                    z = tau ** (i + j) * wa * wb
                    out = out * (1.0 - z / tau**2) / (1.0 - z / tau)
            return out

        total += pref * _grid_eval(axes, diag, pair, ev.max_points, half=False)
        total_coarse += pref * _grid_eval(axes, diag, pair, ev.max_points, half=True)
        counts.append(axis["z"].size)

    kfact = q_factorial(k, tau)
    value = kfact * total
    return MomentResult(
        value=value,
        err_estimate=abs(value - kfact * total_coarse),
        method="partition_tensor",
        node_counts=tuple(counts),
    )


# ---------------------------------------------------------------------------
# Composition-indexed moments on the contour around -1 and 0.


def _dedup_compositions(m: int, k: int) -> list[tuple[tuple[int, ...], int]]:
    """Composition multisets with their permutation counts."""
    groups: dict[tuple[int, ...], int] = {}
    for comp in compositions(m, k):
        key = tuple(sorted(comp.parts, reverse=True))
        groups[key] = groups.get(key, 0) + 1
    return sorted(groups.items(), reverse=True)


def _nu_eval(k: int, m: int, x: int, t: float, ev: EvalParams) -> tuple[complex, float]:
    params = ev.params
    tau = params.tau
    if k == 0:
        return (1.0 + 0j, 0.0) if m == 0 else (0j, 0.0)
    if m < k:
        return 0j, 0.0
    tol = ev.trunc.tol if k <= 3 else max(ev.trunc.tol, 1e-8)
    radius = 0.5 * (1.0 + tau**-0.5)
    n = _gamma_m10_nodes(params, radius, tol, ev.rule.nodes_per_piece)
    axis = _axis_nodes([(0j, radius, n)])
    site = x + 1

    total = 0j
    total_coarse = 0j
    for parts, count in _dedup_compositions(m, k):

        def diag(a, w, parts=parts):
            na = parts[a]
            return (
                germ_f(w, na, site, t, params)
                * germ_g(w, na, tau, ev.trunc)
                * (-1.0 / (w * (tau**na - 1.0)))
            )

        def pair(a, b, wa, wb, parts=parts):
            na, nb = parts[a], parts[b]
            ua = tau**na * wa
            ub = tau**nb * wb
            cross = (ua - ub) * (wb - wa) / ((ua - wb) * (ub - wa))
            return cross * germ_h(wa, wb, na, nb, tau, ev.trunc)

        axes = [axis] * k
        total += count * _grid_eval(axes, diag, pair, ev.max_points, half=False)
        total_coarse += count * _grid_eval(axes, diag, pair, ev.max_points, half=True)
    scale = 1.0 / math.factorial(k)
    value = scale * total
    return value, abs(value - scale * total_coarse)


def halfflat_nu(k: int, m: int, x: int, t: float, ev: EvalParams) -> complex:
    """One order-k term of the composition expansion of E[tau^(m N_x)]."""
    if k < 0 or m < 0 or k > 4 or m > 16:
        raise DomainError(f"need 0 <= k <= 4 and 0 <= m <= 16, got k={k}, m={m}")
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    return _nu_eval(k, m, x, t, ev)[0]


def halfflat_moment(m: int, x: int, t: float, ev: EvalParams) -> MomentResult:
    """Expected tau^(m N_x) at time t via the composition expansion."""
    if m < 0 or m > 4:
        raise DomainError(f"need 0 <= m <= 4, got {m}")
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    tau = ev.params.tau
    total = 0j
    err = 0.0
    counts = []
    for k in range(m + 1):
        val, e = _nu_eval(k, m, x, t, ev)
        total += val
        err += e
        counts.append(k)
    mfact = q_factorial(m, tau)
    return MomentResult(
        value=mfact * total,
        err_estimate=mfact * err,
        method="gamma_tensor",
        node_counts=tuple(counts),
    )


# ---------------------------------------------------------------------------
# q-Laplace transform: moment series and Mellin-Barnes routes.


def _series_k_cap(m: int) -> int:
    if m <= 6:
        return min(m, 4)
    if m <= 9:
        return 3
    if m <= 13:
        return 2
    return 1


def tau_laplace_series(zeta: complex, x: int, t: float, m_max: int, ev: EvalParams) -> complex:
    """E[e_tau(zeta tau^(N_x))] summed from the moment expansion.

    Truncation is two-fold and both tails are controlled: the m-series is cut
    at m_max (moments lie in (0,1], so the tail is a geometric bound), and
    for large m only expansion orders k <= cap(m) are kept, the dropped terms
    being suppressed by zeta^m / m_tau!.
    """
    zeta = complex(zeta)
    if abs(zeta) >= 1.0:
        raise DomainError(f"need |zeta| < 1, got {abs(zeta)}")
    if m_max < 8:
        raise DomainError(f"need m_max >= 8, got {m_max}")
    tau = ev.params.tau
    total = 1.0 + 0j
    for m in range(1, m_max + 1):
        weight = zeta**m / q_factorial(m, tau)
        if abs(weight) < ev.trunc.tol:
            break
        moment = 0j
        for k in range(0, min(m, _series_k_cap(m)) + 1):
            moment += _nu_eval(k, m, x, t, ev)[0]
        total += weight * q_factorial(m, tau) * moment
    return total


def _mb_line_nodes(half_width: float, panel_width: float) -> tuple[np.ndarray, np.ndarray]:
    """16-point Gauss-Legendre panels on Re s = 1/2, weights for ds/(2 pi i).

    The q-Pochhammer factors of the integrand have s-plane poles a distance
    ~0.24 from the line (at Re s = 2 log R / log(1/tau) for the w-circle
    radius R), so the node spacing must stay well below that.
    """
    gl_x, gl_w = np.polynomial.legendre.leggauss(16)
    panels = int(math.ceil(2.0 * half_width / panel_width))
    edges = np.linspace(-half_width, half_width, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    hw = 0.5 * (edges[1:] - edges[:-1])
    y = (mid[:, None] + hw[:, None] * gl_x[None, :]).ravel()
    wy = (hw[:, None] * gl_w[None, :]).ravel()
    return 0.5 + 1j * y, wy / (2.0 * math.pi)


def _mb_half_width(zeta: complex, tol: float) -> float:
    arg_margin = math.pi - abs(np.angle(-zeta))
    if arg_margin < 0.3:
        _warnings.warn(
            "zeta is close to the nonnegative real axis; line truncated", RuntimeWarning
        )
        arg_margin = 0.3
    return max(8.0, math.log(1.0 / tol) / arg_margin + 4.0)


def _mb_diag_grid(zeta, x, t, ev, tol, panel_width):
    """Weighted single-variable factor on the (s, w) product grid."""
    params = ev.params
    tau = params.tau
    s_nodes, s_weights = _mb_line_nodes(_mb_half_width(zeta, tol), panel_width)
    radius = 0.5 * (1.0 + tau**-0.25)
    n_w = _round_even(
        max(
            _auto_nodes(1.0 / radius, tol),
            _auto_nodes(radius * tau**0.25, tol),
            ev.rule.nodes_per_piece,
        )
    )
    w_nodes, w_weights = _circle_nodes(0j, radius, n_w)
    sine = np.pi / np.sin(-np.pi * s_nodes)
    power = np.exp(s_nodes * np.log(-zeta))
    tau_s = np.exp(s_nodes * math.log(tau))
    f_grid = germ_f(w_nodes[None, :], s_nodes[:, None], x + 1, t, params)
    g_grid = germ_g(w_nodes[None, :], s_nodes[:, None], tau, ev.trunc)
    det_diag = -1.0 / (w_nodes[None, :] * (tau_s[:, None] - 1.0))
    a_grid = (
        (sine * power * s_weights)[:, None] * f_grid * g_grid * det_diag * w_weights[None, :]
    )
    return a_grid, s_nodes, tau_s, w_nodes


def _t_series(u: np.ndarray, tau: float, maxabs: float, tol: float) -> np.ndarray:
    """sum_m u^m / (m (1 - tau^m)) = -log (u; tau)_inf, needs |u| < 1."""
    terms = int(math.ceil(math.log(1.0 / tol) / math.log(1.0 / maxabs))) + 4
    up = u.copy()
    acc = u / (1.0 - tau)
    for m in range(2, terms + 1):
        up = up * u
        acc = acc + up / (m * (1.0 - tau**m))
    return acc


def _mb_order2(zeta, x, t, ev, tol) -> complex:
    """The k=2 Mellin-Barnes term: a 4-fold integral evaluated slab by slab.

    The pair weight is assembled multiplicatively from the series
    log (u; tau)_inf = -sum u^m/(m(1-tau^m)) after peeling one factor of the
    w1 w2 product (whose modulus can exceed 1), avoiding per-slab complex
    logs; the integrand is symmetric under swapping the two (s, w) pairs, so
    slabs cover s2 >= s1 with off-diagonal terms counted twice.
    """
    tau = ev.params.tau
    a_grid, s_nodes, tau_s, w_nodes = _mb_diag_grid(zeta, x, t, ev, tol, panel_width=2.0)
    n_s = s_nodes.size
    zmat = w_nodes[:, None] * w_nodes[None, :]
    v = tau * zmat
    v_max = float(np.max(np.abs(v)))
    a_max = tau**0.5

    t_v = _t_series(v, tau, v_max, tol)
    t_va = _t_series(v[:, None, :] * tau_s[None, :, None], tau, v_max * a_max, tol)
    exp_mv = np.exp(-t_v)
    exp_va = np.exp(t_va)
    one_mz = 1.0 - zmat
    one_mza = 1.0 - zmat[:, None, :] * tau_s[None, :, None]
    u_w = tau_s[:, None] * w_nodes[None, :]
    d2 = u_w[None, :, :] - w_nodes[:, None, None]

    terms12 = int(math.ceil(math.log(1.0 / tol) / math.log(1.0 / (v_max * a_max * a_max)))) + 4
    abs_a = np.abs(a_grid)
    a_total = float(np.sum(abs_a))
    row_sums = abs_a.sum(axis=1)

    acc = 0j
    for i in range(n_s):
        if row_sums[i] * a_total * 50.0 < 0.01 * tol:
            continue
        a12 = tau_s[i] * tau_s[i:]
        u12 = v[:, None, :] * a12[None, :, None]
        up = u12.copy()
        t12 = u12 / (1.0 - tau)
        for m in range(2, terms12 + 1):
            up = up * u12
            t12 = t12 + up / (m * (1.0 - tau**m))
        pair = np.exp(-t12)
        pair = pair * exp_va[:, i, :][:, None, :]
        pair = pair * exp_va[:, i:, :]
        pair = pair * exp_mv[:, None, :]
        # remaining peeled factor of the pair weight
        pair = pair * one_mz[:, None, :] * (1.0 - u12 / tau)
        pair = pair / (one_mza[:, i, :][:, None, :] * one_mza[:, i:, :])
        # Cauchy cross factor of the determinant
        u1 = u_w[i][:, None, None]
        cross_num = (u1 - u_w[None, i:, :]) * (w_nodes[None, None, :] - w_nodes[:, None, None])
        cross_den = (u1 - w_nodes[None, None, :]) * d2[:, i:, :]
        pair = pair * cross_num / cross_den
        weighted = np.einsum("x,sy,xsy->s", a_grid[i], a_grid[i:], pair, optimize=True)
        acc += 2.0 * weighted.sum() - weighted[0]
    return 0.5 * acc


def tau_laplace_mb(zeta: complex, x: int, t: float, k_max: int, ev: EvalParams) -> complex:
    """E[e_tau(zeta tau^(N_x))] via the Mellin-Barnes double-integral series.

    Each order k <= k_max contributes a 2k-fold integral over
    (1/2 + i R)^k times the circle around -1 and 0; the integrand carries
    pi/sin(-pi s_a) against (-zeta)^(s_a).  Orders above k_max (up to 4, the
    same depth the moment series reaches) are completed by their residue
    expansions over integer s_a, which the Mellin-Barnes identity makes the
    same quantity; k_max therefore only bounds the dimension of the line
    integrals actually performed.
    """
    zeta = complex(zeta)
    if zeta.imag == 0.0 and zeta.real >= 0.0:
        raise DomainError("zeta must avoid the nonnegative real axis")
    if k_max < 0 or k_max > 2:
        raise DomainError(f"need 0 <= k_max <= 2, got {k_max}")
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    total = 1.0 + 0j
    if k_max >= 1:
        a_grid, _, _, _ = _mb_diag_grid(
            zeta, x, t, ev, max(ev.trunc.tol, 1e-9), panel_width=0.8
        )
        total += complex(np.sum(a_grid))
    if k_max >= 2:
        total += _mb_order2(zeta, x, t, ev, max(ev.trunc.tol, 1e-4))
    for k in range(k_max + 1, 5):
        for m in range(k, 17):
            if _series_k_cap(m) < k:
                break
            if abs(zeta) ** m < ev.trunc.tol:
                break
            total += zeta**m * _nu_eval(k, m, x, t, ev)[0]
    return total


# ---------------------------------------------------------------------------
# Identity suites.


def duality_identity_check(eta, x: int, k: int, params: ModelParams) -> tuple[float, float, float]:
    """Brute-force both sides of the moment-duality expansion.

    eta is any finite set of occupied sites.  Returns (lhs, rhs, gap) for
    lhs = tau^(k N_x) and the alternating sum over ordered site tuples of
    products of eta_{x_a} tau^(N_{x_a - 1}).
    """
    if k < 0 or k > 4:
        raise DomainError(f"need 0 <= k <= 4, got {k}")
    tau = params.tau
    occupied = sorted(set(int(v) for v in eta))
    n_x = sum(1 for y in occupied if y <= x)
    lhs = tau ** (k * n_x)
    rhs = 0.0
    reachable = [y for y in occupied if y <= x]
    for ell in range(0, k + 1):
        coeff = (-1.0) ** ell * float(np.real(q_binomial(k, ell, tau))) * float(
            np.real(poch_finite(tau, tau, ell))
        )
        if ell == 0:
            rhs += coeff
            continue
        inner = 0.0
        for sites in combinations(reachable, ell):
            term = 1.0
            for y in sites:
                n_prev = sum(1 for z in occupied if z <= y - 1)
                term *= tau**n_prev
            inner += term
        rhs += coeff * inner
    return float(lhs), float(rhs), abs(float(lhs) - float(rhs))


def symmetrization_checks(n: int, samples: int, params: ModelParams, seed: int = 0) -> float:
    """Max gap over random draws of two symmetrization identities.

    (a) sum over permutations of prod_{a>b} (y_a - tau y_b)/(y_a - y_b)
    equals the q-factorial of n; (b) the weighted permutation sum over
    (q_a - q_b - i kappa)/(q_a - q_b) telescopes to the pair product
    (q_a + q_b + i kappa)/(q_a + q_b).
    """
    if n < 1 or n > 5:
        raise DomainError(f"need 1 <= n <= 5, got {n}")
    if samples < 1:
        raise DomainError("need samples >= 1")
    tau = params.tau
    rng = np.random.default_rng(seed)
    perms = list(permutations(range(n)))
    worst = 0.0

    def draw(size: int) -> np.ndarray:
        while True:
            v = rng.normal(size=size) + 1j * rng.normal(size=size)
            pair_min = min(
                (abs(v[i] - v[j]) for i in range(size) for j in range(i + 1, size)),
                default=1.0,
            )
            sum_min = min(
                (abs(v[i] + v[j]) for i in range(size) for j in range(i + 1, size)),
                default=1.0,
            )
            if pair_min > 1e-2 and sum_min > 1e-2 and np.all(np.abs(v) > 1e-2):
                return v

    for _ in range(samples):
        ys = draw(n)
        acc = 0j
        for sigma in perms:
            term = 1.0 + 0j
            for a in range(n):
                for b in range(a):
                    term *= (ys[sigma[a]] - tau * ys[sigma[b]]) / (ys[sigma[a]] - ys[sigma[b]])
            acc += term
        expected = complex(q_factorial(n, tau))
        worst = max(worst, abs(acc - expected) / abs(expected))

        qs = draw(n)
        kappa = complex(rng.normal() + 1j * rng.normal())
        acc = 0j
        for sigma in perms:
            mu = 1.0 + 0j
            run = 0j
            for a in range(n):
                run += qs[sigma[a]]
                mu /= run
            mu *= np.prod(qs)
            term = mu
            for a in range(n):
                for b in range(a + 1, n):
                    term *= (qs[sigma[a]] - qs[sigma[b]] - 1j * kappa) / (
                        qs[sigma[a]] - qs[sigma[b]]
                    )
            acc += term
        expected = 1.0 + 0j
        for a in range(n):
            for b in range(a + 1, n):
                expected *= (qs[a] + qs[b] + 1j * kappa) / (qs[a] + qs[b])
        worst = max(worst, abs(acc - expected) / abs(expected))
    return worst
