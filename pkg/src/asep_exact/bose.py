"""Moment formulas for the attractive point-interaction gas (continuum limit).

Four evaluators, cross-checking each other:

- delta_bose_moment: joint moments at strictly ordered points for the
  exponentially tilted one-sided step start, as a k-fold integral over a
  descending ladder of vertical lines.
- narrow_wedge_moment: the point-mass-start moments reached by tilting the
  start infinitely hard; same structure with a single cross factor.
- she_halfflat_moment_collapsed: the equal-point moments after collapsing
  all lines onto a common abscissa, organized as a string expansion whose
  integrand carries a Cauchy-type determinant, cubic-in-string-length
  exponents, and Gamma-function ratios.
- weyl_linearity_check: an independent route that integrates the free
  (point-mass) moments against the tilted step weights over the ordered
  chamber and compares with the collapsed formula.

All vertical lines are truncated where the Gaussian factor has decayed
below the rule's tail cut, with node density driven by the oscillation
frequency of the linear phase.  Gamma ratios are assembled in log space
from an in-package Lanczos evaluator so that only exp() of differences is
ever taken.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from .exact import DEFAULT_MAX_POINTS, _round_even, _tensor_result, compositions
from .qfunc import DomainError, PoleError
from .quad import MomentResult, QuadratureRule, Segment, piece_nodes

__all__ = [
    "LADDER_MARGIN",
    "BoseParams",
    "GammaEval",
    "log_gamma",
    "default_ladder",
    "delta_bose_moment",
    "narrow_wedge_moment",
    "she_halfflat_moment_collapsed",
    "weyl_linearity_check",
]

LADDER_MARGIN = 1e-6

# Lanczos rational approximation, g = 7, 9 terms; ~1e-13 relative accuracy
# right of the reflection line.
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-06,
    1.5056327351493116e-07,
)


def log_gamma(z):
    """Complex log-Gamma via Lanczos, reflected for Re z < 1/2.

    Branch offsets of 2 pi i are harmless downstream because every consumer
    exponentiates sums and differences of values.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    nearest = np.round(z.real)
    if np.any((np.abs(z - nearest) < 1e-12) & (nearest <= 0.0)):
        raise PoleError("log_gamma at a nonpositive integer")
    refl = z.real < 0.5
    zz = np.where(refl, 1.0 - z, z)
    acc = np.full(zz.shape, _LANCZOS_C[0], dtype=complex)
    for i, c in enumerate(_LANCZOS_C[1:], start=1):
        acc += c / (zz - 1.0 + i)
    base = zz + _LANCZOS_G - 0.5
    out = 0.5 * math.log(2.0 * math.pi) + (zz - 0.5) * np.log(base) - base + np.log(acc)
    if np.any(refl):
        zr = z[refl]
        out[refl] = math.log(math.pi) - np.log(np.sin(np.pi * zr)) - out[refl]
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class GammaEval:
    """Accuracy contract for the log-Gamma evaluator."""

    tol: float = 1e-12

    def self_check(self, samples: int = 200, seed: int = 0) -> float:
        """Max relative residual of the recurrence and reflection identities."""
        rng = np.random.default_rng(seed)
        z = rng.uniform(-4.0, 6.0, size=samples) + 1j * rng.uniform(-8.0, 8.0, size=samples)
        z = z[np.abs(z.imag) > 0.05]
        rec = np.exp(log_gamma(z + 1.0) - log_gamma(z))
        refl = np.exp(log_gamma(z) + log_gamma(1.0 - z))
        target = np.pi / np.sin(np.pi * z)
        gap_rec = np.abs(rec - z) / np.abs(z)
        gap_refl = np.abs(refl - target) / np.abs(target)
        return float(max(gap_rec.max(), gap_refl.max()))


@dataclass(frozen=True)
class BoseParams:
    """Tilt and contour abscissas for the point-interaction evaluators.

    alpha_ladder overrides the vertical-line abscissas of the ordered-point
    formula; entries must descend with gaps above one and end positive,
    each inequality strict with margin LADDER_MARGIN.  alpha is the common
    abscissa of the collapsed equal-point formula.
    """

    theta: float = 0.0
    alpha_ladder: tuple[float, ...] | None = None
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if self.theta < 0:
            raise DomainError(f"need theta >= 0, got {self.theta}")
        if self.alpha < LADDER_MARGIN:
            raise DomainError(f"need alpha > 0, got {self.alpha}")
        if self.alpha_ladder is not None:
            ladder = tuple(float(a) for a in self.alpha_ladder)
            object.__setattr__(self, "alpha_ladder", ladder)
            _validate_ladder(ladder)


def default_ladder(k: int, theta: float) -> tuple[float, ...]:
    """Descending abscissas with 1.25 gaps, centered near the tilt.

    Keeping the lines within O(1) of theta keeps the Gaussian weight
    centered, so no stationary-phase blowup enters the integrand.
    """
    return tuple(theta + 0.5 + 1.25 * (k - a) for a in range(1, k + 1))


def _validate_ladder(alpha: tuple[float, ...]) -> None:
    k = len(alpha)
    if k == 0:
        raise DomainError("empty abscissa ladder")
    for a in range(k - 1):
        if alpha[a] - alpha[a + 1] - 1.0 < LADDER_MARGIN:
            raise DomainError(
                f"ladder needs alpha[{a}] > alpha[{a + 1}] + 1, got {alpha}"
            )
    if alpha[-1] < LADDER_MARGIN:
        raise DomainError(f"ladder must end positive, got {alpha}")


# ---------------------------------------------------------------------------
# Vertical-line axes for the shared tensor evaluator.


def _line_axis(alpha: float, half_len: float, freq: float, gauss: float, rule: QuadratureRule) -> dict:
    """GL-panel nodes on alpha + i[-L, L] plus a half-density twin.

    freq is the frequency of the linear phase along the line and gauss the
    coefficient c of the e^{-c y^2} envelope; both raise the node density.
    The coarse twin halves the panel density (a valid rule in itself, used
    for the error estimate).
    """
    n = max(
        rule.nodes_per_piece,
        _round_even(int(math.ceil(8.0 * (1.0 + freq)))),
        _round_even(int(math.ceil(44.0 * math.sqrt(max(gauss, 0.0))))),
    )
    seg = Segment(z0=alpha - 1j * half_len, z1=alpha + 1j * half_len)
    z, w = piece_nodes(seg, n)
    zc, wc = piece_nodes(seg, max(n // 2, 16))
    return {"z": z, "w": w, "z_half": zc, "w_half": wc}


def _tail(rule: QuadratureRule) -> float:
    return rule.tail_cut if rule.tail_cut > 0.0 else 1e-16


def _check_time(t: float) -> None:
    if t <= 0:
        raise DomainError(f"need t > 0, got {t}")


def _check_points(xs) -> tuple[float, ...]:
    xs = tuple(float(v) for v in xs)
    k = len(xs)
    if k < 1 or k > 3:
        raise DomainError(f"need 1 <= k <= 3 ordered points, got {k}")
    if any(xs[a] >= xs[a + 1] for a in range(k - 1)):
        raise DomainError(f"points must be strictly increasing, got {xs}")
    return xs


# ---------------------------------------------------------------------------
# Ordered-point and free-start moments.


def delta_bose_moment(
    xs,
    t: float,
    theta: float,
    bose: BoseParams | None = None,
    rule: QuadratureRule | None = None,
) -> MomentResult:
    """Ordered-point moments for the tilted one-sided step start.

    k-fold integral over the descending ladder of vertical lines of
    prod_{a<b} (z_a - z_b)/(z_a - z_b - 1) * (z_a + z_b - 1)/(z_a + z_b)
    against weights exp((t/2)(z_a - theta)^2 + (z_a - theta) x_a) / z_a.
    """
    xs = _check_points(xs)
    k = len(xs)
    _check_time(t)
    if theta < 0:
        raise DomainError(f"need theta >= 0, got {theta}")
    rule = rule or QuadratureRule()
    if bose is not None and bose.alpha_ladder is not None:
        ladder = bose.alpha_ladder
        if len(ladder) != k:
            raise DomainError(f"ladder length {len(ladder)} != number of points {k}")
    else:
        ladder = default_ladder(k, theta)
    _validate_ladder(ladder)
    offset = max(0.5 * t * (a - theta) ** 2 for a in ladder)
    if offset > 100.0:
        _warnings.warn(
            "ladder sits far from the tilt; Gaussian prefactor reaches "
            f"exp({offset:.0f}) and the result is ill-conditioned",
            RuntimeWarning,
        )
    half_len = math.sqrt(2.0 * math.log(1.0 / _tail(rule)) / t) + abs(theta) + 4.0
    axes = [
        _line_axis(ladder[a], half_len, abs(t * (ladder[a] - theta) + xs[a]), 0.5 * t, rule)
        for a in range(k)
    ]

    def diag(a, z):
        return np.exp(0.5 * t * (z - theta) ** 2 + (z - theta) * xs[a]) / z

    def pair(a, b, za, zb):
        return (za - zb) / (za - zb - 1.0) * (za + zb - 1.0) / (za + zb)

    return _tensor_result(axes, diag, pair, 1.0, "tilted_lines", DEFAULT_MAX_POINTS)


def narrow_wedge_moment(xs, t: float, rule: QuadratureRule | None = None) -> MomentResult:
    """Point-mass-start moments at strictly ordered points.

    Same ladder-of-lines structure with the single cross factor
    (z_a - z_b)/(z_a - z_b - 1) and weights exp((t/2) z_a^2 + z_a x_a).
    """
    xs = _check_points(xs)
    k = len(xs)
    _check_time(t)
    rule = rule or QuadratureRule()
    axes = _free_axes(k, t, max(abs(v) for v in xs), rule)

    def diag(a, z):
        return np.exp(0.5 * t * z * z + z * xs[a])

    return _tensor_result(axes, diag, _free_pair, 1.0, "free_lines", DEFAULT_MAX_POINTS)


def _free_pair(a, b, za, zb):
    return (za - zb) / (za - zb - 1.0)


def _free_axes(k: int, t: float, x_scale: float, rule: QuadratureRule) -> list[dict]:
    """Line axes for the point-mass-start integrand, reused by the chamber check."""
    ladder = default_ladder(k, 0.0)
    half_len = math.sqrt(2.0 * math.log(1.0 / _tail(rule)) / t) + 4.0
    return [
        _line_axis(ladder[a], half_len, abs(t * ladder[a]) + x_scale, 0.5 * t, rule)
        for a in range(k)
    ]


# ---------------------------------------------------------------------------
# Collapsed equal-point formula (string expansion with Gamma ratios).


def _pole_line_distance(abscissa: float) -> float:
    """Distance from the vertical line Re = abscissa to the nonpositive integers.

    The lines cross Im = 0, so the conditioning of a numerator Gamma factor
    is set by the real offset alone.
    """
    nearest = min(0.0, round(abscissa))
    return abs(abscissa - nearest)


def _collapsed_term(parts, x, t, theta, alpha, rule) -> MomentResult:
    """One string composition's integral over equal-abscissa lines."""
    ell = len(parts)
    tail = _tail(rule)
    axes = []
    numerator_lines = [2.0 * alpha]
    for a in range(ell):
        n_a = parts[a]
        half_len = math.sqrt(2.0 * math.log(1.0 / tail) / (t * n_a)) + abs(theta) + 4.0
        freq = n_a * abs(t * (alpha - theta) + x)
        axes.append(_line_axis(alpha, half_len, freq, 0.5 * t * n_a, rule))
        for b in range(a + 1, ell):
            d = 0.5 * (parts[a] - parts[b])
            numerator_lines.extend([2.0 * alpha + d, 2.0 * alpha - d])
    if min(_pole_line_distance(c) for c in numerator_lines) < 1e-6:
        _warnings.warn(
            "numerator Gamma argument within 1e-6 of a pole; collapsed term "
            "is ill-conditioned",
            RuntimeWarning,
        )

    def diag(a, w):
        n_a = parts[a]
        args = 2.0 * w
        phase = (
            t * (n_a**3 / 24.0 - n_a / 24.0 + 0.5 * n_a * (w - theta) ** 2)
            + x * n_a * (w - theta)
        )
        return np.exp(phase + log_gamma(args) - log_gamma(args + n_a)) / n_a

    def pair(a, b, wa, wb):
        na, nb = parts[a], parts[b]
        d = 0.5 * (na - nb)
        s = 0.5 * (na + nb)
        base = wa + wb
        cross = (wa - wb + d) * (wb - wa + d) / ((wa - wb + s) * (wb - wa + s))
        # 1/Gamma(base - s) goes through the entire reciprocal (reflection)
        # because Re(base - s) can sit on a nonpositive integer where the
        # grid has mirrored nodes with Im = 0; the factor is a zero there,
        # not a singularity.
        ratio = np.exp(
            log_gamma(base + d)
            + log_gamma(base - d)
            + log_gamma(1.0 - base + s)
            - log_gamma(base + s)
        ) * (np.sin(np.pi * (base - s)) / np.pi)
        return cross * ratio

    return _tensor_result(axes, diag, pair, 1.0, "collapsed_strings", DEFAULT_MAX_POINTS)


def she_halfflat_moment_collapsed(
    k: int,
    x: float,
    t: float,
    theta: float,
    bose: BoseParams | None = None,
    rule: QuadratureRule | None = None,
) -> MomentResult:
    """Equal-point moments via the string expansion on one common abscissa.

    2^k k! sum over string counts ell and compositions of k into ell
    positive strings, each contributing an ell-fold equal-abscissa line
    integral of a Cauchy-type determinant, cubic-in-string-length
    exponential weights, per-string Gamma ratios, and pairwise Gamma
    crossover products.  At theta = 0 these are the one-sided-step moments
    of the multiplicative-noise heat equation.
    """
    if k < 0 or k > 3:
        raise DomainError(f"need 0 <= k <= 3, got {k}")
    _check_time(t)
    if theta < 0:
        raise DomainError(f"need theta >= 0, got {theta}")
    alpha = bose.alpha if bose is not None else 0.5
    rule = rule or QuadratureRule()
    if k == 0:
        return MomentResult(value=1.0 + 0j, err_estimate=0.0, method="collapsed_strings", node_counts=())
    total = 0j
    err = 0.0
    counts: list[int] = []
    pref_k = 2.0**k * math.factorial(k)
    for ell in range(1, k + 1):
        scale = pref_k / math.factorial(ell)
        for comp in compositions(k, ell):
            res = _collapsed_term(comp.parts, x, t, theta, alpha, rule)
            total += scale * res.value
            err += scale * res.err_estimate
            counts.extend(res.node_counts)
    return MomentResult(
        value=total, err_estimate=err, method="collapsed_strings", node_counts=tuple(counts)
    )


# ---------------------------------------------------------------------------
# Ordered-chamber linearity check.


def _chamber_grid(lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite 16-point GL nodes on [lo, hi], ~1.5-unit panels."""
    panels = max(3, int(math.ceil((hi - lo) / 1.5)))
    edges = np.linspace(lo, hi, panels + 1)
    gl_x, gl_w = np.polynomial.legendre.leggauss(16)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    y = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
    wy = (half[:, None] * gl_w[None, :]).ravel()
    return y, wy


def weyl_linearity_check(
    k: int, x: float, t: float, theta: float, rule: QuadratureRule | None = None
) -> float:
    """Absolute gap between the chamber route and the collapsed formula.

    Integrates the point-mass-start moment against the tilted step weights
    prod_a e^{-theta (x - y_a)} over the truncated ordered chamber
    {y_1 < ... < y_k <= x, y_a > x - Y} and compares with
    she_halfflat_moment_collapsed(k, x, t, theta).
    """
    if k not in (1, 2):
        raise DomainError(f"need k in {{1, 2}}, got {k}")
    _check_time(t)
    if theta < 0:
        raise DomainError(f"need theta >= 0, got {theta}")
    rule = rule or QuadratureRule()
    collapsed = she_halfflat_moment_collapsed(k, x, t, theta, rule=rule).value
    depth = math.sqrt(2.0 * t * math.log(1e8)) + abs(x) + 4.0 * math.sqrt(t) + 4.0
    lo = x - depth
    axes = _free_axes(k, t, max(abs(x), abs(lo)), rule)
    if k == 1:
        z = axes[0]["z"]
        wz = axes[0]["w"] * np.exp(0.5 * t * z * z)
        y, wy = _chamber_grid(lo, x)
        vals = np.exp(np.outer(y, z)) @ wz
        boundary = abs(vals[0] * math.exp(-theta * (x - lo)))
        chamber = complex(np.sum(wy * np.exp(-theta * (x - y)) * vals))
    else:
        z1, z2 = axes[0]["z"], axes[1]["z"]
        w1 = axes[0]["w"] * np.exp(0.5 * t * z1 * z1)
        w2 = axes[1]["w"] * np.exp(0.5 * t * z2 * z2)
        kernel = w1[:, None] * _free_pair(0, 1, z1[:, None], z2[None, :]) * w2[None, :]
        y2, wy2 = _chamber_grid(lo, x)
        glue = kernel @ np.exp(np.outer(z2, y2))
        chamber = 0j
        boundary = 0.0
        for j in range(y2.size):
            y1, wy1 = _chamber_grid(lo, y2[j])
            vals = np.exp(np.outer(y1, z1)) @ glue[:, j]
            if j == 0:
                boundary = abs(vals[0]) * math.exp(-theta * (2.0 * x - y1[0] - y2[0]))
            inner = np.sum(wy1 * np.exp(-theta * (x - y1)) * vals)
            chamber += wy2[j] * math.exp(-theta * (x - y2[j])) * inner
        chamber *= 2.0
    if boundary > 1e-8:
        _warnings.warn(
            f"chamber truncated before the integrand decayed (boundary {boundary:.2e})",
            RuntimeWarning,
        )
    return float(abs(chamber - collapsed))
