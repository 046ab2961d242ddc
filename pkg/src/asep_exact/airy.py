"""Crossover-kernel Fredholm determinants for the half-flat scaling limit.

The limiting one-point law of the rescaled height is a Fredholm determinant
det(I - K) on L^2([2^{1/3} r, oo)) of a crossover kernel K interpolating
between Airy2 statistics on one side and Airy1-type statistics on the other.
The kernel is a double contour integral with cubic-exponent weights: the
lambda-carrying variable u runs over rays through 1 at angles +-pi/3, the
lambda'-carrying variable v over rays through 0 at angles +-2pi/3, both
oriented upward, with coupling factor 2u/(u^2-v^2) and a parabolic shift
x^2 2^{-2/3} applied to the arguments when x <= 0.

Orientation, determined empirically (the determinant must be a CDF in r):

* the coupling numerator carries the lambda-side variable u; with the
  numerator on the v side the determinant exceeds 1 for x >= 0 and no sign
  choice repairs both spatial limits,
* x -> -infinity reproduces the Airy2 (GUE) determinant F2(2^{1/3} r) with a
  first-order correction decaying like 1/|x| (measured gap*|x| ~ 0.224),
* x -> +infinity reproduces the Airy1-type determinant
  det(I - Ai(xi+eta)) on L^2([r, oo)) superexponentially fast.

Three evaluation routes keep the integrand well conditioned:

* direct (-2.5 <= x <= 3.0): contours exactly as stated above;
* split_neg (x < -2.5): substituting u -> u + 2^{-1/3} x absorbs the
  parabolic shift; the conjugation factor this produces is dropped, so the
  returned kernel is determinant-equivalent to the direct one (verified to
  1e-14 at the route boundary);
* split_pos (x > 3.0): the v contour is rebased to -(a+1) with
  a = 2^{-1/3} x, sweeping the pole at v = -u; the swept residue equals
  2^{-1/3} Ai(2^{-1/3}(lambda+lambda')) and is added back via the
  wedge-contour Airy evaluator.

The Airy function itself is evaluated by the same kind of wedge contour
(rays at +-pi/3 through an argument-adapted base), and the independent
comparison oracles build the Airy2 kernel from quadrature over products of
those Airy values rather than from the crossover contour machinery.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qfunc import DomainError
from .quad import Ray, Segment, piece_nodes

CBRT2 = 2.0 ** (1.0 / 3.0)
INV_CBRT2 = 2.0 ** (-1.0 / 3.0)

ROUTE_NEG_X = -2.5
ROUTE_POS_X = 3.0
TRUNCATION_FLOOR = 1e-18
IMAG_TOL = 1e-8

__all__ = [
    "ConsistencyError",
    "KernelSpec",
    "NystromGrid",
    "airy_ai",
    "airy_oracles",
    "fredholm_det",
    "halfflat_limit_cdf",
    "k2to1",
]


class ConsistencyError(RuntimeError):
    """A value that must be real (up to roundoff) came out complex."""


@dataclass(frozen=True)
class KernelSpec:
    """Contour settings for the crossover kernel.

    Parameters
    ----------
    x : float
        Spatial parameter of the kernel; enters the quadratic exponent
        through a = 2^{-1/3} x and the parabolic argument shift for x <= 0.
    ray_length : float, optional
        Truncation length of each contour ray.
    nodes_per_ray : int, optional
        Requested quadrature density per ray (panelized Gauss-Legendre).
    """

    x: float
    ray_length: float = 8.0
    nodes_per_ray: int = 96

    def __post_init__(self) -> None:
        if not np.isfinite(self.x):
            raise DomainError("kernel spatial parameter must be finite")
        if self.ray_length < 6.0:
            raise DomainError("ray_length below 6 cannot reach cubic decay")
        if self.nodes_per_ray < 32:
            raise DomainError("need at least 32 nodes per ray")


@dataclass(frozen=True)
class NystromGrid:
    """Gauss-Legendre discretization of [lower, lower + span].

    Parameters
    ----------
    lower : float
        Left endpoint; the determinant lives on L^2([lower, oo)).
    span : float, optional
        Truncation length; the kernel decays superexponentially so the
        truncation error is dominated by quadrature error.
    n : int, optional
        Number of Gauss-Legendre nodes.
    """

    lower: float
    span: float = 10.0
    n: int = 40

    def __post_init__(self) -> None:
        if not np.isfinite(self.lower):
            raise DomainError("grid lower endpoint must be finite")
        if self.span < 8.0:
            raise DomainError("span below 8 truncates the kernel support")
        if self.n < 24:
            raise DomainError("need at least 24 quadrature nodes")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        base, weights = _leggauss(self.n)
        half = 0.5 * self.span
        return self.lower + half * (base + 1.0), half * weights


@lru_cache(maxsize=16)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=8)
def _unit_panels(n: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes on (0,1) with plain dt weights (the 1/(2 pi i) of piece_nodes
    # is stripped so callers can attach their own direction factors)
    z, w = piece_nodes(Segment(z0=0.0, z1=1.0), n)
    t = np.real(z)
    wt = np.real(w * 2.0j * math.pi)
    t.setflags(write=False)
    wt.setflags(write=False)
    return t, wt


def airy_ai(s):
    """Airy function Ai on the real line via a wedge contour integral.

    The contour consists of rays at angles +-pi/3 through an
    argument-adapted base point max(0.7, sqrt(s)); weights carry the
    1/(2 pi i) prefactor. Vectorized over array input.

    Parameters
    ----------
    s : float or array_like
        Real evaluation points.

    Returns
    -------
    float or numpy.ndarray
        Ai(s), real; for large positive s the result is accurate in an
        absolute sense (the value underflows superexponentially).
    """
    arr = np.asarray(s, dtype=float)
    flat = arr.reshape(-1)
    base = np.sqrt(np.clip(flat, 0.49, 900.0))
    length = 7.5 + 0.5 * base
    t, wt = _unit_panels(320)
    rot = np.exp(1j * math.pi / 3.0)
    # real argument: the incoming ray contributes the conjugate of the
    # outgoing one, so the integral is 2 Re of the outgoing half
    z = base[:, None] + (length[:, None] * t[None, :]) * rot
    w = (length[:, None] * wt[None, :]) * (rot / (2.0j * math.pi))
    out = 2.0 * np.real(
        np.sum(np.exp(z**3 / 3.0 - z * flat[:, None]) * w, axis=1)
    )
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _route(x: float) -> str:
    if x < ROUTE_NEG_X:
        return "split_neg"
    if x > ROUTE_POS_X:
        return "split_pos"
    return "direct"


@lru_cache(maxsize=32)
def _wedge_axis(
    base: float, angle: float, length: float, n: int
) -> tuple[np.ndarray, np.ndarray]:
    zin, win = piece_nodes(
        Ray(origin=base, angle=-angle, length=length, direction=-1), n
    )
    zout, wout = piece_nodes(
        Ray(origin=base, angle=angle, length=length, direction=1), n
    )
    z = np.concatenate([zin, zout])
    w = np.concatenate([win, wout])
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def _guard_rays(log_mag: np.ndarray, which: str) -> None:
    # axis ordering: incoming ray far end first, outgoing ray far end last
    peak = float(np.max(log_mag))
    tail = max(float(np.max(log_mag[:16])), float(np.max(log_mag[-16:])))
    if tail - peak > math.log(TRUNCATION_FLOOR):
        warnings.warn(
            f"{which} ray too short for cubic decay; increase ray_length",
            RuntimeWarning,
            stacklevel=3,
        )


def _kernel_matrix(
    lam: np.ndarray,
    lam_prime: np.ndarray,
    spec: KernelSpec,
    route: str | None = None,
) -> np.ndarray:
    """Crossover kernel on the grid lam x lam_prime as a dense matrix."""
    route = _route(spec.x) if route is None else route
    a = INV_CBRT2 * spec.x
    shift = 2.0 ** (-2.0 / 3.0) * spec.x**2 if spec.x <= 0.0 else 0.0
    lam = np.asarray(lam, dtype=float)
    lam_prime = np.asarray(lam_prime, dtype=float)

    vbase = -(a + 1.0) if route == "split_pos" else 0.0
    u, wu = _wedge_axis(1.0, math.pi / 3.0, spec.ray_length, spec.nodes_per_ray)
    v, wv = _wedge_axis(vbase, 2.0 * math.pi / 3.0, spec.ray_length, spec.nodes_per_ray)

    if route == "split_neg":
        if spec.x > 0.0:
            raise DomainError("split_neg route requires x <= 0")
        lh, lhp = lam, lam_prime
        exp_u = u**3 / 3.0
        exp_v = -(v**3) / 3.0
        coupling = (
            2.0
            * (u[:, None] - a)
            / ((u[:, None] - v[None, :]) * (u[:, None] + v[None, :] - 2.0 * a))
        )
    else:
        lh, lhp = lam - shift, lam_prime - shift
        exp_u = u**3 / 3.0 + a * u**2
        exp_v = -(v**3) / 3.0 - a * v**2
        coupling = 2.0 * u[:, None] / (u[:, None] ** 2 - v[None, :] ** 2)

    _guard_rays(np.real(exp_u) - np.real(u) * float(np.min(lh)), "u")
    _guard_rays(np.real(exp_v) + np.real(v) * float(np.max(lhp)), "v")

    left = np.exp(np.outer(-lh, u) + exp_u[None, :]) * wu[None, :]
    right = np.exp(np.outer(v, lhp) + exp_v[:, None]) * wv[:, None]
    kernel = left @ (coupling @ right)

    if route == "split_pos":
        args = INV_CBRT2 * (lh[:, None] + lhp[None, :])
        kernel = kernel + INV_CBRT2 * airy_ai(args)
    return kernel


def k2to1(lam, lam_prime, spec: KernelSpec):
    """Crossover kernel K(lambda, lambda') as a double contour integral.

    For x < -2.5 the returned values are a determinant-equivalent conjugate
    of the direct-contour kernel (the conjugation factor e^{a(lam-lam')}
    is dropped); Fredholm determinants are unaffected.

    Parameters
    ----------
    lam, lam_prime : float or array_like
        Kernel arguments; broadcast against each other.
    spec : KernelSpec
        Contour settings, including the spatial parameter x.

    Returns
    -------
    complex or numpy.ndarray
        Kernel values; the imaginary part is roundoff (conjugate-symmetric
        node set).
    """
    lam_b, lamp_b = np.broadcast_arrays(
        np.asarray(lam, dtype=float), np.asarray(lam_prime, dtype=float)
    )
    lam_u, inv_i = np.unique(lam_b.reshape(-1), return_inverse=True)
    lamp_u, inv_j = np.unique(lamp_b.reshape(-1), return_inverse=True)
    matrix = _kernel_matrix(lam_u, lamp_u, spec)
    flat = matrix[inv_i, inv_j]
    if lam_b.ndim == 0:
        return complex(flat[0])
    return flat.reshape(lam_b.shape)


def _nystrom_det(kernel_matrix: np.ndarray, weights: np.ndarray) -> float:
    root = np.sqrt(weights)
    m = root[:, None] * kernel_matrix * root[None, :]
    det = np.linalg.det(np.eye(len(weights)) - m)
    if abs(det.imag) >= IMAG_TOL:
        raise ConsistencyError(
            f"determinant imaginary part {det.imag:.3e} exceeds {IMAG_TOL}"
        )
    return float(det.real)


def fredholm_det(kernel, grid: NystromGrid) -> float:
    """Nystrom Fredholm determinant det(I - K) on [lower, lower + span].

    Parameters
    ----------
    kernel : callable
        Vectorized two-argument kernel; called once with broadcastable
        column/row node arrays and must return the full matrix.
    grid : NystromGrid
        Quadrature discretization of the truncated domain.

    Returns
    -------
    float
        Real part of det(I - sqrt(w_i) K(x_i, x_j) sqrt(w_j)).

    Raises
    ------
    ConsistencyError
        If the determinant's imaginary part is at least 1e-8.
    """
    xi, w = grid.nodes()
    matrix = np.asarray(kernel(xi[:, None], xi[None, :]), dtype=complex)
    return _nystrom_det(matrix, w)


@lru_cache(maxsize=4)
def _airy2_tail_panels(smax: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    # unit-width Gauss-Legendre panels on [0, smax]; the integrand
    # Ai(xi+t)Ai(eta+t) is smooth with at most sqrt|xi| oscillation
    base, weights = _leggauss(16)
    width = smax / panels
    offsets = width * np.arange(panels)
    t = (offsets[:, None] + 0.5 * width * (base[None, :] + 1.0)).reshape(-1)
    wt = np.broadcast_to(0.5 * width * weights, (panels, 16)).reshape(-1).copy()
    t.setflags(write=False)
    wt.setflags(write=False)
    return t, wt


def airy_oracles(s: float, grid: NystromGrid | None = None) -> tuple[float, float]:
    """Independent Airy2 and Airy1-type Fredholm determinant oracles.

    The Airy2 kernel is assembled as integral over t >= 0 of
    Ai(xi + t) Ai(eta + t) using wedge-contour Airy values; the Airy1-type
    kernel is Ai(xi + eta). Both determinants are taken on [s, s + span].
    The crossover determinant approaches the first as x -> -infinity (at
    argument 2^{1/3} r) and the second as x -> +infinity (at argument r).

    Parameters
    ----------
    s : float
        Lower endpoint, restricted to [-10, 6].
    grid : NystromGrid, optional
        Quadrature override; the lower endpoint is forced to s.

    Returns
    -------
    tuple of float
        (Airy2 determinant, Airy1-type determinant).
    """
    if not -10.0 <= s <= 6.0:
        raise DomainError("oracle endpoint outside [-10, 6]")
    grid = NystromGrid(lower=s) if grid is None else dataclasses.replace(grid, lower=s)
    xi, w = grid.nodes()
    t, wt = _airy2_tail_panels(28.0, 28)
    ai_tail = airy_ai(xi[:, None] + t[None, :])
    airy2 = _nystrom_det((ai_tail * wt[None, :]) @ ai_tail.T, w)
    airy1 = _nystrom_det(airy_ai(xi[:, None] + xi[None, :]), w)
    return airy2, airy1


def halfflat_limit_cdf(
    x: float,
    r: float,
    spec: KernelSpec | None = None,
    grid: NystromGrid | None = None,
) -> float:
    """Predicted limiting CDF of the scaled half-flat height at (x, r).

    Thin wrapper: evaluates det(I - K) on L^2([2^{1/3} r, oo)) for the
    crossover kernel at spatial parameter x, which is the conjectured limit
    of the probability that the centered height at position t^{2/3} x,
    scaled by t^{1/3} and with the parabola removed on x <= 0, stays above
    -r.

    Parameters
    ----------
    x, r : float
        Spatial parameter and CDF argument.
    spec : KernelSpec, optional
        Contour settings; the spatial parameter is forced to x.
    grid : NystromGrid, optional
        Quadrature settings; the lower endpoint is forced to 2^{1/3} r.

    Returns
    -------
    float
        Determinant value in [0, 1] up to discretization error.
    """
    spec = KernelSpec(x=x) if spec is None else dataclasses.replace(spec, x=x)
    lower = CBRT2 * r
    grid = (
        NystromGrid(lower=lower)
        if grid is None
        else dataclasses.replace(grid, lower=lower)
    )
    xi, w = grid.nodes()
    return _nystrom_det(_kernel_matrix(xi, xi, spec), w)
