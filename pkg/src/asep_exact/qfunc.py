"""q-deformed special functions used by the exact moment formulas.

Everything here is double precision with explicit geometric truncation of the
infinite q-products.  Inputs may be scalars or numpy arrays; array inputs are
evaluated elementwise with broadcasting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "PoleError",
    "ModelParams",
    "QTruncation",
    "DEFAULT_TRUNC",
    "poch_inf",
    "poch_finite",
    "poch_tail_bound",
    "q_gamma",
    "q_factorial",
    "q_binomial",
    "q_exp",
    "germ_f",
    "germ_g",
    "germ_h",
    "germ_h0",
]


class DomainError(ValueError):
    """Parameter outside the domain of an operation."""


class PoleError(ArithmeticError):
    """Evaluation requested at (or numerically on top of) a pole."""


@dataclass(frozen=True)
class ModelParams:
    """Asymmetric exclusion rates: jump right with rate p, left with rate q.

    Normalized so p + q = 1 with 0 < p < q (drift toward -infinity).  The
    deformation parameter is tau = p/q in (0, 1) and the time scale is
    gamma = q - p.
    """

    p: float
    q: float

    def __post_init__(self) -> None:
        if not (0.0 < self.p < self.q):
            raise DomainError(f"need 0 < p < q, got p={self.p}, q={self.q}")
        if abs(self.p + self.q - 1.0) > 1e-12:
            raise DomainError(f"rates must satisfy p + q = 1, got {self.p + self.q}")

    @classmethod
    def from_p(cls, p: float) -> "ModelParams":
        return cls(p=float(p), q=1.0 - float(p))

    @classmethod
    def from_tau(cls, tau: float) -> "ModelParams":
        if not (0.0 < tau < 1.0):
            raise DomainError(f"need tau in (0,1), got {tau}")
        return cls(p=tau / (1.0 + tau), q=1.0 / (1.0 + tau))

    @property
    def tau(self) -> float:
        return self.p / self.q

    @property
    def gamma(self) -> float:
        return self.q - self.p


@dataclass(frozen=True)
class QTruncation:
    """Truncation control for infinite q-products."""

    tol: float = 1e-14
    max_terms: int = 4096

    def __post_init__(self) -> None:
        if not (0.0 < self.tol < 1.0):
            raise DomainError(f"need 0 < tol < 1, got {self.tol}")
        if self.max_terms < 1:
            raise DomainError(f"need max_terms >= 1, got {self.max_terms}")


DEFAULT_TRUNC = QTruncation()


def _num_terms(a_max: float, q: float, trunc: QTruncation) -> int:
    # Geometric tail: |log prod_{n>N}| <= |a| q^{N+1} / (1-q) < tol.
    if a_max == 0.0:
        return 1
    n = math.ceil(math.log(trunc.tol * (1.0 - q) / max(1.0, a_max)) / math.log(q))
    return int(min(max(n, 1) + 2, trunc.max_terms))


def poch_tail_bound(a, q: float, n_terms: int) -> float:
    """Upper bound on the relative truncation error of an n_terms product."""
    a_max = float(np.max(np.abs(a))) if np.ndim(a) else abs(a)
    r = a_max * q**n_terms / (1.0 - q)
    return math.expm1(r) if r < 1.0 else math.inf


def poch_inf(a, q: float, trunc: QTruncation = DEFAULT_TRUNC):
    """Infinite q-Pochhammer symbol prod_{n>=0} (1 - q^n a).

    Parameters
    ----------
    a : complex or ndarray
        Argument(s); any magnitude is allowed since only q^n a must shrink.
    q : float
        Base, strictly inside (0, 1).
    trunc : QTruncation
        Tolerance and term cap; the product stops once the geometric tail
        bound drops below trunc.tol.
    """
    if not (0.0 < q < 1.0):
        raise DomainError(f"need 0 < q < 1, got {q}")
    arr = np.asarray(a)
    a_max = float(np.max(np.abs(arr))) if arr.size else 0.0
    n = _num_terms(a_max, q, trunc)
    out = np.ones_like(arr, dtype=complex)
    qn = 1.0
    for _ in range(n):
        out = out * (1.0 - qn * arr)
        qn *= q
    return out if np.ndim(a) else complex(out)


def poch_finite(a, q: float, n: int):
    """Finite q-Pochhammer symbol prod_{j=0}^{n-1} (1 - q^j a)."""
    if n < 0:
        raise DomainError(f"need n >= 0, got {n}")
    arr = np.asarray(a)
    out = np.ones_like(arr, dtype=complex)
    qj = 1.0
    for _ in range(n):
        out = out * (1.0 - qj * arr)
        qj *= q
    return out if np.ndim(a) else complex(out)


def q_gamma(x, q: float, trunc: QTruncation = DEFAULT_TRUNC):
    """q-Gamma function (1-q)^(1-x) (q;q)_inf / (q^x;q)_inf.

    The two infinite products are evaluated jointly in log space; the ratio
    terms decay like q^n |q^x - q| so the evaluation stays finite even as
    q -> 1, where each product alone underflows.
    """
    if not (0.0 < q < 1.0):
        raise DomainError(f"need 0 < q < 1, got {q}")
    xarr = np.asarray(x, dtype=complex)
    qx = np.exp(xarr * math.log(q))
    scale = float(np.max(np.abs(qx - q))) if xarr.size else 0.0
    if scale == 0.0:
        n = 1
    else:
        n = math.ceil(math.log(trunc.tol * (1.0 - q) / scale) / math.log(q))
        n = int(min(max(n, 1) + 2, 500_000))
    ns = np.arange(n, dtype=float)
    qn = np.exp(ns * math.log(q))
    num_factors = -np.expm1((ns + 1.0) * math.log(q))  # 1 - q^{n+1}, exact near 1
    den_factors = 1.0 - qx[..., None] * qn if xarr.ndim else 1.0 - qx * qn
    if np.any(np.abs(den_factors) < 1e-13):
        raise PoleError(f"q_gamma pole at x={x}")
    log_ratio = np.sum(np.log(num_factors) - np.log(den_factors), axis=-1)
    out = np.asarray(np.exp((1.0 - xarr) * math.log(1.0 - q) + log_ratio))
    return out if np.ndim(x) else complex(out)


def q_factorial(m: int, q: float) -> float:
    """q-factorial prod_{a=1}^m (1-q^a) / (1-q)^m, with 0 -> 1."""
    if m < 0:
        raise DomainError(f"need m >= 0, got {m}")
    out = 1.0
    for a in range(1, m + 1):
        out *= (1.0 - q**a) / (1.0 - q)
    return out


def q_binomial(n: int, k: int, q: float) -> float:
    """Gaussian binomial coefficient n_q! / (k_q! (n-k)_q!)."""
    if k < 0 or k > n:
        raise DomainError(f"need 0 <= k <= n, got n={n}, k={k}")
    # Evaluate as a product of ratios to avoid overflow for larger n.
    out = 1.0
    for j in range(1, k + 1):
        out *= (1.0 - q ** (n - k + j)) / (1.0 - q**j)
    return out


def q_exp(x, q: float, trunc: QTruncation = DEFAULT_TRUNC):
    """q-exponential 1 / ((1-q) x; q)_inf.

    Agrees with sum_k x^k / k_q! for |x| < 1 and continues it beyond.
    """
    den = poch_inf((1.0 - q) * np.asarray(x, dtype=complex), q, trunc)
    if np.any(np.abs(den) < 1e-250):
        raise PoleError(f"q_exp pole at x={x}")
    out = np.asarray(1.0 / den)
    return out if np.ndim(x) else complex(out)


def _tau_pow(n, tau: float):
    return np.exp(np.asarray(n, dtype=complex) * math.log(tau))


def germ_f(w, n, x: int, t: float, params: ModelParams):
    """Single-variable weight combining the jump measure and the site factor.

    Returns (1-tau)^n exp(gamma t [1/(1+w) - 1/(1+tau^n w)])
    ((1+tau^n w)/(1+w))^(x-1).  n may be complex (a Mellin-Barnes variable);
    powers use the principal branch.
    """
    tau = params.tau
    warr = np.asarray(w, dtype=complex)
    if np.any(np.abs(1.0 + warr) == 0.0):
        raise PoleError("germ_f pole at w=-1")
    tn = _tau_pow(n, tau)
    shifted = 1.0 + tn * warr
    if np.any(np.abs(shifted) == 0.0):
        raise PoleError("germ_f essential singularity at 1 + tau^n w = 0")
    ratio = shifted / (1.0 + warr)
    val = (
        np.exp(np.asarray(n, dtype=complex) * math.log1p(-tau))
        * np.exp(params.gamma * t * (1.0 / (1.0 + warr) - 1.0 / shifted))
        * ratio ** (x - 1)
    )
    out = np.asarray(val)
    return out if (np.ndim(w) or np.ndim(n)) else complex(out)


def germ_g(w, n, tau: float, trunc: QTruncation = DEFAULT_TRUNC):
    """Single-variable Pochhammer weight.

    (-w;tau)_inf/(-tau^n w;tau)_inf * (tau^{2n} w^2;tau)_inf/(tau^n w^2;tau)_inf.
    """
    warr = np.asarray(w, dtype=complex)
    tn = _tau_pow(n, tau)
    num = poch_inf(-warr, tau, trunc) * poch_inf(tn * tn * warr**2, tau, trunc)
    den = poch_inf(-tn * warr, tau, trunc) * poch_inf(tn * warr**2, tau, trunc)
    if np.any(np.abs(den) < 1e-250):
        raise PoleError(f"germ_g pole at w={w}, n={n}")
    out = np.asarray(num / den)
    return out if (np.ndim(w) or np.ndim(n)) else complex(out)


def germ_h0(z, n1, n2, tau: float, trunc: QTruncation = DEFAULT_TRUNC):
    """Pair weight in its single-argument form.

    (z;tau)_inf (tau^{n1+n2} z;tau)_inf
    / ((tau^{n1} z;tau)_inf (tau^{n2} z;tau)_inf).
    """
    zarr = np.asarray(z, dtype=complex)
    t1 = _tau_pow(n1, tau)
    t2 = _tau_pow(n2, tau)
    num = poch_inf(zarr, tau, trunc) * poch_inf(t1 * t2 * zarr, tau, trunc)
    den = poch_inf(t1 * zarr, tau, trunc) * poch_inf(t2 * zarr, tau, trunc)
    if np.any(np.abs(den) < 1e-250):
        raise PoleError(f"germ_h0 pole at z={z}")
    out = np.asarray(num / den)
    scalar = not (np.ndim(z) or np.ndim(n1) or np.ndim(n2))
    return complex(out) if scalar else out


def germ_h(w1, w2, n1, n2, tau: float, trunc: QTruncation = DEFAULT_TRUNC):
    """Pair weight; depends on its two w arguments only through w1*w2."""
    return germ_h0(np.asarray(w1, dtype=complex) * np.asarray(w2, dtype=complex), n1, n2, tau, trunc)
