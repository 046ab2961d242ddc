"""Event-driven exclusion-process simulator and exact finite-window oracle.

Dynamics: each particle carries an exponential clock of total rate one and
attempts a right jump with probability p, left with probability q = 1 - p;
attempts blocked by the exclusion rule or the closed window boundary consume
time (thinning), which realizes the generator exactly.  Half-flat initial
data occupies every positive even site.

Two independent evaluators of the same dynamics are provided: a Monte Carlo
engine over splittable counter-based random streams, and an exact
continuous-time Markov chain expectation on small windows computed by
uniformization of the truncated generator.  Both serve as ground truth for
the contour-integral formulas in the exact module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import sparse

from .qfunc import DomainError, ModelParams, q_exp

__all__ = [
    "LatticeState",
    "Observable",
    "init_halfflat",
    "run_until",
    "default_window",
    "mc_expectation",
    "ctmc_exact_expectation",
    "CTMC_STATE_CAP",
    "MC_BLOCK",
]

MC_BLOCK = 1 << 16
CTMC_STATE_CAP = 2_000_000


@dataclass
class LatticeState:
    """Occupancies on the integer window [left, right] plus the net current.

    flux0 counts signed crossings of the bond between sites 1 and 0: jumps
    1 -> 0 add one, jumps 0 -> 1 subtract one.
    """

    left: int
    right: int
    occ: np.ndarray
    flux0: int = 0

    def __post_init__(self) -> None:
        if self.left >= self.right:
            raise DomainError(f"need left < right, got [{self.left}, {self.right}]")
        if self.occ.shape != (self.right - self.left + 1,):
            raise DomainError("occupancy length must match the window")
        if np.any((self.occ != 0) & (self.occ != 1)):
            raise DomainError("occupancies must be 0 or 1")

    def positions(self) -> np.ndarray:
        """Sorted lattice coordinates of all particles."""
        return np.flatnonzero(self.occ).astype(np.int64) + self.left

    def count_leq(self, x: int) -> int:
        """Number of particles at or to the left of x."""
        return int(np.sum(self.positions() <= x))


@dataclass(frozen=True)
class Observable:
    """One scalar functional of the configuration at a fixed time.

    kind selects among: 'tau_pow_N' (tau^(k N_x)), 'qtilde_product'
    (product over sites of occupancy times tau^(N_{x-1})),
    'etau_of_zeta_tauN' (q-exponential of zeta tau^(N_x)), and
    'height_indicator' (indicator of {h(t,x) >= threshold} with the height
    built from the tracked current).
    """

    kind: str
    x: int = 0
    k: int = 1
    xs: tuple[int, ...] = ()
    zeta: float = 0.0
    threshold: float = 0.0

    @classmethod
    def tau_pow_N(cls, k: int, x: int) -> Observable:
        if k < 1:
            raise DomainError(f"need k >= 1, got {k}")
        return cls(kind="tau_pow_N", k=k, x=x)

    @classmethod
    def qtilde_product(cls, xs) -> Observable:
        xs = tuple(int(v) for v in xs)
        if not xs:
            raise DomainError("need at least one site")
        return cls(kind="qtilde_product", xs=xs)

    @classmethod
    def etau_of_zeta_tauN(cls, zeta: float, x: int) -> Observable:
        return cls(kind="etau_of_zeta_tauN", zeta=float(zeta), x=x)

    @classmethod
    def height_indicator(cls, x: int, threshold: float) -> Observable:
        return cls(kind="height_indicator", x=x, threshold=float(threshold))

    def sites(self) -> tuple[int, ...]:
        if self.kind == "qtilde_product":
            return self.xs
        return (self.x,)


def _check_observable_window(obs: Observable, left: int, right: int) -> None:
    if not (left <= 0 <= right):
        raise DomainError(f"window [{left}, {right}] must contain the origin")
    for x in obs.sites():
        lo = left + 1 if obs.kind == "qtilde_product" else left
        if not (lo <= x <= right):
            raise DomainError(f"observable site {x} outside window [{left}, {right}]")


def init_halfflat(window: tuple[int, int]) -> LatticeState:
    """Occupy every positive even site of the window; empty elsewhere."""
    left, right = int(window[0]), int(window[1])
    if not (left <= 0 <= right):
        raise DomainError(f"window [{left}, {right}] must contain the origin")
    occ = np.zeros(right - left + 1, dtype=np.int8)
    for x in range(2, right + 1, 2):
        occ[x - left] = 1
    return LatticeState(left=left, right=right, occ=occ, flux0=0)


def run_until(
    state: LatticeState,
    t: float,
    params: ModelParams,
    rng_stream: np.random.Generator,
    check: bool = False,
) -> LatticeState:
    """Evolve one replica in place up to time t and return it.

    The event count over [0, t] is Poisson with mean (number of particles)
    times t because every particle attempts jumps at total rate one,
    including suppressed attempts.
    """
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    pos = state.positions()
    n_part = pos.size
    if n_part == 0 or t == 0.0:
        return state
    n_events = int(rng_stream.poisson(n_part * t))
    if n_events == 0:
        return state
    picks = rng_stream.integers(0, n_part, size=n_events)
    rights = rng_stream.random(size=n_events) < params.p
    flux = state.flux0
    for i in range(n_events):
        j = picks[i]
        here = pos[j]
        if rights[i]:
            tgt = here + 1
            blocked = tgt > state.right or (j + 1 < n_part and pos[j + 1] == tgt)
        else:
            tgt = here - 1
            blocked = tgt < state.left or (j > 0 and pos[j - 1] == tgt)
        if blocked:
            continue
        pos[j] = tgt
        if here == 1 and tgt == 0:
            flux += 1
        elif here == 0 and tgt == 1:
            flux -= 1
        if check:
            assert np.all(np.diff(pos) > 0), "exclusion violated"
    state.occ[:] = 0
    state.occ[pos - state.left] = 1
    state.flux0 = flux
    return state


def default_window(obs: Observable, t: float) -> tuple[int, int]:
    """Window wide enough that boundary effects are negligible at time t."""
    w = math.ceil(4.0 * t) + 32
    lo = min(min(obs.sites()), 0)
    hi = max(max(obs.sites()), 0)
    return (lo - w, hi + w)


def _observable_values(
    obs: Observable,
    positions: np.ndarray,
    params: ModelParams,
    flux0: np.ndarray | None,
) -> np.ndarray:
    """Evaluate the observable on a (replicas, particles) position matrix.

    flux0=None uses the particle count at or left of the origin, which equals
    the tracked current pathwise when every particle starts right of 0.
    """
    tau = params.tau
    n_part = positions.shape[1]
    if obs.kind == "tau_pow_N":
        n_x = np.sum(positions <= obs.x, axis=1)
        table = tau ** (obs.k * np.arange(n_part + 1, dtype=np.float64))
        return table[n_x]
    if obs.kind == "qtilde_product":
        out = np.ones(positions.shape[0], dtype=np.float64)
        table = tau ** np.arange(n_part + 1, dtype=np.float64)
        for x in obs.xs:
            eta = np.any(positions == x, axis=1)
            n_prev = np.sum(positions <= x - 1, axis=1)
            out *= eta * table[n_prev]
        return out
    if obs.kind == "etau_of_zeta_tauN":
        n_x = np.sum(positions <= obs.x, axis=1)
        table = np.empty(n_part + 1, dtype=np.float64)
        for j in range(n_part + 1):
            val = q_exp(obs.zeta * tau**j, tau)
            table[j] = float(np.real(val))
        return table[n_x]
    if obs.kind == "height_indicator":
        n_x = np.sum(positions <= obs.x, axis=1)
        n_0 = np.sum(positions <= 0, axis=1)
        if flux0 is None:
            flux0 = n_0
        h = 2 * flux0 + 2 * (n_x - n_0) - obs.x
        return (h >= obs.threshold).astype(np.float64)
    raise DomainError(f"unknown observable kind {obs.kind!r}")


def _mc_block(
    obs: Observable,
    t: float,
    params: ModelParams,
    window: tuple[int, int],
    seed: int,
    block: int,
    n_keep: int,
) -> np.ndarray:
    left, right = window
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, block], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    sites0 = np.arange(2, right + 1, 2, dtype=np.int16)
    n_part = sites0.size
    n_rep = MC_BLOCK
    flux = np.zeros(n_rep, dtype=np.int32)
    positions = np.tile(sites0, (n_rep, 1))
    if n_part > 0 and t > 0.0:
        n_ev = rng.poisson(n_part * t, size=n_rep)
        rows = np.arange(n_rep)
        sentinel_hi = np.int16(32000)
        sentinel_lo = np.int16(-32000)
        for step in range(int(n_ev.max())):
            idx = rng.integers(0, n_part, size=n_rep)
            go_right = rng.random(size=n_rep) < params.p
            active = n_ev > step
            pos = positions[rows, idx]
            nb_r = np.where(
                idx + 1 < n_part,
                positions[rows, np.minimum(idx + 1, n_part - 1)],
                sentinel_hi,
            )
            nb_l = np.where(idx > 0, positions[rows, np.maximum(idx - 1, 0)], sentinel_lo)
            ok_r = (pos + 1 <= right) & (nb_r != pos + 1)
            ok_l = (pos - 1 >= left) & (nb_l != pos - 1)
            do_r = active & go_right & ok_r
            do_l = active & ~go_right & ok_l
            positions[rows[do_r], idx[do_r]] = pos[do_r] + 1
            positions[rows[do_l], idx[do_l]] = pos[do_l] - 1
            flux += do_l & (pos == 1)
            flux -= do_r & (pos == 0)
    vals = _observable_values(obs, positions.astype(np.int64), params, flux)
    return vals[:n_keep]


def mc_expectation(
    obs: Observable,
    t: float,
    params: ModelParams,
    samples: int,
    seed: int,
    window: tuple[int, int] | None = None,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error over independent replicas.

    Replica r lives in block r // MC_BLOCK; each block derives its own
    counter-based stream from (seed, block), so results are reproducible
    and independent of any parallel schedule.
    """
    if samples < 100:
        raise DomainError(f"need samples >= 100, got {samples}")
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    if window is None:
        window = default_window(obs, t)
    _check_observable_window(obs, window[0], window[1])
    total = 0.0
    total_sq = 0.0
    n_blocks = math.ceil(samples / MC_BLOCK)
    for block in range(n_blocks):
        n_keep = min(MC_BLOCK, samples - block * MC_BLOCK)
        vals = _mc_block(obs, t, params, window, seed, block, n_keep)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
    mean = total / samples
    if samples > 1:
        var = max(0.0, (total_sq - samples * mean * mean) / (samples - 1))
        stderr = math.sqrt(var / samples)
    else:
        stderr = 0.0
    return mean, stderr


def _colex_configs(n_sites: int, n_part: int) -> np.ndarray:
    """All n_part-subsets of range(n_sites), row index equal to combinadic rank."""
    configs = np.array(list(combinations(range(n_sites), n_part)), dtype=np.int32)
    if n_part == 0:
        return np.zeros((1, 0), dtype=np.int32)
    table = _comb_table(n_sites, n_part)
    ranks = _ranks(configs, table)
    order = np.argsort(ranks, kind="stable")
    configs = configs[order]
    if not np.array_equal(_ranks(configs, table), np.arange(configs.shape[0])):
        raise AssertionError("combinadic ranking is inconsistent")
    return configs


def _comb_table(n_sites: int, n_part: int) -> np.ndarray:
    table = np.zeros((n_sites + 2, n_part + 1), dtype=np.int64)
    for n in range(n_sites + 2):
        for k in range(n_part + 1):
            table[n, k] = math.comb(n, k)
    return table


def _ranks(configs: np.ndarray, table: np.ndarray) -> np.ndarray:
    ranks = np.zeros(configs.shape[0], dtype=np.int64)
    for j in range(configs.shape[1]):
        ranks += table[configs[:, j], j + 1]
    return ranks


def ctmc_exact_expectation(
    obs: Observable,
    t: float,
    params: ModelParams,
    window: tuple[int, int],
) -> float:
    """Exact expectation on a closed window via uniformization.

    The full generator on all particle configurations of the window is built
    sparsely; the Poisson series of the uniformized chain is truncated once
    its cumulative weight reaches 1 - 1e-12.  Deterministic.
    """
    if t < 0:
        raise DomainError(f"need t >= 0, got {t}")
    left, right = int(window[0]), int(window[1])
    _check_observable_window(obs, left, right)
    n_sites = right - left + 1
    init_sites = np.arange(2 - left, right + 1 - left, 2, dtype=np.int64)
    n_part = init_sites.size
    n_states = math.comb(n_sites, n_part)
    if n_states > CTMC_STATE_CAP:
        raise DomainError(
            f"window [{left}, {right}] has {n_states} states, cap is {CTMC_STATE_CAP}"
        )
    configs = _colex_configs(n_sites, n_part)
    table = _comb_table(n_sites, n_part)
    ranks = np.arange(n_states, dtype=np.int64)

    values = _observable_values(obs, configs.astype(np.int64) + left, params, None)

    if n_part == 0 or t == 0.0:
        init_rank = int(np.sum(table[init_sites, np.arange(1, n_part + 1)])) if n_part else 0
        return float(values[init_rank])

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    rates: list[np.ndarray] = []
    for j in range(n_part):
        c = configs[:, j]
        not_blocked_right = c + 1 <= n_sites - 1
        if j + 1 < n_part:
            not_blocked_right &= configs[:, j + 1] != c + 1
        dst = ranks - table[c, j + 1] + table[c + 1, j + 1]
        rows.append(ranks[not_blocked_right])
        cols.append(dst[not_blocked_right])
        rates.append(np.full(int(not_blocked_right.sum()), params.p))

        not_blocked_left = c - 1 >= 0
        if j > 0:
            not_blocked_left &= configs[:, j - 1] != c - 1
        dst = ranks - table[c, j + 1] + table[c - 1, j + 1]
        rows.append(ranks[not_blocked_left])
        cols.append(dst[not_blocked_left])
        rates.append(np.full(int(not_blocked_left.sum()), params.q))

    row = np.concatenate(rows)
    col = np.concatenate(cols)
    rate = np.concatenate(rates)
    lam = float(n_part)
    # Uniformized one-step kernel P = I + Q/lam, row-stochastic.
    kernel = sparse.coo_matrix((rate / lam, (row, col)), shape=(n_states, n_states)).tocsr()
    out_rate = np.asarray(kernel.sum(axis=1)).ravel()
    kernel = kernel + sparse.diags(1.0 - out_rate)

    init_rank = int(np.sum(table[init_sites, np.arange(1, n_part + 1)]))
    v = np.zeros(n_states, dtype=np.float64)
    v[init_rank] = 1.0

    mu = lam * t
    weight = math.exp(-mu)
    acc = weight * float(v @ values)
    cum = weight
    n_term = 0
    while cum < 1.0 - 1e-12:
        n_term += 1
        v = kernel.T @ v
        weight *= mu / n_term
        acc += weight * float(v @ values)
        cum += weight
        if n_term > 100 * (mu + 10):
            raise ArithmeticError("uniformization series failed to converge")
    return acc
