"""Seeded Monte Carlo for the delayed dual risk process.

Realized profits arrive as a non-homogeneous Poisson process with rate
``lam * L(s)``, generated by thinning a homogeneous rate-``lam`` stream.
Between arrivals the surplus falls linearly, so ruin is located exactly.

Random numbers come from SplitMix64. Path ``i`` of seed ``s`` owns the stream
whose origin is ``mix(mix(s) + (i + 1) * PATH_STRIDE)``; the ``k``-th draw is
``mix(origin + k * GOLDEN)``. A path's draws depend only on ``(seed, i)``,
so results do not depend on how paths are split across worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidParameterError, NetConditionError
from .lundberg import solve_alpha
from .model import CheckedModel, QueryPoint

RUINED, SURVIVED = 0, 1
MAX_DOUBLINGS = 30

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_PATH_STRIDE = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 2.0 ** -53


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@njit(nogil=True, cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(nogil=True, cache=True)
def _origin(seed, path):
    return _mix(_mix(seed) + (np.uint64(path) + _ONE) * _PATH_STRIDE)


@njit(nogil=True, cache=True)
def _uniform(state):
    """Next draw in (0, 1) and the advanced state."""
    state = state + _GOLDEN
    z = _mix(state)
    return (float(z >> _S11) + 0.5) * _TWO_M53, state


@njit(nogil=True, cache=True)
def _delay_cdf(code, par, s):
    if s < 0.0:
        return 0.0
    if code == 0:
        return 1.0
    if code == 1:
        return 1.0 if s >= par else 0.0
    if code == 2:
        return min(s / par, 1.0)
    if code == 3:
        return -math.expm1(-par * s)
    if code == 4:
        return 1.0 - (1.0 + s) ** (-par)
    return -math.expm1(-par * s * s)


@njit(nogil=True, cache=True)
def _profit(code, a, b, state):
    if code == 2:
        return a, state
    if code == 0:
        u, state = _uniform(state)
        return -math.log(u) / a, state
    total = 0.0
    for _ in range(int(a)):
        u, state = _uniform(state)
        total -= math.log(u)
    return total / b, state


@njit(nogil=True, cache=True)
def _advance(seed, path, x, t, horizon, cap, rho, lam, pcode, pa, pb, dcode, dpar, rec_t, rec_y):
    """Run one path from ``(x, t)``; returns (status, end_time, end_surplus, n_jumps).

    Paths alive at ``horizon`` get the horizon doubled (relative to ``t``) on
    the same stream until ``cap`` is reached. Jumps are written to
    ``rec_t``/``rec_y`` while they fit; the jump count is always exact.
    """
    state = _origin(seed, path)
    time = t
    surplus = x
    jumps = 0
    if surplus <= 0.0:
        return RUINED, t, 0.0, 0
    h = horizon
    u, state = _uniform(state)
    cand = time - math.log(u) / lam
    while True:
        hit = time + surplus / rho
        if hit <= cand and hit <= h:
            return RUINED, hit, 0.0, jumps
        if cand > h:
            if h < cap:
                h = min(t + 2.0 * (h - t), cap)
                continue
            return SURVIVED, h, max(surplus - rho * (h - time), 0.0), jumps
        surplus = max(surplus - rho * (cand - time), 0.0)
        time = cand
        u, state = _uniform(state)
        if u < _delay_cdf(dcode, dpar, time):
            y, state = _profit(pcode, pa, pb, state)
            if jumps < rec_t.shape[0]:
                rec_t[jumps] = time
                rec_y[jumps] = y
            surplus += y
            jumps += 1
        u, state = _uniform(state)
        cand = time - math.log(u) / lam


@njit(nogil=True, cache=True)
def _run_paths(start, stop, seed, x, t, horizon, cap, rho, lam, pcode, pa, pb, dcode, dpar,
               status, end_time, end_surplus, n_jumps):
    empty = np.empty(0)
    for i in range(start, stop):
        s, et, es, nj = _advance(seed, i, x, t, horizon, cap, rho, lam, pcode, pa, pb, dcode, dpar, empty, empty)
        status[i] = s
        end_time[i] = et
        end_surplus[i] = es
        n_jumps[i] = nj


@njit(nogil=True, cache=True)
def _count_paths(start, stop, seed, s_end, lam, dcode, dpar, counts):
    for i in range(start, stop):
        state = _origin(seed, i)
        time = 0.0
        n = 0
        while True:
            u, state = _uniform(state)
            time -= math.log(u) / lam
            if time > s_end:
                break
            u, state = _uniform(state)
            if u < _delay_cdf(dcode, dpar, time):
                n += 1
        counts[i] = n


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _seed_u64(seed: int) -> np.uint64:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidParameterError(f"seed must be an integer, got {seed!r}")
    return np.uint64(int(seed) & _MASK64)


def _check_paths(n_paths: int) -> int:
    if isinstance(n_paths, bool) or not isinstance(n_paths, (int, np.integer)) or n_paths < 1:
        raise InvalidParameterError(f"n_paths must be a positive integer, got {n_paths!r}")
    return int(n_paths)


def _fan_out(fn, n: int, workers: int | None):
    workers = workers or os.cpu_count() or 1
    if workers < 1:
        raise InvalidParameterError("workers must be positive")
    size = max(1024, -(-n // (4 * workers)))
    chunks = [(a, min(a + size, n)) for a in range(0, n, size)]
    if workers == 1 or len(chunks) == 1:
        for a, b in chunks:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for _ in pool.map(lambda c: fn(*c), chunks):
            pass


def _simulate(q, model, n, horizon, cap, seed, workers):
    status = np.empty(n, dtype=np.int8)
    end_time = np.empty(n)
    end_surplus = np.empty(n)
    n_jumps = np.empty(n, dtype=np.int64)
    pcode, pa, pb = model.profit.kernel_params()
    dcode, dpar = model.delay.kernel_params()
    s64 = _seed_u64(seed)

    def work(a, b):
        _run_paths(a, b, s64, float(q.x), float(q.t), float(horizon), float(cap), model.rho, model.lam,
                   pcode, float(pa), float(pb), dcode, float(dpar), status, end_time, end_surplus, n_jumps)

    _fan_out(work, n, workers)
    return status, end_time, end_surplus, n_jumps


def default_horizon(q: QueryPoint, model: CheckedModel) -> float:
    """``t + max(50/|margin|, 2x/rho)``."""
    margin = abs(model.net_margin) or 1.0
    return q.t + max(50.0 / margin, 2.0 * q.x / model.rho)


@dataclass(frozen=True)
class PathRecord:
    realized_jumps: tuple[tuple[float, float], ...]
    ruin_time: float | None
    surplus_at_horizon: float | None
    horizon: float


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    std_error: float
    lower: float
    upper: float
    n_paths: int
    seed: int
    n_flagged: int = 0


@dataclass(frozen=True)
class DensityEstimate:
    """Ruin-time histogram with integer counts.

    ``counts`` holds ruins away from the principal atom; ``atom_count`` ruins
    with no realized profit; ``survivor_count`` paths alive at the horizon.
    The three always add up to ``n_paths``.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    atom_count: int
    survivor_count: int
    atom_location: float
    n_paths: int
    seed: int

    @property
    def atom_frequency(self) -> float:
        return self.atom_count / self.n_paths

    @property
    def atom_std_error(self) -> float:
        p = self.atom_frequency
        return math.sqrt(p * (1.0 - p) / self.n_paths)

    @property
    def survival_frequency(self) -> float:
        return self.survivor_count / self.n_paths

    @property
    def bin_frequency(self) -> np.ndarray:
        return self.counts / self.n_paths

    @property
    def histogram(self) -> np.ndarray:
        """Density of the non-atom ruin time conditional on ruin."""
        ruined = self.n_paths - self.survivor_count
        if ruined == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / (ruined * np.diff(self.bin_edges))


def sample_path(q: QueryPoint, model: CheckedModel, horizon: float, seed: int) -> PathRecord:
    """One path on ``[t, horizon]`` drawn from stream 0 of ``seed``."""
    if not horizon > q.t:
        raise InvalidParameterError(f"horizon must exceed t = {q.t:g}, got {horizon!r}")
    pcode, pa, pb = model.profit.kernel_params()
    dcode, dpar = model.delay.kernel_params()
    size = 64
    while True:
        rec_t = np.empty(size)
        rec_y = np.empty(size)
        status, end_time, end_surplus, jumps = _advance(
            _seed_u64(seed), 0, float(q.x), float(q.t), float(horizon), float(horizon), model.rho, model.lam,
            pcode, float(pa), float(pb), dcode, float(dpar), rec_t, rec_y,
        )
        if jumps <= size:
            break
        size = 2 * jumps
    record = tuple(zip(rec_t[:jumps].tolist(), rec_y[:jumps].tolist()))
    if status == RUINED:
        return PathRecord(record, float(end_time), None, float(horizon))
    return PathRecord(record, None, float(end_surplus), float(horizon))


def estimate_ruin_probability(
    q: QueryPoint,
    model: CheckedModel,
    n_paths: int,
    horizon: float | None = None,
    seed: int = 0,
    workers: int | None = None,
) -> IntervalEstimate:
    """Interval estimate of the ultimate ruin probability.

    Ruined paths count 1. A path alive at the horizon ``H`` with surplus
    ``X_H`` contributes the large-surplus sandwich evaluated at ``(X_H, H)``.
    ``lower``/``upper`` average the two ends, ``point`` averages the midpoints
    and ``std_error`` is the standard error of the midpoints.
    """
    n = _check_paths(n_paths)
    if model.net_margin <= 0.0:
        raise NetConditionError(f"net condition lambda*E[Y] > rho fails (margin {model.net_margin:.6g})")
    if horizon is None:
        horizon = default_horizon(q, model)
    if horizon < q.t + q.x / model.rho:
        raise InvalidParameterError(f"horizon {horizon:g} is below t + x/rho = {q.t + q.x / model.rho:g}")
    status, _, end_surplus, _ = _simulate(q, model, n, horizon, horizon, seed, workers)

    lo = np.ones(n)
    hi = np.ones(n)
    alive = status == SURVIVED
    if alive.any():
        alpha = solve_alpha(model.params, model.profit).value
        xh = end_surplus[alive]
        ar = alpha * model.rho
        log_up = -alpha * xh + ar * float(model.tail_integral(horizon))
        hi[alive] = np.minimum(1.0, np.exp(log_up))
        lo[alive] = np.minimum(1.0, np.exp(log_up - ar * np.asarray(model.tail_integral(horizon + xh / model.rho))))
    mid = 0.5 * (lo + hi)
    se = float(mid.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return IntervalEstimate(float(mid.mean()), se, float(lo.mean()), float(hi.mean()), n, int(seed))


def estimate_ruin_time_mean(
    q: QueryPoint,
    model: CheckedModel,
    n_paths: int,
    horizon: float | None = None,
    seed: int = 0,
    workers: int | None = None,
    confidence: float = 0.99,
    max_doublings: int = MAX_DOUBLINGS,
) -> IntervalEstimate:
    """Sample mean of the ruin time with a normal ``confidence`` interval.

    Paths alive at the horizon continue on their own stream with the horizon
    doubled, up to ``max_doublings`` times. Paths still alive are flagged,
    enter the mean at their censoring time and make ``upper`` infinite.
    """
    from scipy.stats import norm

    n = _check_paths(n_paths)
    if model.net_margin >= 0.0:
        raise NetConditionError(f"mean ruin time is infinite unless lambda*E[Y] < rho (margin {model.net_margin:.6g})")
    if not 0.0 < confidence < 1.0:
        raise InvalidParameterError("confidence must lie in (0, 1)")
    if horizon is None:
        horizon = q.t + 2.0 * q.x / -model.net_margin + 1.0 / model.lam
    if not horizon > q.t:
        raise InvalidParameterError(f"horizon must exceed t = {q.t:g}")
    cap = q.t + (horizon - q.t) * 2.0 ** max_doublings
    status, end_time, _, _ = _simulate(q, model, n, horizon, cap, seed, workers)
    flagged = int(np.count_nonzero(status != RUINED))
    mean = float(end_time.mean())
    se = float(end_time.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    z = float(norm.ppf(0.5 + 0.5 * confidence))
    upper = math.inf if flagged else mean + z * se
    return IntervalEstimate(mean, se, mean - z * se, upper, n, int(seed), flagged)


def estimate_ruin_density(
    q: QueryPoint,
    model: CheckedModel,
    n_paths: int,
    horizon: float | None = None,
    bin_width: float = 0.1,
    seed: int = 0,
    workers: int | None = None,
) -> DensityEstimate:
    """Histogram of ruin times on ``[t, horizon]`` plus the atom frequency."""
    n = _check_paths(n_paths)
    if not bin_width > 0.0:
        raise InvalidParameterError("bin_width must be positive")
    if horizon is None:
        horizon = default_horizon(q, model)
    if not horizon > q.t:
        raise InvalidParameterError(f"horizon must exceed t = {q.t:g}")
    status, end_time, _, n_jumps = _simulate(q, model, n, horizon, horizon, seed, workers)
    ruined = status == RUINED
    atom = ruined & (n_jumps == 0)
    spread = ruined & ~atom
    n_bins = max(1, math.ceil((horizon - q.t) / bin_width))
    edges = q.t + bin_width * np.arange(n_bins + 1)
    idx = np.clip(((end_time[spread] - q.t) / bin_width).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return DensityEstimate(
        edges,
        counts,
        int(np.count_nonzero(atom)),
        int(np.count_nonzero(~ruined)),
        q.t + q.x / model.rho,
        n,
        int(seed),
    )


def count_realized_profits(model: CheckedModel, s: float, n_paths: int, seed: int = 0, workers: int | None = None) -> np.ndarray:
    """Per-path number of realized profits on ``[0, s]``."""
    n = _check_paths(n_paths)
    if not s > 0.0:
        raise InvalidParameterError("s must be positive")
    counts = np.empty(n, dtype=np.int64)
    dcode, dpar = model.delay.kernel_params()
    s64 = _seed_u64(seed)

    def work(a, b):
        _count_paths(a, b, s64, float(s), model.lam, dcode, float(dpar), counts)

    _fan_out(work, n, workers)
    return counts


def expected_realized_count(model: CheckedModel, s: float) -> float:
    """``lam * int_0^s L(u) du``."""
    return model.lam * (s - (float(model.tail_integral(0.0)) - float(model.tail_integral(s))))


__all__ = [
    "DensityEstimate",
    "IntervalEstimate",
    "PathRecord",
    "count_realized_profits",
    "default_horizon",
    "estimate_ruin_density",
    "estimate_ruin_probability",
    "estimate_ruin_time_mean",
    "expected_realized_count",
    "sample_path",
]
