"""Large-surplus bounds and asymptotics for the delayed model.

Every delay correction enters through the tail integral
``I(t) = int_t^inf (1 - L(s)) ds``:

* ruin probability: ``exp(-alpha x + alpha rho I(t))`` is an upper bound and
  the large-``x`` asymptotic; multiplying by ``exp(-alpha rho I(t + x/rho))``
  gives a lower bound.
* ruin-time Laplace transform: same with ``beta(theta)`` and the exponent
  ``(beta rho - theta) I(t) - theta t``.
* expected ruin time when ``lam E[Y] < rho``: a sandwich whose lower end is
  the asymptotic.

The ruin-time laws are built from :func:`first_passage_law`, the law of the
first passage to zero for the undelayed model started at surplus ``x`` at
time ``start``.  The Laplace transforms handled here all factor as
``exp(-theta * start) * exp(-beta * x)``, so every density in this package is
such a law with shifted arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError, InvalidParameterError, NetConditionError, RegionError
from .lundberg import solve_alpha, solve_beta
from .model import CheckedModel, ProfitDistribution, QueryPoint
from .quadrature import integrate_to_infinity

SERIES_TOL = 1e-12
SERIES_CAP = 500


@dataclass(frozen=True)
class BoundsResult:
    """Two-sided bound with one end flagged as the large-``x`` asymptotic.

    ``lower``/``upper`` are clamped to ``[0, 1]`` for probabilities; the
    unclamped values are kept in ``raw_lower``/``raw_upper``.
    """

    lower: float
    upper: float
    asymptotic: float
    which_is_asymptotic: str
    raw_lower: float
    raw_upper: float
    asymptotic_in_x: bool = True

    def __post_init__(self):
        if self.which_is_asymptotic not in ("lower", "upper"):
            raise ValueError("which_is_asymptotic must be 'lower' or 'upper'")


@dataclass(frozen=True)
class AtomPlusDensity:
    """A (possibly defective) law on ``[support_start, inf)``.

    ``atoms`` holds ``(location, mass)`` pairs with the principal atom (ruin
    with no realized profit) first. Deterministic profits add lattice atoms
    after it and have a zero density.
    """

    atoms: tuple[tuple[float, float], ...]
    density: Callable[[float], float]
    support_start: float
    scale: float = field(default=1.0, compare=False)

    @property
    def atom_location(self) -> float:
        return self.atoms[0][0]

    @property
    def atom_mass(self) -> float:
        return self.atoms[0][1]

    def atom_total(self) -> float:
        return math.fsum(m for _, m in self.atoms)

    def continuous_mass(self, theta: float = 0.0) -> float:
        """``int exp(-theta T) density(T) dT`` by adaptive quadrature."""
        if theta == 0.0:
            f = self.density
        else:
            def f(T):
                return math.exp(-theta * T) * self.density(T)
        return integrate_to_infinity(f, self.support_start, self.scale)

    def laplace(self, theta: float) -> float:
        """``E[exp(-theta tau); tau < inf]`` combining atoms and density."""
        atoms = math.fsum(m * math.exp(-theta * loc) for loc, m in self.atoms)
        return atoms + self.continuous_mass(theta)

    def total_mass(self) -> float:
        return self.atom_total() + self.continuous_mass()


def _require_net(model: CheckedModel):
    if model.net_margin <= 0.0:
        raise NetConditionError(
            f"net condition lambda*E[Y] > rho fails (margin {model.net_margin:.6g})"
        )


def first_passage_density(
    u: float,
    x: float,
    rho: float,
    lam: float,
    profit: ProfitDistribution,
    tol: float = SERIES_TOL,
    cap: int = SERIES_CAP,
) -> float:
    """Density at elapsed time ``u`` of the first passage to 0 from surplus ``x``, no delay.

    Evaluates ``rho x sum_n (lam/rho)^n/n! (rho u)^(n-1) exp(-lam u) p^{*n}(rho u - x)``
    in log space. Terms are summed until one falls below ``tol`` times the
    partial sum on the decreasing side of the peak. At least ``cap`` terms
    are examined; the window widens past ``cap`` when the Poisson count
    ``lam u`` or the renewal count ``y / E[Y]`` puts the peak further out.
    Failing to settle inside the window raises :class:`ConvergenceError`.
    """
    y = rho * u - x
    if x <= 0.0 or y <= 0.0 or profit.atomic:
        return 0.0
    centre = max(lam * u, y / profit.mean())
    cap = max(cap, int(centre + 12.0 * math.sqrt(centre) + 60.0))
    n = np.arange(1, cap + 1)
    logs = (
        math.log(rho * x)
        + n * math.log(lam / rho)
        - gammaln(n + 1)
        + (n - 1) * math.log(rho * u)
        - lam * u
        + np.asarray(profit.log_convolution_density(n, y))
    )
    peak = logs.max()
    if not math.isfinite(peak):
        return 0.0
    w = np.exp(logs - peak)
    partial = np.cumsum(w)
    past_peak = np.empty(cap, dtype=bool)
    past_peak[0] = True
    past_peak[1:] = w[1:] <= w[:-1]
    done = np.flatnonzero((w < tol * partial) & past_peak & (n >= np.argmax(w) + 1))
    if done.size == 0:
        raise ConvergenceError(f"ruin-time density series not converged in {cap} terms (u={u:g})")
    return float(math.exp(peak) * partial[done[0]])


def _lattice_atoms(x, start, rho, lam, y0, tol, cap):
    """Atoms of the first-passage law for deterministic profits ``y0``."""
    atoms = []
    masses = []
    for k in range(1, cap + 1):
        s = (x + k * y0) / rho
        log_mass = math.log(x) - math.log(x + k * y0) + k * math.log(lam * s) - lam * s - math.lgamma(k + 1)
        m = math.exp(log_mass)
        atoms.append((start + s, m))
        masses.append(m)
        total = math.fsum(masses)
        if k > 1 and m < tol * total and m <= masses[-2]:
            return atoms
    raise ConvergenceError(f"lattice atom series not converged in {cap} terms")


def first_passage_law(
    x: float,
    start: float,
    model: CheckedModel,
    tol: float = SERIES_TOL,
    cap: int = SERIES_CAP,
) -> AtomPlusDensity:
    """Law of ``start + (first passage time to 0)`` for the undelayed model from surplus ``x``.

    The principal atom sits at ``start + x/rho`` with mass ``exp(-lam x/rho)``.
    """
    rho, lam, profit = model.rho, model.lam, model.profit
    T0 = start + x / rho
    if x <= 0.0:
        return AtomPlusDensity(((start, 1.0),), lambda T: 0.0, start, scale=1.0 / lam)
    atoms = [(T0, math.exp(-lam * x / rho))]
    scale = max(x / rho, 1.0 / lam, 1.0 / rho)
    if profit.atomic:
        atoms.extend(_lattice_atoms(x, start, rho, lam, profit.mean(), tol, cap))
        return AtomPlusDensity(tuple(atoms), lambda T: 0.0, T0, scale=scale)

    def density(T: float) -> float:
        if T <= T0:
            return 0.0
        return first_passage_density(T - start, x, rho, lam, profit, tol, cap)

    return AtomPlusDensity(tuple(atoms), density, T0, scale=scale)


# ---------------------------------------------------------------------------
# Ruin probability
# ---------------------------------------------------------------------------


def ruin_prob_bounds(q: QueryPoint, model: CheckedModel) -> BoundsResult:
    """Sandwich for the ultimate ruin probability; the upper end is the asymptotic."""
    _require_net(model)
    alpha = solve_alpha(model.params, model.profit).value
    return _prob_bounds(q.x, q.t, alpha, model)


def _prob_bounds(x: float, t: float, alpha: float, model: CheckedModel) -> BoundsResult:
    ar = alpha * model.rho
    i_now = float(model.tail_integral(t))
    i_ruin = float(model.tail_integral(t + x / model.rho))
    log_upper = -alpha * x + ar * i_now
    raw_upper = math.exp(log_upper)
    raw_lower = math.exp(log_upper - ar * i_ruin)
    upper = min(1.0, raw_upper)
    lower = min(1.0, raw_lower)
    return BoundsResult(lower, upper, upper, "upper", raw_lower, raw_upper)


def ruin_laplace_asymptotic(q: QueryPoint, theta: float, model: CheckedModel) -> BoundsResult:
    """Bracket for ``E[exp(-theta tau_t)]``; the upper end is the asymptotic.

    ``exp(-beta x + (beta rho - theta) I(t) - theta t)`` is the upper bound and
    ``exp(-(beta rho - theta) I(t + x/rho))`` times it the lower bound.
    """
    if not theta > 0.0:
        raise InvalidParameterError(f"theta must be positive (use ruin_prob_bounds for theta = 0), got {theta!r}")
    beta = solve_beta(model.params, model.profit, theta).value
    c = beta * model.rho - theta
    i_now = float(model.tail_integral(q.t))
    i_ruin = float(model.tail_integral(q.t + q.x / model.rho))
    upper = math.exp(-beta * q.x + c * i_now - theta * q.t)
    lower = upper * math.exp(-c * i_ruin)
    return BoundsResult(lower, upper, upper, "upper", lower, upper)


def ruin_time_law_asymptotic(q: QueryPoint, model: CheckedModel) -> AtomPlusDensity:
    """Atom and density obtained by inverting the asymptotic Laplace transform.

    The transform equals ``exp(-theta (t + I(t))) * exp(-beta (x - rho I(t)))``,
    i.e. the undelayed first-passage law from surplus ``x - rho I(t)`` started
    at time ``t + I(t)``. The atom is at ``t + x/rho``.
    """
    _require_net(model)
    i_now = float(model.tail_integral(q.t))
    x_eff = q.x - model.rho * i_now
    if x_eff < 0.0:
        raise RegionError(
            f"x = {q.x:g} is below rho*I(t) = {model.rho * i_now:g}; the density asymptotic is not defined there"
        )
    return first_passage_law(x_eff, q.t + i_now, model)


def ruin_density_asymptotic(
    T: float,
    q: QueryPoint,
    model: CheckedModel,
    tol: float = SERIES_TOL,
) -> float:
    """Continuous part of the asymptotic ruin-time density at time ``T``.

    Zero for ``T <= t + x/rho``. The atom at ``t + x/rho`` is available from
    :func:`ruin_time_law_asymptotic`.
    """
    _require_net(model)
    rho = model.rho
    i_now = float(model.tail_integral(q.t))
    x_eff = q.x - rho * i_now
    if x_eff < 0.0:
        raise RegionError(
            f"x = {q.x:g} is below rho*I(t) = {rho * i_now:g}; the density asymptotic is not defined there"
        )
    if T <= q.t + q.x / rho:
        return 0.0
    return first_passage_density(T - q.t - i_now, x_eff, rho, model.lam, model.profit, tol=tol)


# ---------------------------------------------------------------------------
# Expected ruin time
# ---------------------------------------------------------------------------


def mean_ruin_time_bounds(q: QueryPoint, model: CheckedModel) -> BoundsResult:
    """Sandwich for ``E[tau_t]`` when ``lam E[Y] < rho``; the lower end is the asymptotic."""
    if model.net_margin >= 0.0:
        raise NetConditionError(
            "ruin time is not a.s. finite-mean: needs lambda*E[Y] < rho "
            f"(margin {model.net_margin:.6g})"
        )
    drift = -model.net_margin  # rho - lam E[Y]
    weight = model.lam * model.profit.mean() / drift
    lower = q.t + q.x / drift - weight * float(model.tail_integral(q.t))
    upper = lower + weight * float(model.tail_integral(q.t + q.x / model.rho))
    return BoundsResult(lower, upper, lower, "lower", lower, upper)


__all__ = [
    "AtomPlusDensity",
    "BoundsResult",
    "first_passage_density",
    "first_passage_law",
    "mean_ruin_time_bounds",
    "ruin_density_asymptotic",
    "ruin_laplace_asymptotic",
    "ruin_prob_bounds",
    "ruin_time_law_asymptotic",
]
