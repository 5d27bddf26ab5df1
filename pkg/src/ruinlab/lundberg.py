"""Adjustment coefficients.

``alpha`` is the positive root of ``rho*s + lam*(E[exp(-sY)] - 1) = 0`` and
``beta(theta)`` the positive root of the same function shifted by ``-theta``.
Both are found by geometric bracket expansion, bisection, and a short Newton
polish. :func:`beta_series` evaluates the Lagrange-inversion series for
``beta`` term by term and is kept independent of the solver so the two can
check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

from .errors import ConvergenceError, InvalidParameterError, NetConditionError
from .model import ModelParams, ProfitDistribution

RESIDUAL_TOL = 1e-12
MAX_ITERATIONS = 200
SERIES_CAP = 200


@dataclass(frozen=True)
class LundbergRoot:
    value: float
    residual: float
    iterations: int

    def __float__(self):
        return self.value


def lundberg_function(s, rho: float, lam: float, profit: ProfitDistribution, theta: float = 0.0):
    """``rho*s + lam*(LT(s) - 1) - theta``."""
    return rho * s + lam * profit.laplace_minus_one(s) - theta


def _solve(rho: float, lam: float, profit: ProfitDistribution, theta: float) -> LundbergRoot:
    def g(s):
        return lundberg_function(s, rho, lam, profit, theta)

    if theta > 0.0:
        f = g
        lo = 0.0
    else:
        # g(0) = 0 is the trivial root; g(s)/s is increasing and crosses zero at alpha
        def f(s):
            return rho + lam * profit.laplace_minus_one(s) / s

        lo = 0.0

    # g(s) >= rho*s - lam - theta, so the bracket closes by (lam + theta)/rho
    hi = min(1.0 / profit.mean(), (lam + theta) / rho)
    iterations = 0
    while f(hi) <= 0.0:
        lo = hi
        hi *= 2.0
        iterations += 1
        if iterations > MAX_ITERATIONS:
            raise ConvergenceError("could not bracket the Lundberg root")

    for _ in range(MAX_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 4e-16 * hi:
            break
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        iterations += 1
    root = 0.5 * (lo + hi)

    # Newton polish on g itself, kept only while it improves the residual
    residual = float(g(root))
    for _ in range(3):
        slope = rho + lam * float(profit.laplace_derivative(root))
        if slope == 0.0:
            break
        candidate = root - residual / slope
        if not (candidate > 0.0):
            break
        cand_residual = float(g(candidate))
        if abs(cand_residual) >= abs(residual):
            break
        root, residual = candidate, cand_residual
        iterations += 1

    if abs(residual) > RESIDUAL_TOL * max(1.0, rho * root):
        raise ConvergenceError(f"Lundberg root residual {residual:.3e} above tolerance")
    return LundbergRoot(float(root), residual, iterations)


def solve_alpha(params: ModelParams, profit: ProfitDistribution, lam_scale: float = 1.0) -> LundbergRoot:
    """Positive root of ``rho*a + lam*(LT(a) - 1) = 0``.

    ``lam_scale`` multiplies the intensity; ``lam_scale = 1 - eps`` gives the
    thinned coefficient used in the epsilon bounds.
    """
    lam = params.lam * lam_scale
    if lam * profit.mean() - params.rho <= 0.0:
        raise NetConditionError(
            f"net condition violated: lambda*E[Y] = {lam * profit.mean():.6g} <= rho = {params.rho:.6g}"
        )
    return _solve(params.rho, lam, profit, 0.0)


def solve_beta(params: ModelParams, profit: ProfitDistribution, theta: float) -> LundbergRoot:
    """Positive root of ``rho*b + lam*(LT(b) - 1) - theta = 0``; ``theta = 0`` returns alpha."""
    theta = float(theta)
    if not math.isfinite(theta) or theta < 0.0:
        raise InvalidParameterError(f"theta must be nonnegative, got {theta!r}")
    if theta == 0.0:
        return solve_alpha(params, profit)
    return _solve(params.rho, params.lam, profit, theta)


def beta_series(params: ModelParams, profit: ProfitDistribution, theta: float, tol: float = 1e-12) -> float:
    """Lagrange-inversion series for ``beta(theta)``.

    ``beta = (theta+lam)/rho - sum_n (lam/rho)^n/n! * int y^(n-1) exp(-c y) dP^{*n}(y)``
    with ``c = (lam+theta)/rho``. Summation stops at the first term below
    ``tol``; hitting the cap of 200 terms raises :class:`ConvergenceError`.
    """
    if theta <= 0.0:
        raise InvalidParameterError(f"beta_series needs theta > 0, got {theta!r}")
    if tol <= 0.0:
        raise InvalidParameterError("tol must be positive")
    rho, lam = params.rho, params.lam
    c = (lam + theta) / rho
    log_ratio = math.log(lam / rho)
    total = 0.0
    for n in range(1, SERIES_CAP + 1):
        log_term = n * log_ratio - gammaln(n + 1) + float(profit.log_gamma_moment(n, c))
        term = math.exp(log_term)
        total += term
        if term < tol:
            return c - total
    raise ConvergenceError(f"beta series not converged after {SERIES_CAP} terms (theta={theta})")


def alpha_exponential(rho: float, lam: float, nu: float) -> float:
    """Closed-form alpha for exponential profits."""
    return lam / rho - nu


def beta_exponential(rho: float, lam: float, nu: float, theta: float) -> float:
    """Closed-form beta for exponential profits (positive root of a quadratic)."""
    b = rho * nu - lam - theta
    disc = b * b + 4.0 * rho * nu * theta
    if b < 0.0:
        return (-b + math.sqrt(disc)) / (2.0 * rho)
    # the other branch loses digits when b > 0; use the product of roots instead
    return 2.0 * nu * theta / (b + math.sqrt(disc)) if theta > 0.0 else 0.0


__all__ = [
    "LundbergRoot",
    "alpha_exponential",
    "beta_exponential",
    "beta_series",
    "lundberg_function",
    "solve_alpha",
    "solve_beta",
]
