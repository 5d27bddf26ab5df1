"""Closed forms for constant and bounded-support delays.

With every delay at most ``ell``, the realized-profit intensity is the full
``lam`` from time ``ell`` on, so the process after ``ell`` is the classic dual
model. Before ``ell`` only the deterministic drift and a thinned profit stream
act. Three regions of ``(x, t)`` follow:

* ``pre_delay_low``: ``t < ell`` and ``x <= rho (ell - t)``
* ``pre_delay_high``: ``t < ell`` and ``x > rho (ell - t)``
* ``post_delay``: ``t >= ell``

For constant delays every region has a closed form. For other bounded delays
``pre_delay_low`` has none and is rejected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy import integrate

from .analytics import AtomPlusDensity, first_passage_law
from .errors import DomainError, InvalidParameterError, NetConditionError, RegionError
from .lundberg import solve_alpha, solve_beta
from .model import CheckedModel, ConstantDelay, QueryPoint


class RegionTag(str, enum.Enum):
    PRE_DELAY_LOW = "pre_delay_low"
    PRE_DELAY_HIGH = "pre_delay_high"
    POST_DELAY = "post_delay"


def classify_region(x: float, t: float, ell: float, rho: float) -> RegionTag:
    """Region of ``(x, t)``; the boundary ``x = rho (ell - t)`` belongs to ``pre_delay_low``."""
    if t >= ell:
        return RegionTag.POST_DELAY
    if x <= rho * (ell - t):
        return RegionTag.PRE_DELAY_LOW
    return RegionTag.PRE_DELAY_HIGH


def _constant_ell(model: CheckedModel) -> float:
    if not isinstance(model.delay, ConstantDelay):
        raise DomainError(f"needs a constant delay, got {model.delay.token()}")
    return model.delay.ell


def _bounded_ell(model: CheckedModel) -> float:
    ell = model.delay.support_bound()
    if ell is None:
        raise DomainError(f"needs a delay with bounded support, got {model.delay.token()}")
    return ell


def _require_net(model: CheckedModel):
    if model.net_margin <= 0.0:
        raise NetConditionError(f"net condition lambda*E[Y] > rho fails (margin {model.net_margin:.6g})")


# ---------------------------------------------------------------------------
# Constant delay
# ---------------------------------------------------------------------------


def ruin_prob_constant_delay(q: QueryPoint, model: CheckedModel) -> float:
    """Ultimate ruin probability for a constant delay ``ell``."""
    _require_net(model)
    ell = _constant_ell(model)
    region = classify_region(q.x, q.t, ell, model.rho)
    if region is RegionTag.PRE_DELAY_LOW:
        return 1.0
    alpha = solve_alpha(model.params, model.profit).value
    if region is RegionTag.PRE_DELAY_HIGH:
        return math.exp(-alpha * (q.x - model.rho * (ell - q.t)))
    return math.exp(-alpha * q.x)


def ruin_laplace_constant_delay(q: QueryPoint, theta: float, model: CheckedModel) -> float:
    """``E[exp(-theta tau_t)]`` for a constant delay ``ell``.

    Before ``ell`` the surplus only drifts, so from ``pre_delay_high`` the
    process reaches time ``ell`` with surplus ``x - rho (ell - t)`` and the
    transform is ``exp(-theta ell) exp(-beta (x - rho (ell - t)))``.
    """
    ell = _constant_ell(model)
    if theta < 0.0:
        raise InvalidParameterError(f"theta must be nonnegative, got {theta!r}")
    region = classify_region(q.x, q.t, ell, model.rho)
    if region is RegionTag.PRE_DELAY_LOW:
        return math.exp(-theta * (q.t + q.x / model.rho))
    beta = solve_beta(model.params, model.profit, theta).value
    if region is RegionTag.PRE_DELAY_HIGH:
        return math.exp(-theta * ell - beta * (q.x - model.rho * (ell - q.t)))
    return math.exp(-theta * q.t - beta * q.x)


def ruin_density_constant_delay(q: QueryPoint, model: CheckedModel) -> AtomPlusDensity:
    """Ruin-time law (atom plus density) for a constant delay ``ell``."""
    ell = _constant_ell(model)
    region = classify_region(q.x, q.t, ell, model.rho)
    if region is RegionTag.PRE_DELAY_LOW:
        T0 = q.t + q.x / model.rho
        return AtomPlusDensity(((T0, 1.0),), lambda T: 0.0, T0, scale=1.0)
    if region is RegionTag.PRE_DELAY_HIGH:
        return first_passage_law(q.x - model.rho * (ell - q.t), ell, model)
    return first_passage_law(q.x, q.t, model)


# ---------------------------------------------------------------------------
# Bounded-support delay
# ---------------------------------------------------------------------------


def _survival_mass(t: float, ell: float, model: CheckedModel) -> float:
    """``int_t^ell (1 - L(s)) ds``; zero once ``t >= ell``."""
    if t >= ell:
        return 0.0
    return float(model.delay.survival_integral(t, ell))


def ruin_prob_bounded_delay(q: QueryPoint, model: CheckedModel) -> float:
    """Ruin probability when ``L(ell) = 1``, outside ``pre_delay_low``."""
    _require_net(model)
    ell = _bounded_ell(model)
    region = classify_region(q.x, q.t, ell, model.rho)
    if region is RegionTag.PRE_DELAY_LOW:
        raise RegionError(
            f"no closed form for t < ell and x <= rho (ell - t) (x={q.x:g}, t={q.t:g}, ell={ell:g})"
        )
    alpha = solve_alpha(model.params, model.profit).value
    return math.exp(-alpha * q.x + alpha * model.rho * _survival_mass(q.t, ell, model))


def ruin_density_bounded_delay(q: QueryPoint, model: CheckedModel) -> AtomPlusDensity:
    """Ruin-time law in ``pre_delay_high`` for a bounded-support delay.

    The transform is ``exp(-theta s) exp(-beta x_e)`` with
    ``x_e = x - rho int_t^ell (1-L)`` and ``s = ell - int_t^ell L``, so the law is
    the undelayed first passage from ``x_e`` started at ``s``. Its atom sits at
    ``s + x_e/rho = t + x/rho``.
    """
    ell = _bounded_ell(model)
    region = classify_region(q.x, q.t, ell, model.rho)
    if region is not RegionTag.PRE_DELAY_HIGH:
        raise RegionError(f"density closed form needs t < ell and x > rho (ell - t), got region {region.value}")
    mass = _survival_mass(q.t, ell, model)
    return first_passage_law(q.x - model.rho * mass, q.t + mass, model)


@dataclass(frozen=True)
class EpsilonBounds:
    lower: float
    upper: float
    alpha_eps: float
    ell: float

    def __iter__(self):
        yield self.lower
        yield self.upper


def ruin_prob_epsilon_bounds(q: QueryPoint, epsilon: float, model: CheckedModel) -> EpsilonBounds:
    """Bounds from truncating the delay at its ``1 - epsilon`` quantile ``ell``.

    ``alpha_eps`` solves the Lundberg equation with intensity ``lam (1 - eps)``.
    Requires ``x > rho (ell - t)``.
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidParameterError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    _require_net(model)
    ell = model.delay.quantile(1.0 - epsilon)
    if q.x <= model.rho * (ell - q.t):
        raise RegionError(f"epsilon bounds need x > rho (ell - t) with ell = {ell:g}")
    alpha = solve_alpha(model.params, model.profit).value
    alpha_eps = solve_alpha(model.params, model.profit, lam_scale=1.0 - epsilon).value
    mass = _survival_mass(q.t, ell, model)
    lower = math.exp(-alpha * q.x + alpha * model.rho * mass)
    k = model.rho * alpha_eps / (1.0 - epsilon)
    upper = math.exp(-alpha_eps * q.x + k * epsilon + k * mass)
    return EpsilonBounds(lower, upper, alpha_eps, ell)


# ---------------------------------------------------------------------------
# Residual of the survival equation
# ---------------------------------------------------------------------------


def _central(f, z, h):
    return (f(z + h) - f(z - h)) / (2.0 * h)


def _richardson(f, z, h):
    return (4.0 * _central(f, z, 0.5 * h) - _central(f, z, h)) / 3.0


def pide_residual(solution, q: QueryPoint, model: CheckedModel, h: float = 1e-4, quad_tol: float = 1e-10) -> float:
    """Residual of ``phi_t - rho phi_x + lam L(t) int [phi(x+y,t) - phi(x,t)] p(y) dy`` at ``q``.

    ``solution(x, t)`` returns the ruin probability ``psi``; ``phi = 1 - psi``.
    Derivatives use central differences at ``h`` and ``h/2`` combined by
    Richardson extrapolation, so the caller must keep ``(x, t)`` at least
    ``h`` away from kinks of ``psi``.
    """
    x, t = q.x, q.t

    def phi(xx, tt):
        return 1.0 - solution(xx, tt)

    phi_t = _richardson(lambda s: phi(x, s), t, h)
    phi_x = _richardson(lambda s: phi(s, t), x, h)
    residual = phi_t - model.rho * phi_x

    weight = model.lam * float(model.delay.cdf(t))
    if weight > 0.0:
        base = phi(x, t)
        profit = model.profit
        if profit.atomic:
            jump = phi(x + profit.mean(), t) - base
        else:
            jump, _ = integrate.quad(
                lambda y: (phi(x + y, t) - base) * float(profit.density(y)),
                0.0,
                math.inf,
                epsabs=quad_tol,
                epsrel=quad_tol,
                limit=200,
            )
        residual += weight * jump
    return residual


__all__ = [
    "EpsilonBounds",
    "RegionTag",
    "classify_region",
    "pide_residual",
    "ruin_density_bounded_delay",
    "ruin_density_constant_delay",
    "ruin_laplace_constant_delay",
    "ruin_prob_bounded_delay",
    "ruin_prob_constant_delay",
    "ruin_prob_epsilon_bounds",
]
