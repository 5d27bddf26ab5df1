"""Model parameters and the distribution primitives used throughout the package.

The surplus starts at ``x`` at the present time ``t``, decreases at the cost
rate ``rho`` and jumps up by a profit ``Y`` whenever a delayed innovation is
realized. Innovations arrive as a Poisson process of rate ``lam`` started at
time 0, and each one is realized after an i.i.d. delay with CDF ``L``. The
realized profits then form a non-homogeneous Poisson process of intensity
``lam * L(s)``.

All classes are frozen dataclasses, so they are hashable and safe to share
between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr

from .errors import InvalidParameterError


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _as_output(values):
    """Return a Python float for 0-d input and an ndarray otherwise."""
    arr = np.asarray(values, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def normal_cdf(z):
    """Standard normal CDF. Accepts scalars or arrays."""
    return _as_output(ndtr(np.asarray(z, dtype=float)))


def normal_sf(z):
    """Upper tail ``1 - N(z)`` without cancellation for large ``z``."""
    return _as_output(ndtr(-np.asarray(z, dtype=float)))


@dataclass(frozen=True)
class ModelParams:
    """Cost rate ``rho`` and innovation arrival intensity ``lam``."""

    rho: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "rho", _positive("rho", self.rho))
        object.__setattr__(self, "lam", _positive("lambda", self.lam))


@dataclass(frozen=True)
class QueryPoint:
    """Surplus ``x`` at present time ``t``."""

    x: float
    t: float

    def __post_init__(self):
        for name in ("x", "t"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0.0:
                raise InvalidParameterError(f"{name} must be a nonnegative finite number, got {value!r}")
            object.__setattr__(self, name, value)


# ---------------------------------------------------------------------------
# Profit sizes
# ---------------------------------------------------------------------------


class ProfitDistribution:
    """Distribution of a single profit size ``Y > 0``.

    Subclasses provide closed forms for the Laplace transform, the n-fold
    convolution and the Gamma-type moments that appear in the series for the
    Lundberg root.
    """

    #: True when ``Y`` has a point mass, so convolutions are atoms, not densities.
    atomic = False

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def laplace(self, s):
        """``E[exp(-s Y)]``."""
        raise NotImplementedError

    def laplace_minus_one(self, s):
        """``E[exp(-s Y)] - 1`` computed without cancellation for small ``s``."""
        raise NotImplementedError

    def laplace_derivative(self, s):
        """Derivative of :meth:`laplace` with respect to ``s``."""
        raise NotImplementedError

    def log_convolution_density(self, n, y):
        """Log of the density of ``Y_1 + ... + Y_n`` at ``y > 0``."""
        raise NotImplementedError

    def convolution_density(self, n, y):
        return _as_output(np.exp(self.log_convolution_density(n, y)))

    def convolution_atom(self, n: int) -> float | None:
        """Location of the point mass of ``Y_1 + ... + Y_n``, or None if absolutely continuous."""
        return None

    def log_gamma_moment(self, n, c):
        """Log of ``int y^(n-1) exp(-c y) dP^{*n}(y)`` for ``c > 0``."""
        raise NotImplementedError

    def density(self, y):
        return self.convolution_density(1, y)

    def token(self) -> str:
        """Compact text form, e.g. ``exp:0.5``, accepted by :func:`parse_profit`."""
        raise NotImplementedError

    def kernel_params(self) -> tuple[int, float, float]:
        """``(code, a, b)`` for the compiled simulator."""
        raise NotImplementedError


class _GammaProfit(ProfitDistribution):
    """Shared closed forms for Gamma profits with integer shape ``k`` and rate ``nu``."""

    k: int
    nu: float

    def mean(self):
        return self.k / self.nu

    def second_moment(self):
        return self.k * (self.k + 1) / self.nu**2

    def laplace(self, s):
        s = np.asarray(s, dtype=float)
        return _as_output((self.nu / (self.nu + s)) ** self.k)

    def laplace_minus_one(self, s):
        s = np.asarray(s, dtype=float)
        return _as_output(np.expm1(self.k * np.log1p(-s / (self.nu + s))))

    def laplace_derivative(self, s):
        s = np.asarray(s, dtype=float)
        return _as_output(-self.k * self.nu**self.k / (self.nu + s) ** (self.k + 1))

    def log_convolution_density(self, n, y):
        shape = np.asarray(n) * self.k
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = shape * math.log(self.nu) + (shape - 1) * np.log(y) - self.nu * y - gammaln(shape)
        return _as_output(np.where(y > 0, out, -np.inf))

    def log_gamma_moment(self, n, c):
        # Gamma(n k, nu) integrated against y^(n-1) e^(-c y)
        n = np.asarray(n)
        shape = n * self.k
        return _as_output(
            shape * math.log(self.nu)
            + gammaln(shape + n - 1)
            - gammaln(shape)
            - (shape + n - 1) * np.log(c + self.nu)
        )


@dataclass(frozen=True)
class ExponentialProfit(_GammaProfit):
    """Exponential profits with rate ``nu`` (mean ``1/nu``)."""

    nu: float

    def __post_init__(self):
        object.__setattr__(self, "nu", _positive("nu", self.nu))

    @property
    def k(self) -> int:
        return 1

    def laplace(self, s):
        s = np.asarray(s, dtype=float)
        return _as_output(self.nu / (self.nu + s))

    def laplace_minus_one(self, s):
        s = np.asarray(s, dtype=float)
        return _as_output(-s / (self.nu + s))

    def token(self):
        return f"exp:{self.nu!r}"

    def kernel_params(self):
        return 0, self.nu, 0.0


@dataclass(frozen=True)
class ErlangProfit(_GammaProfit):
    """Erlang profits: sum of ``k`` independent exponentials of rate ``nu``."""

    k: int
    nu: float

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise InvalidParameterError(f"Erlang shape must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "nu", _positive("nu", self.nu))

    def token(self):
        return f"erlang:{self.k}:{self.nu!r}"

    def kernel_params(self):
        return 1, float(self.k), self.nu


@dataclass(frozen=True)
class DeterministicProfit(ProfitDistribution):
    """Every profit equals ``y0``."""

    y0: float
    atomic = True

    def __post_init__(self):
        object.__setattr__(self, "y0", _positive("y0", self.y0))

    def mean(self):
        return self.y0

    def second_moment(self):
        return self.y0**2

    def laplace(self, s):
        return _as_output(np.exp(-np.asarray(s, dtype=float) * self.y0))

    def laplace_minus_one(self, s):
        return _as_output(np.expm1(-np.asarray(s, dtype=float) * self.y0))

    def laplace_derivative(self, s):
        return _as_output(-self.y0 * np.exp(-np.asarray(s, dtype=float) * self.y0))

    def log_convolution_density(self, n, y):
        # no density part; the mass sits on the atom at n*y0
        return _as_output(np.full(np.shape(np.asarray(y) * np.asarray(n)), -np.inf))

    def convolution_atom(self, n):
        return n * self.y0

    def log_gamma_moment(self, n, c):
        n = np.asarray(n)
        return _as_output((n - 1) * np.log(n * self.y0) - c * n * self.y0)

    def token(self):
        return f"det:{self.y0!r}"

    def kernel_params(self):
        return 2, self.y0, 0.0


# ---------------------------------------------------------------------------
# Delays
# ---------------------------------------------------------------------------


class DelayDistribution:
    """Law of the lag between an innovation and its realized profit.

    ``cdf`` is ``L``, ``survival`` is ``1 - L`` and ``tail_integral(t)`` is
    ``I(t) = int_t^inf (1 - L(s)) ds``, which drives every delay correction.
    Methods accept scalars or arrays; negative times follow ``L(0-) = 0``.
    """

    def cdf(self, t):
        raise NotImplementedError

    def survival(self, t):
        return _as_output(1.0 - np.asarray(self.cdf(t)))

    def tail_integral(self, t):
        raise NotImplementedError

    def support_bound(self) -> float | None:
        """Smallest ``ell`` with ``L(ell) = 1``, or None for unbounded delays."""
        return None

    def quantile(self, p: float) -> float:
        """``inf{s : L(s) >= p}`` for ``0 < p < 1``."""
        raise NotImplementedError

    def survival_integral(self, a, b):
        """``int_a^b (1 - L(s)) ds`` for ``0 <= a <= b``."""
        return _as_output(np.asarray(self.tail_integral(a)) - np.asarray(self.tail_integral(b)))

    def cdf_integral(self, a, b):
        """``int_a^b L(s) ds`` for ``0 <= a <= b``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return _as_output((b - a) - np.asarray(self.survival_integral(a, b)))

    def token(self) -> str:
        raise NotImplementedError

    def kernel_params(self) -> tuple[int, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroDelay(DelayDistribution):
    """Profits are realized immediately: the classic dual model."""

    def cdf(self, t):
        return _as_output(np.asarray(t, dtype=float) >= 0.0)

    def tail_integral(self, t):
        return _as_output(np.zeros_like(np.asarray(t, dtype=float)))

    def support_bound(self):
        return 0.0

    def quantile(self, p):
        return 0.0

    def token(self):
        return "zero"

    def kernel_params(self):
        return 0, 0.0


@dataclass(frozen=True)
class ConstantDelay(DelayDistribution):
    """Every delay equals ``ell``."""

    ell: float

    def __post_init__(self):
        object.__setattr__(self, "ell", _positive("ell", self.ell))

    def cdf(self, t):
        return _as_output(np.asarray(t, dtype=float) >= self.ell)

    def tail_integral(self, t):
        return _as_output(np.maximum(self.ell - np.asarray(t, dtype=float), 0.0))

    def support_bound(self):
        return self.ell

    def quantile(self, p):
        return self.ell

    def token(self):
        return f"const:{self.ell!r}"

    def kernel_params(self):
        return 1, self.ell


@dataclass(frozen=True)
class UniformDelay(DelayDistribution):
    """Delays uniform on ``[0, ell]``."""

    ell: float

    def __post_init__(self):
        object.__setattr__(self, "ell", _positive("ell", self.ell))

    def cdf(self, t):
        return _as_output(np.clip(np.asarray(t, dtype=float) / self.ell, 0.0, 1.0))

    def tail_integral(self, t):
        t = np.asarray(t, dtype=float)
        inside = (self.ell - t) ** 2 / (2.0 * self.ell)
        # t < 0 only arises from callers ignoring the precondition; keep I continuous there
        below = self.ell / 2.0 - t
        return _as_output(np.where(t >= self.ell, 0.0, np.where(t < 0.0, below, inside)))

    def support_bound(self):
        return self.ell

    def quantile(self, p):
        return p * self.ell

    def token(self):
        return f"unif:{self.ell!r}"

    def kernel_params(self):
        return 2, self.ell


@dataclass(frozen=True)
class ExponentialDelay(DelayDistribution):
    """``1 - L(t) = exp(-gamma t)``."""

    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return _as_output(np.where(t >= 0.0, -np.expm1(-self.gamma * np.maximum(t, 0.0)), 0.0))

    def tail_integral(self, t):
        return _as_output(np.exp(-self.gamma * np.asarray(t, dtype=float)) / self.gamma)

    def quantile(self, p):
        return -math.log1p(-p) / self.gamma

    def token(self):
        return f"exp:{self.gamma!r}"

    def kernel_params(self):
        return 3, self.gamma


@dataclass(frozen=True)
class PowerTailDelay(DelayDistribution):
    """``1 - L(t) = (1 + t)^(-gamma)`` with ``gamma > 1``."""

    gamma: float

    def __post_init__(self):
        gamma = float(self.gamma)
        if not math.isfinite(gamma) or gamma <= 1.0:
            raise InvalidParameterError(
                f"power-tail delay needs gamma > 1 (tail integral diverges otherwise), got {gamma!r}"
            )
        object.__setattr__(self, "gamma", gamma)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return _as_output(np.where(t >= 0.0, 1.0 - (1.0 + np.maximum(t, 0.0)) ** -self.gamma, 0.0))

    def tail_integral(self, t):
        return _as_output((1.0 + np.asarray(t, dtype=float)) ** (1.0 - self.gamma) / (self.gamma - 1.0))

    def quantile(self, p):
        return (1.0 - p) ** (-1.0 / self.gamma) - 1.0

    def token(self):
        return f"power:{self.gamma!r}"

    def kernel_params(self):
        return 4, self.gamma


@dataclass(frozen=True)
class GaussianTailDelay(DelayDistribution):
    """``1 - L(t) = exp(-gamma t^2)``."""

    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return _as_output(np.where(t >= 0.0, -np.expm1(-self.gamma * t * t), 0.0))

    def tail_integral(self, t):
        t = np.asarray(t, dtype=float)
        return _as_output(math.sqrt(math.pi / self.gamma) * np.asarray(normal_sf(math.sqrt(2.0 * self.gamma) * t)))

    def quantile(self, p):
        return math.sqrt(-math.log1p(-p) / self.gamma)

    def token(self):
        return f"gauss:{self.gamma!r}"

    def kernel_params(self):
        return 5, self.gamma


# ---------------------------------------------------------------------------
# Validated bundle and module-level operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckedModel:
    """Validated parameters, profit law and delay law."""

    params: ModelParams
    profit: ProfitDistribution
    delay: DelayDistribution
    net_margin: float
    tail_integral_finite: bool = True

    @property
    def rho(self) -> float:
        return self.params.rho

    @property
    def lam(self) -> float:
        return self.params.lam

    def tail_integral(self, t):
        return self.delay.tail_integral(t)


def validate_model(params: ModelParams, profit: ProfitDistribution, delay: DelayDistribution) -> CheckedModel:
    """Bundle the three model components after type and range checks.

    Range checks run in the constructors, so anything that reaches this
    point already has positive rates; what remains is making sure the parts
    are of the supported kinds.
    """
    if not isinstance(params, ModelParams):
        raise InvalidParameterError(f"expected ModelParams, got {type(params).__name__}")
    if not isinstance(profit, ProfitDistribution):
        raise InvalidParameterError(f"expected a ProfitDistribution, got {type(profit).__name__}")
    if not isinstance(delay, DelayDistribution):
        raise InvalidParameterError(f"expected a DelayDistribution, got {type(delay).__name__}")
    return CheckedModel(params, profit, delay, net_margin(params, profit), tail_integral_finite=True)


def make_model(rho: float, lam: float, profit: ProfitDistribution, delay: DelayDistribution | None = None) -> CheckedModel:
    """Shorthand for ``validate_model(ModelParams(rho, lam), profit, delay)``."""
    return validate_model(ModelParams(rho, lam), profit, ZeroDelay() if delay is None else delay)


def net_margin(params: ModelParams, profit: ProfitDistribution) -> float:
    """``lam * E[Y] - rho``; positive exactly when survival is possible."""
    return params.lam * profit.mean() - params.rho


def profit_laplace(profit: ProfitDistribution, s: float) -> float:
    if s < 0:
        raise InvalidParameterError(f"Laplace argument must be nonnegative, got {s!r}")
    return float(profit.laplace(s))


def convolution_density(profit: ProfitDistribution, n: int, y: float) -> float:
    """Density of ``Y_1 + ... + Y_n`` at ``y``; zero off the atom for deterministic profits."""
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    if y <= 0:
        raise InvalidParameterError(f"y must be positive, got {y!r}")
    return float(profit.convolution_density(int(n), y))


def delay_tail_integral(delay: DelayDistribution, t: float) -> float:
    if t < 0:
        raise InvalidParameterError(f"t must be nonnegative, got {t!r}")
    return float(delay.tail_integral(t))
