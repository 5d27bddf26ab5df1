import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ive

from ruinlab.analytics import (
    first_passage_density,
    first_passage_law,
    mean_ruin_time_bounds,
    ruin_density_asymptotic,
    ruin_laplace_asymptotic,
    ruin_prob_bounds,
    ruin_time_law_asymptotic,
)
from ruinlab.errors import InvalidParameterError, NetConditionError, RegionError
from ruinlab.lundberg import solve_alpha, solve_beta
from ruinlab.model import (
    ConstantDelay,
    DeterministicProfit,
    ErlangProfit,
    ExponentialDelay,
    ExponentialProfit,
    GaussianTailDelay,
    PowerTailDelay,
    QueryPoint,
    UniformDelay,
    ZeroDelay,
    make_model,
)

DELAYS = [ZeroDelay(), ConstantDelay(1.0), UniformDelay(1.0), ExponentialDelay(1.0), PowerTailDelay(2.0), GaussianTailDelay(1.0)]


def bessel_density(u, x, rho, lam, nu):
    """Exponential profits: the series sums to a modified Bessel function of order one."""
    y = rho * u - x
    z = lam * nu * u * y
    w = 2.0 * math.sqrt(z)
    return x / (u * y) * math.sqrt(z) * ive(1, w) * math.exp(w - lam * u - nu * y)


def loop_density(u, x, rho, lam, k, nu, terms=400):
    """Term-by-term sum with the Gamma(nk, nu) convolution written out."""
    y = rho * u - x
    total = 0.0
    for n in range(1, terms):
        shape = n * k
        log_conv = shape * math.log(nu) + (shape - 1) * math.log(y) - nu * y - math.lgamma(shape)
        log_term = (n * math.log(lam / rho) - math.lgamma(n + 1) + (n - 1) * math.log(rho * u) - lam * u + log_conv)
        total += math.exp(log_term)
    return rho * x * total


@pytest.mark.parametrize("rho,lam,nu,x", [(1.0, 2.0, 1.0, 5.0), (2.0, 3.0, 1.0, 1.0), (1.0, 0.02, 0.01, 4.5)])
def test_density_series_matches_bessel_form(rho, lam, nu, x):
    profit = ExponentialProfit(nu)
    for u in (x / rho * 1.01, x / rho + 0.5, x / rho + 3.0, x / rho + 40.0):
        assert first_passage_density(u, x, rho, lam, profit) == pytest.approx(bessel_density(u, x, rho, lam, nu), rel=1e-10)


def test_density_series_wide_window():
    # lam*u far beyond the nominal 500-term window
    rho, lam, nu, x, u = 1.0, 2.0, 1.0, 5.0, 600.0
    assert first_passage_density(u, x, rho, lam, ExponentialProfit(nu)) == pytest.approx(
        bessel_density(u, x, rho, lam, nu), rel=1e-9)


@pytest.mark.parametrize("k,nu", [(2, 3.0), (3, 2.0)])
def test_erlang_density_matches_term_loop(k, nu):
    for u in (1.2, 2.0, 6.0):
        assert first_passage_density(u, 1.0, 1.0, 2.0, ErlangProfit(k, nu)) == pytest.approx(
            loop_density(u, 1.0, 1.0, 2.0, k, nu), rel=1e-10)


@pytest.mark.parametrize(
    "rho,lam,profit,x",
    [
        (1.0, 2.0, ExponentialProfit(1.0), 2.0),
        (2.0, 3.0, ExponentialProfit(1.0), 1.5),
        (1.0, 0.02, ExponentialProfit(0.01), 2.0),
        (1.0, 2.0, ErlangProfit(3, 2.0), 1.0),
        (1.5, 2.0, DeterministicProfit(1.0), 1.0),
    ],
    ids=["exp", "rho2", "table1", "erlang", "det"],
)
def test_first_passage_law_normalizes_to_ruin_probability(rho, lam, profit, x):
    model = make_model(rho, lam, profit)
    alpha = solve_alpha(model.params, profit).value
    law = first_passage_law(x, 0.7, model)
    assert law.atom_location == pytest.approx(0.7 + x / rho)
    assert law.atom_mass == pytest.approx(math.exp(-lam * x / rho))
    assert law.total_mass() == pytest.approx(math.exp(-alpha * x), abs=1e-9)


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
def test_first_passage_law_laplace(theta):
    model = make_model(2.0, 3.0, ErlangProfit(2, 3.0))
    beta = solve_beta(model.params, model.profit, theta).value
    law = first_passage_law(1.2, 0.4, model)
    assert law.laplace(theta) == pytest.approx(math.exp(-theta * 0.4 - beta * 1.2), rel=1e-8)


def test_deterministic_law_lattice_laplace():
    model = make_model(1.0, 2.0, DeterministicProfit(1.0))
    beta = solve_beta(model.params, model.profit, 0.5).value
    law = first_passage_law(1.0, 0.0, model)
    assert law.density(5.0) == 0.0
    assert law.laplace(0.5) == pytest.approx(math.exp(-beta), rel=1e-10)


def test_zero_surplus_law_is_immediate():
    law = first_passage_law(0.0, 3.0, make_model(1.0, 2.0, ExponentialProfit(1.0)))
    assert law.atoms == ((3.0, 1.0),)


# ---------------------------------------------------------------------------
# Ruin-probability sandwich
# ---------------------------------------------------------------------------


def test_bounds_without_delay_collapse():
    model = make_model(1.0, 2.0, ExponentialProfit(1.0))
    b = ruin_prob_bounds(QueryPoint(3.0, 0.0), model)
    assert b.lower == b.upper == pytest.approx(math.exp(-3.0))
    assert b.which_is_asymptotic == "upper"


def test_bounds_constant_delay_are_exact_far_from_delay():
    # once t + x/rho >= ell, I(t + x/rho) = 0 so the sandwich collapses
    model = make_model(1.0, 0.02, ExponentialProfit(0.01), ConstantDelay(2.0))
    b = ruin_prob_bounds(QueryPoint(2.5, 0.5), model)
    assert b.lower == b.upper == pytest.approx(math.exp(-0.01 * 1.0))


def test_bounds_clamped_but_raw_kept():
    model = make_model(1.0, 2.0, ExponentialProfit(1.0), ConstantDelay(3.0))
    b = ruin_prob_bounds(QueryPoint(0.5, 0.0), model)
    assert b.upper == 1.0
    assert b.raw_upper > 1.0


def test_bounds_require_net_condition():
    with pytest.raises(NetConditionError):
        ruin_prob_bounds(QueryPoint(1.0, 0.0), make_model(1.0, 0.5, ExponentialProfit(1.0)))


@given(x=st.floats(0.0, 30.0), t=st.floats(0.0, 5.0), which=st.integers(0, 5))
@settings(max_examples=100, deadline=None)
def test_bounds_are_ordered_probabilities(x, t, which):
    model = make_model(1.0, 2.0, ExponentialProfit(1.0), DELAYS[which])
    b = ruin_prob_bounds(QueryPoint(x, t), model)
    assert 0.0 <= b.lower <= b.upper <= 1.0
    assert b.raw_lower <= b.raw_upper


@pytest.mark.parametrize("delay", DELAYS[1:], ids=lambda d: d.token())
def test_bound_gap_factor_tends_to_one(delay):
    # alpha = 0.01 keeps both ends representable out to x = 1e4
    model = make_model(1.0, 1.01, ExponentialProfit(1.0), delay)
    bounds = [ruin_prob_bounds(QueryPoint(x, 0.0), model) for x in np.geomspace(1.0, 1e4, 9)]
    factors = [b.raw_lower / b.raw_upper for b in bounds]
    assert all(a <= b + 1e-15 for a, b in zip(factors, factors[1:]))
    assert factors[-1] == pytest.approx(1.0, abs=2e-6)


# ---------------------------------------------------------------------------
# Ruin-time transform and law
# ---------------------------------------------------------------------------


def test_laplace_without_delay():
    # e^{-2 beta(1)} with beta(1) = 1 + sqrt 2
    model = make_model(1.0, 2.0, ExponentialProfit(1.0))
    b = ruin_laplace_asymptotic(QueryPoint(2.0, 0.0), 1.0, model)
    assert b.upper == pytest.approx(math.exp(-2.0 * (1 + math.sqrt(2))), rel=1e-12)
    assert b.upper == pytest.approx(0.0079991, abs=1e-7)
    assert b.lower == b.upper


def test_laplace_rejects_nonpositive_theta():
    model = make_model(1.0, 2.0, ExponentialProfit(1.0))
    with pytest.raises(InvalidParameterError):
        ruin_laplace_asymptotic(QueryPoint(2.0, 0.0), 0.0, model)


@pytest.mark.parametrize("delay", [ExponentialDelay(1.0), UniformDelay(1.0), GaussianTailDelay(2.0)], ids=lambda d: d.token())
@pytest.mark.parametrize("theta", [0.5, 2.0])
def test_asymptotic_law_inverts_asymptotic_transform(delay, theta):
    model = make_model(1.0, 2.0, ExponentialProfit(1.0), delay)
    q = QueryPoint(4.0, 0.3)
    law = ruin_time_law_asymptotic(q, model)
    assert law.atom_location == pytest.approx(q.t + q.x / model.rho)
    assert law.laplace(theta) == pytest.approx(ruin_laplace_asymptotic(q, theta, model).upper, rel=1e-8)
    assert law.total_mass() == pytest.approx(ruin_prob_bounds(q, model).raw_upper, rel=1e-8)


def test_density_example_exponential_delay():
    model = make_model(1.0, 2.0, ExponentialProfit(1.0), ExponentialDelay(1.0))
    q = QueryPoint(5.0, 0.0)
    value = ruin_density_asymptotic(6.0, q, model)
    # x - rho I(0) = 4 started at I(0) = 1
    assert value == pytest.approx(bessel_density(5.0, 4.0, 1.0, 2.0, 1.0), rel=1e-12)
    assert value == pytest.approx(3.506e-3, abs=1e-6)
    assert ruin_density_asymptotic(5.0, q, model) == 0.0
    assert ruin_density_asymptotic(4.0, q, model) == 0.0


def test_density_below_delay_correction_is_rejected():
    model = make_model(1.0, 2.0, ExponentialProfit(1.0), ExponentialDelay(0.5))
    with pytest.raises(RegionError):
        ruin_density_asymptotic(5.0, QueryPoint(1.0, 0.0), model)
    with pytest.raises(RegionError):
        ruin_time_law_asymptotic(QueryPoint(1.0, 0.0), model)


# ---------------------------------------------------------------------------
# Expected ruin time
# ---------------------------------------------------------------------------


def test_mean_ruin_time_constant_delay_collapses():
    model = make_model(1.0, 0.5, ExponentialProfit(1.0), ConstantDelay(2.0))
    b = mean_ruin_time_bounds(QueryPoint(10.0, 0.0), model)
    assert b.lower == pytest.approx(18.0)
    assert b.upper == pytest.approx(18.0)
    assert b.which_is_asymptotic == "lower"


def test_mean_ruin_time_exponential_delay():
    model = make_model(1.0, 0.5, ExponentialProfit(1.0), ExponentialDelay(1.0))
    b = mean_ruin_time_bounds(QueryPoint(10.0, 0.0), model)
    assert b.lower == pytest.approx(19.0)
    assert b.upper == pytest.approx(19.0 + math.exp(-10.0))


def test_mean_ruin_time_without_delay():
    model = make_model(2.0, 1.0, ErlangProfit(2, 2.0))
    b = mean_ruin_time_bounds(QueryPoint(3.0, 1.0), model)
    assert b.lower == b.upper == pytest.approx(1.0 + 3.0 / 1.0)


def test_mean_ruin_time_needs_negative_margin():
    with pytest.raises(NetConditionError):
        mean_ruin_time_bounds(QueryPoint(1.0, 0.0), make_model(1.0, 1.0, ExponentialProfit(1.0)))


@given(x=st.floats(0.0, 50.0), t=st.floats(0.0, 5.0), which=st.integers(0, 5))
@settings(max_examples=100, deadline=None)
def test_mean_ruin_bounds_ordered(x, t, which):
    model = make_model(1.0, 0.5, ExponentialProfit(1.0), DELAYS[which])
    b = mean_ruin_time_bounds(QueryPoint(x, t), model)
    assert b.lower <= b.upper
    assert b.upper <= t + x / (1.0 - 0.5) + 1e-12
    assert np.isfinite(b.lower)
