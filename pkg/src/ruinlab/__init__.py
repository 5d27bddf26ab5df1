"""Ruin analytics and simulation for the dual risk model with delayed profits."""

from .analytics import (
    AtomPlusDensity,
    BoundsResult,
    first_passage_law,
    mean_ruin_time_bounds,
    ruin_density_asymptotic,
    ruin_laplace_asymptotic,
    ruin_prob_bounds,
    ruin_time_law_asymptotic,
)
from .errors import (
    ConvergenceError,
    DomainError,
    InvalidParameterError,
    NetConditionError,
    RegionError,
    RuinLabError,
)
from .exact import (
    EpsilonBounds,
    RegionTag,
    classify_region,
    pide_residual,
    ruin_density_bounded_delay,
    ruin_density_constant_delay,
    ruin_laplace_constant_delay,
    ruin_prob_bounded_delay,
    ruin_prob_constant_delay,
    ruin_prob_epsilon_bounds,
)
from .lundberg import LundbergRoot, beta_series, solve_alpha, solve_beta
from .model import (
    CheckedModel,
    ConstantDelay,
    DeterministicProfit,
    ErlangProfit,
    ExponentialDelay,
    ExponentialProfit,
    GaussianTailDelay,
    ModelParams,
    PowerTailDelay,
    QueryPoint,
    UniformDelay,
    ZeroDelay,
    convolution_density,
    delay_tail_integral,
    make_model,
    net_margin,
    profit_laplace,
    validate_model,
)
from .simulate import (
    DensityEstimate,
    IntervalEstimate,
    PathRecord,
    count_realized_profits,
    estimate_ruin_density,
    estimate_ruin_probability,
    estimate_ruin_time_mean,
    expected_realized_count,
    sample_path,
)

__version__ = "0.1.0"
