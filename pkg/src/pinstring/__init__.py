"""Exact covariance, sampling and small-ball experiments for the stationary pinned string."""

from .errors import ConfigError, DomainError, NumericalError, PinstringError, ValidationError
from .grid import SpaceTimeGrid, dyadic_grid
from .kernel import (
    PinnedKernel,
    SpaceTimePoint,
    c1_constant,
    check_variance_bounds,
    conditional_variance,
    covariance,
    f_value,
    gram_matrix,
    increment_variance,
    plancherel_constant,
    point_variance,
)
from .probe import (
    DoublePointReport,
    EventGrid,
    McEstimate,
    double_point_grid_bound,
    double_points,
    hit_events,
    hit_probability,
    lemma1_bound,
    lemma1_oracle_check,
    recurrence_experiment,
    second_moment_hit_bound,
)
from .boxprob import bivariate_box_prob
from .sampler import FieldSample, heat_kernel, sample_exact, sample_pinned_initial
from .spde import SpdeConfig, integrate_spde
from .streams import RngStream, rng_stream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "DoublePointReport",
    "EventGrid",
    "FieldSample",
    "McEstimate",
    "NumericalError",
    "PinnedKernel",
    "PinstringError",
    "RngStream",
    "SpaceTimeGrid",
    "SpaceTimePoint",
    "SpdeConfig",
    "ValidationError",
    "bivariate_box_prob",
    "c1_constant",
    "check_variance_bounds",
    "conditional_variance",
    "covariance",
    "double_point_grid_bound",
    "double_points",
    "dyadic_grid",
    "f_value",
    "gram_matrix",
    "heat_kernel",
    "hit_events",
    "hit_probability",
    "increment_variance",
    "integrate_spde",
    "lemma1_bound",
    "lemma1_oracle_check",
    "plancherel_constant",
    "point_variance",
    "recurrence_experiment",
    "rng_stream",
    "sample_exact",
    "sample_pinned_initial",
    "second_moment_hit_bound",
]
