"""Estimators for escape rate, entropy, dimension and the inequality checks."""

from .dimension import PointwiseDimension, ball_counts, correlation_dimension, pointwise_dimension
from .empirical import BoundarySet, EmpiricalBoundaryMeasure, as_measure
from .entropy import (
    ExactSequence,
    RadialTable,
    entropy_profile,
    entropy_rate_exact_tree,
    entropy_upper_bound,
    escape_rate_exact_tree,
)
from .escape import escape_rate_busemann, escape_rate_mc
from .stats import EstimateCI, ProportionCI, clopper_pearson
from .checks import (
    CheckResult,
    RatioTable,
    convexity_check,
    dim_bound_check,
    entropy_growth_check,
    gromov_bound_check,
    gromov_product_outside,
    open_set_mass,
    ratio_experiment,
)
