"""Selective inference for features generated by a seeded tree search."""

__version__ = "0.1.0"

from .baselines import (
    bonferroni_multiplier,
    bonferroni_p_value,
    data_split_test,
    make_split_plan,
    naive_p_value,
    oc_interval,
    oc_p_value,
)
from .core_stats import (
    AugmentedDesign,
    Dataset,
    TestDirection,
    aic,
    check_rank,
    classical_z_p_value,
    estimate_variance,
    fit_beta,
    gls_residual_operator,
    test_direction,
)
from .covariance import CovarianceModel
from .exceptions import (
    AfesiError,
    EmptyGeneration,
    IndexOutOfRange,
    IngestError,
    InvalidDirection,
    InvalidVariance,
    SingularDesign,
    TraceMismatch,
    ZeroTruncationMass,
)
from .expressions import FeatureExpression, evaluate_expression, parse_expression
from .harness import ExperimentSpec, run_experiment, write_outputs
from .inference import (
    LineParameterization,
    QuadraticInequality,
    SelectiveTestResult,
    comparison_to_quadratic,
    interval_for_z,
    line_search,
    nuisance_decompose,
    parametric_search,
    selective_test,
    solve_quadratic_leq,
)
from .intervals import IntervalSet
from .pipeline import analyze
from .search import AfeResult, ComparisonTrace, SearchConfig, SearchContext, multicollinearity_check, reduce_nodes, run_afe
from .truncnorm import selective_p_value, truncated_normal_cdf, truncated_normal_mass
