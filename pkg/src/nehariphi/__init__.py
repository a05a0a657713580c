"""Nehari-manifold branch solver for concave-convex Phi-Laplacian problems.

The package discretizes the Dirichlet energy of a quasilinear operator
generated by an N-function on 1D and 2D boxes, analyzes the fibering
quotients along rays, estimates the two extremal parameters that bound
the two-solution regime, and computes both positive solution branches by
projected descent on the Nehari constraint set.
"""

from .domain import (
    Field,
    Mesh,
    Weight,
    build_mesh,
    bump_field,
    field_from_function,
    interior_to_field,
    make_field,
    nodal_array,
    read_nodal_csv,
    weight_constant,
    weight_from_function,
    weight_from_nodal,
    write_nodal_csv,
)
from .energy import (
    EnergyBreakdown,
    Problem,
    breakdown,
    energy,
    energy_of,
    gradient,
    h1_seminorm,
    phi_norm_proxy,
    second_along,
    signed_power,
    with_lambda,
)
from .errors import (
    ConfigError,
    ContinuationError,
    EstimationError,
    EvaluationError,
    HypothesisError,
    NehariError,
    ProjectionError,
    SearchError,
)
from .extremal import (
    EstimateOptions,
    ExtremalEstimate,
    estimate_extremal,
    estimate_lambda_lower,
    estimate_lambda_star,
    lambda_e_of,
    lambda_n_of,
)
from .fibering import (
    NehariRoots,
    RayAnalysis,
    analyze_ray,
    classify,
    find_te,
    find_tn,
    nehari_roots,
    re,
    rn,
    trace,
)
from .nfunction import (
    HypothesisCheck,
    HypothesisReport,
    NFunctionModel,
    SandwichResult,
    compute_indices,
    custom,
    default_sandwich_samples,
    double_power,
    log_type,
    power,
    sandwich_check,
    validate_hypotheses,
)
from .solver import (
    ContinuationResult,
    SolveOptions,
    SolveReport,
    SweepRow,
    continuation_to_lambda_star,
    solve_minus,
    solve_plus,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "Field",
    "Mesh",
    "Weight",
    "build_mesh",
    "bump_field",
    "field_from_function",
    "interior_to_field",
    "make_field",
    "nodal_array",
    "read_nodal_csv",
    "weight_constant",
    "weight_from_function",
    "weight_from_nodal",
    "write_nodal_csv",
    "EnergyBreakdown",
    "Problem",
    "breakdown",
    "energy",
    "energy_of",
    "gradient",
    "h1_seminorm",
    "phi_norm_proxy",
    "second_along",
    "signed_power",
    "with_lambda",
    "ConfigError",
    "ContinuationError",
    "EstimationError",
    "EvaluationError",
    "HypothesisError",
    "NehariError",
    "ProjectionError",
    "SearchError",
    "EstimateOptions",
    "ExtremalEstimate",
    "estimate_extremal",
    "estimate_lambda_lower",
    "estimate_lambda_star",
    "lambda_e_of",
    "lambda_n_of",
    "NehariRoots",
    "RayAnalysis",
    "analyze_ray",
    "classify",
    "find_te",
    "find_tn",
    "nehari_roots",
    "re",
    "rn",
    "trace",
    "HypothesisCheck",
    "HypothesisReport",
    "NFunctionModel",
    "SandwichResult",
    "compute_indices",
    "custom",
    "default_sandwich_samples",
    "double_power",
    "log_type",
    "power",
    "sandwich_check",
    "validate_hypotheses",
    "ContinuationResult",
    "SolveOptions",
    "SolveReport",
    "SweepRow",
    "continuation_to_lambda_star",
    "solve_minus",
    "solve_plus",
    "sweep",
    "__version__",
]
