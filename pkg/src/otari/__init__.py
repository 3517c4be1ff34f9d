"""Regularised optimal transport with pointwise adaptive smoothing."""

from . import diagnostics, errors, projections
from .adapt import (
    AccuracyCell,
    AccuracyTable,
    ExperimentSpec,
    barycentric_map,
    knn_predict,
    run_experiment,
)
from .core import (
    CONDITIONAL,
    KL,
    L2,
    RAW,
    Constraint,
    CostMatrix,
    DualCertificate,
    Measure,
    ProblemSpec,
    SolveReport,
    Tolerances,
    TransportPlan,
    validate_problem,
)
from .datasets import (
    LabeledDataset,
    gen_gaussian_clusters,
    load_csv,
    load_idx,
    squared_euclidean_cost,
)
from .planio import PlanExport, read_plan, write_plan
from .regularizers import (
    KL_REG,
    L2_REG,
    ReferenceLevel,
    Regulariser,
    bregman_divergence,
    ref_value,
)
from .solvers import (
    METHODS,
    choose_sigma,
    dual_objective_and_grad,
    solve,
    solve_exact,
    solve_matched_perplexity,
    solve_otari_double,
    solve_otari_source,
    solve_otari_target,
    solve_quadratic,
    solve_rot,
    solve_sinkhorn,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyCell",
    "AccuracyTable",
    "CONDITIONAL",
    "Constraint",
    "CostMatrix",
    "DualCertificate",
    "ExperimentSpec",
    "KL",
    "KL_REG",
    "L2",
    "L2_REG",
    "LabeledDataset",
    "METHODS",
    "Measure",
    "PlanExport",
    "ProblemSpec",
    "RAW",
    "ReferenceLevel",
    "Regulariser",
    "SolveReport",
    "Tolerances",
    "TransportPlan",
    "barycentric_map",
    "bregman_divergence",
    "choose_sigma",
    "diagnostics",
    "dual_objective_and_grad",
    "errors",
    "gen_gaussian_clusters",
    "knn_predict",
    "load_csv",
    "load_idx",
    "projections",
    "read_plan",
    "ref_value",
    "run_experiment",
    "solve",
    "solve_exact",
    "solve_matched_perplexity",
    "solve_otari_double",
    "solve_otari_source",
    "solve_otari_target",
    "solve_quadratic",
    "solve_rot",
    "solve_sinkhorn",
    "squared_euclidean_cost",
    "validate_problem",
    "write_plan",
    "__version__",
]
