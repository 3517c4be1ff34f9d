"""Validated domain types shared by every solver.

All types are immutable after construction and safe to share across
threads. Marginals must be strictly positive so that conditional rows
``P_i / a_i`` are always well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidPerplexity,
    InvalidPlan,
    NonFiniteInput,
)

KL = "kl"
L2 = "l2"
KINDS = (KL, L2)

CONDITIONAL = "conditional"
RAW = "raw"
NORMALISATIONS = (CONDITIONAL, RAW)

#: default feasibility tolerances (see ProblemSpec)
MARGINAL_TOL = 1e-6
CONSTRAINT_TOL = 1e-5
DUAL_GRAD_TOL = 1e-8

#: plan entries below this are construction violations; entries in
#: [-PLAN_CLAMP, 0) are rounded to exactly 0
PLAN_CLAMP = 1e-12


def _as_array(x, name, ndim):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionMismatch(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Dense nonnegative cost matrix, sources along rows."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_array(self.values, "cost matrix", 2)
        if np.any(arr < 0):
            raise ValueError("cost entries must be nonnegative")
        object.__setattr__(self, "values", arr)

    @property
    def n_source(self) -> int:
        return self.values.shape[0]

    @property
    def n_target(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class Measure:
    """Probability vector with strictly positive weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = _as_array(self.weights, "measure", 1)
        if np.any(w <= 0):
            raise ValueError("measure weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"measure weights must sum to 1 within 1e-12, got {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, n: int) -> "Measure":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling between source_marginal and target_marginal.

    Entries in [-1e-12, 0) are clamped to exactly 0 at construction;
    anything below -1e-12 is rejected. Row and column sums must match the
    marginals within ``feasibility_tol`` (the tolerance actually achieved
    by the producing solver, stored for honest downstream accounting).
    """

    values: np.ndarray
    source_marginal: Measure
    target_marginal: Measure
    feasibility_tol: float = MARGINAL_TOL

    def __post_init__(self):
        arr = _as_array(self.values, "plan", 2)
        if arr.shape != (len(self.source_marginal), len(self.target_marginal)):
            raise DimensionMismatch(
                f"plan shape {arr.shape} does not match marginals "
                f"({len(self.source_marginal)}, {len(self.target_marginal)})"
            )
        low = arr.min()
        if low < -PLAN_CLAMP:
            raise InvalidPlan(f"plan entry {low!r} below -{PLAN_CLAMP}")
        if low < 0:
            arr = np.where(arr < 0, 0.0, arr)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        row_res = np.abs(arr.sum(axis=1) - self.source_marginal.weights).max()
        col_res = np.abs(arr.sum(axis=0) - self.target_marginal.weights).max()
        if max(row_res, col_res) > self.feasibility_tol:
            raise InvalidPlan(
                f"marginal residual {max(row_res, col_res):.3e} exceeds "
                f"feasibility tolerance {self.feasibility_tol:.3e}"
            )

    @property
    def shape(self):
        return self.values.shape


# constraint kinds
GLOBAL = "global"
SOURCE = "source"
TARGET = "target"
DOUBLE = "double"
FIXED_EPSILON = "fixed_epsilon"
NONE = "none"


@dataclass(frozen=True)
class Constraint:
    """Tagged regularisation constraint.

    global:        sum_i psi(row_i) <= eta
    source:        psi(row_i) <= psi(e_xi) for every row
    target:        psi(col_j) <= psi(e_xi) for every column
    double:        both pointwise constraints
    fixed_epsilon: no constraint, penalty weight fixed at epsilon
    none:          unregularised
    """

    kind: str
    eta: Optional[float] = None
    xi_a: Optional[float] = None
    xi_b: Optional[float] = None
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.kind == GLOBAL:
            if self.eta is None or not np.isfinite(self.eta):
                raise NonFiniteInput("global constraint requires a finite eta")
        elif self.kind in (SOURCE, DOUBLE):
            _check_xi(self.xi_a)
        if self.kind in (TARGET, DOUBLE):
            _check_xi(self.xi_b)
        if self.kind == FIXED_EPSILON:
            if self.epsilon is None or not np.isfinite(self.epsilon):
                raise NonFiniteInput("fixed_epsilon constraint requires a finite epsilon")
            if self.epsilon <= 0:
                raise ValueError("fixed_epsilon constraint requires epsilon > 0")
        if self.kind not in (GLOBAL, SOURCE, TARGET, DOUBLE, FIXED_EPSILON, NONE):
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def global_budget(cls, eta: float) -> "Constraint":
        return cls(GLOBAL, eta=float(eta))

    @classmethod
    def source(cls, xi: float) -> "Constraint":
        return cls(SOURCE, xi_a=float(xi))

    @classmethod
    def target(cls, xi: float) -> "Constraint":
        return cls(TARGET, xi_b=float(xi))

    @classmethod
    def double(cls, xi_a: float, xi_b: float) -> "Constraint":
        return cls(DOUBLE, xi_a=float(xi_a), xi_b=float(xi_b))

    @classmethod
    def fixed_epsilon(cls, epsilon: float) -> "Constraint":
        return cls(FIXED_EPSILON, epsilon=float(epsilon))

    @classmethod
    def none(cls) -> "Constraint":
        return cls(NONE)


def _check_xi(xi):
    if xi is None or not np.isfinite(xi):
        raise NonFiniteInput("perplexity must be finite")
    if xi < 1:
        raise InvalidPerplexity(f"perplexity {xi!r} below 1")


@dataclass(frozen=True)
class Tolerances:
    marginal_tol: float = MARGINAL_TOL
    constraint_tol: float = CONSTRAINT_TOL
    dual_grad_tol: float = DUAL_GRAD_TOL

    def __post_init__(self):
        for name in ("marginal_tol", "constraint_tol", "dual_grad_tol"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be a positive real, got {v!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """Everything a solver needs besides the data itself."""

    regulariser: str = KL
    constraint: Constraint = field(default_factory=Constraint.none)
    normalisation: str = CONDITIONAL
    tolerances: Tolerances = field(default_factory=Tolerances)
    max_iterations: Optional[int] = None

    def __post_init__(self):
        if self.regulariser not in KINDS:
            raise ValueError(f"unknown regulariser {self.regulariser!r}")
        if self.normalisation not in NORMALISATIONS:
            raise ValueError(f"unknown normalisation {self.normalisation!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Optimal dual variables (lambda, mu, epsilon).

    epsilon has length 1 for global budgets, N_S for source constraints,
    N_T for target constraints, and N_S + N_T for double constraints.
    """

    lam: np.ndarray
    mu: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        lam = _as_array(self.lam, "lambda", 1)
        mu = _as_array(self.mu, "mu", 1)
        eps = _as_array(self.epsilon, "epsilon", 1)
        if np.any(eps < 0):
            raise ValueError("certificate epsilon entries must be nonnegative")
        for name, arr in (("lam", lam), ("mu", mu), ("epsilon", eps)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(eq=False)
class SolveReport:
    """Outcome of one solve: plan, certificate, residuals, bookkeeping.

    ``converged=True`` implies both residuals are within the tolerances
    the solver ran with. ``activity`` holds boolean masks of rows/columns
    whose pointwise constraint is active at the solution, when the solver
    tracks them.
    """

    plan: TransportPlan
    objective: float
    residuals: dict
    iterations: int
    converged: bool
    certificate: Optional[DualCertificate] = None
    trace: Optional[np.ndarray] = None
    runtime_seconds: float = 0.0
    method: str = ""
    activity: Optional[dict] = None
    fallback_used: bool = False


@dataclass(frozen=True, eq=False)
class ValidatedProblem:
    cost: CostMatrix
    source: Measure
    target: Measure
    spec: ProblemSpec


def validate_problem(C, a, b, spec: ProblemSpec) -> ValidatedProblem:
    """Check dimension agreement between data and spec; normalise types.

    Accepts raw arrays or already-constructed core types. Raises
    DimensionMismatch, InvalidPerplexity, or NonFiniteInput.
    """
    cost = C if isinstance(C, CostMatrix) else CostMatrix(C)
    src = a if isinstance(a, Measure) else Measure(a)
    tgt = b if isinstance(b, Measure) else Measure(b)
    if len(src) != cost.n_source:
        raise DimensionMismatch(
            f"source measure length {len(src)} != cost rows {cost.n_source}"
        )
    if len(tgt) != cost.n_target:
        raise DimensionMismatch(
            f"target measure length {len(tgt)} != cost columns {cost.n_target}"
        )
    con = spec.constraint
    if con.kind in (SOURCE, DOUBLE) and con.xi_a > cost.n_target:
        raise InvalidPerplexity(
            f"source perplexity {con.xi_a} exceeds row length {cost.n_target}"
        )
    if con.kind in (TARGET, DOUBLE) and con.xi_b > cost.n_source:
        raise InvalidPerplexity(
            f"target perplexity {con.xi_b} exceeds column length {cost.n_source}"
        )
    return ValidatedProblem(cost, src, tgt, spec)
