"""Shared solver plumbing: report assembly and constraint accounting."""

import time

import numpy as np

from ..core import (
    CONDITIONAL,
    CONSTRAINT_TOL,
    KL,
    MARGINAL_TOL,
    SolveReport,
    TransportPlan,
)


def marginal_residuals(P, a, b):
    return float(np.abs(P.sum(axis=1) - a).max()), float(np.abs(P.sum(axis=0) - b).max())


def rowwise_psi(P, a, kind, mode):
    """psi of each row, under the problem's normalisation convention."""
    Q = P / a[:, None] if mode == CONDITIONAL else P
    if kind == KL:
        with np.errstate(divide="ignore", invalid="ignore"):
            T = np.where(Q > 0, Q * (np.log(Q) - 1.0), 0.0)
        return T.sum(axis=1)
    return 0.5 * (Q * Q).sum(axis=1)


def constraint_violation(P, a, kind, level, mode):
    """Largest one-sided violation max(psi(row) - level, 0) across rows."""
    vals = rowwise_psi(P, a, kind, mode)
    return float(np.maximum(vals - level, 0.0).max())


def build_report(
    P,
    problem,
    *,
    iterations,
    converged,
    method,
    started,
    constraint_residual=0.0,
    certificate=None,
    trace=None,
    activity=None,
    fallback_used=False,
):
    """Assemble a SolveReport; the plan's feasibility gate never hides a
    worse-than-reported residual."""
    a = problem.source.weights
    b = problem.target.weights
    row, col = marginal_residuals(P, a, b)
    feas = max(MARGINAL_TOL, 1.01 * row + 1e-15, 1.01 * col + 1e-15)
    plan = TransportPlan(P, problem.source, problem.target, feasibility_tol=feas)
    return SolveReport(
        plan=plan,
        objective=float((plan.values * problem.cost.values).sum()),
        residuals={
            "marginal_row": row,
            "marginal_col": col,
            "constraint": float(constraint_residual),
        },
        iterations=int(iterations),
        converged=bool(converged),
        certificate=certificate,
        trace=None if trace is None else np.asarray(trace, dtype=float),
        runtime_seconds=time.perf_counter() - started,
        method=method,
        activity=activity,
        fallback_used=fallback_used,
    )


def is_converged(report_residuals, marginal_tol=MARGINAL_TOL, constraint_tol=CONSTRAINT_TOL):
    return (
        max(report_residuals["marginal_row"], report_residuals["marginal_col"]) <= marginal_tol
        and report_residuals["constraint"] <= constraint_tol
    )
