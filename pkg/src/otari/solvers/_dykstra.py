"""Alternating projections with Dykstra corrections.

One engine covers row-ball, column-ball, and double-ball problems for
both regularisers. KL cycles run entirely in log space; marginal
scalings there are correction-free (they are Bregman-affine), only the
entropy balls carry corrections. The quadratic path is plain Euclidean
Dykstra on the signed matrix -C/sigma, where no projection is affine,
so every set carries a correction.
"""

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import _kernels
from ..core import (
    CONDITIONAL,
    KL,
    L2,
    Constraint,
    ProblemSpec,
    Tolerances,
    validate_problem,
)
from ..errors import NonFiniteIterate
from ..projections import _lse_rows, _proj_kl_entropy_ball_log
from ..regularizers import ref_value
from ._common import build_report, rowwise_psi

DEFAULT_MAX_SWEEPS = 10_000


@dataclass
class DykstraState:
    """Iterate plus per-set corrections, kept in gradient space.

    xi and theta belong to the row and column balls. The quadratic path
    also corrects the two marginal projections (Euclidean projections
    onto the sub-simplices are not affine), stored in the marginal
    slots; the KL path leaves them None.
    """

    plan: np.ndarray
    xi: Optional[np.ndarray]
    theta: Optional[np.ndarray]
    iteration: int = 0
    marginal_row: Optional[np.ndarray] = None
    marginal_col: Optional[np.ndarray] = None


def choose_sigma(C, kind, certificate=None, xi=None):
    """Projection temperature: 0.9 min eps* given a certificate, else a
    cost-scale heuristic (documented, overridable)."""
    C = C.values if hasattr(C, "values") else np.asarray(C, dtype=float)
    if certificate is not None:
        lo = float(certificate.epsilon.min())
        if lo > 0:
            return 0.9 * lo
    med = float(np.median(C))
    if med <= 0:
        pos = C[C > 0]
        med = float(pos.min()) if pos.size else 1e-3
    if kind == KL:
        return 0.1 * med / math.log(max(max(C.shape), 2))
    return 0.1 * med * (xi if xi is not None else 1.0)


def _l2_ball(Y, xi, w, mode):
    """Euclidean projection of rows onto {p >= 0, psi_2 <= psi_2(e_xi)}.

    Clipping before scaling is the exact projection onto the
    orthant-ball intersection.
    """
    Z = np.maximum(Y, 0.0)
    norms = np.sqrt((Z * Z).sum(axis=1))
    if mode == CONDITIONAL:
        gamma = np.maximum(np.sqrt(xi) * norms / w, 1.0)
    else:
        gamma = np.maximum(np.sqrt(xi) * norms, 1.0)
    return Z / gamma[:, None], gamma


def _residuals(P, a, b, kind, mode, xi_a, xi_b, ref_a, ref_b):
    row = float(np.abs(P.sum(axis=1) - a).max())
    col = float(np.abs(P.sum(axis=0) - b).max())
    viol = 0.0
    if xi_a is not None:
        viol = max(viol, float((rowwise_psi(P, a, kind, mode) - ref_a).max()))
    if xi_b is not None:
        viol = max(viol, float((rowwise_psi(P.T, b, kind, mode) - ref_b).max()))
    return row, col, max(viol, 0.0)


def _kl_cycle(C, a, b, mode, xi_a, xi_b, sigma, marginal_tol, constraint_tol, max_sweeps):
    n, m = C.shape
    with np.errstate(over="ignore", divide="ignore"):
        L = -C / sigma
    if not np.isfinite(L).all():
        raise NonFiniteIterate(f"-C/sigma leaves the float range at sigma={sigma:.3e}")
    loga = np.log(a)
    logb = np.log(b)
    Xi = np.zeros_like(L) if xi_a is not None else None
    Th = np.zeros_like(L) if xi_b is not None else None
    ref_a = ref_value(KL, xi_a, m) if xi_a is not None else None
    ref_b = ref_value(KL, xi_b, n) if xi_b is not None else None
    beta_a = beta_b = None
    row = col = viol = np.inf
    converged = False
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        L = L + (loga - _lse_rows(L))[:, None]
        if xi_a is not None:
            Y = L + Xi
            L, beta_a = _proj_kl_entropy_ball_log(Y, xi_a, mode, a)
            Xi = Y - L
        L = L + (logb - _lse_rows(np.ascontiguousarray(L.T)))[None, :]
        if xi_b is not None:
            Y = L + Th
            Lt, beta_b = _proj_kl_entropy_ball_log(np.ascontiguousarray(Y.T), xi_b, mode, b)
            L = Lt.T
            Th = Y - L
        if not np.isfinite(L).all():
            raise NonFiniteIterate(
                f"iterate left the float range at sweep {sweep}; sigma too small"
            )
        P = np.exp(L)
        row, col, viol = _residuals(P, a, b, KL, mode, xi_a, xi_b, ref_a, ref_b)
        if max(row, col) <= marginal_tol and viol <= constraint_tol:
            converged = True
            break
    state = DykstraState(plan=P, xi=Xi, theta=Th, iteration=sweep)
    return state, (row, col, viol), converged, beta_a, beta_b


def _l2_cycle(C, a, b, mode, xi_a, xi_b, sigma, marginal_tol, constraint_tol, max_sweeps):
    n, m = C.shape
    with np.errstate(over="ignore", divide="ignore"):
        P = -C / sigma
    if not np.isfinite(P).all():
        raise NonFiniteIterate(f"-C/sigma leaves the float range at sigma={sigma:.3e}")
    c_rows = np.zeros_like(P)
    c_cols = np.zeros_like(P)
    Xi = np.zeros_like(P) if xi_a is not None else None
    Th = np.zeros_like(P) if xi_b is not None else None
    ref_a = ref_value(L2, xi_a, m) if xi_a is not None else None
    ref_b = ref_value(L2, xi_b, n) if xi_b is not None else None
    gamma_a = gamma_b = None
    row = col = viol = np.inf
    converged = False
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        Y = P + c_rows
        P, _ = _kernels.simplex_rows(np.ascontiguousarray(Y), a)
        c_rows = Y - P
        if xi_a is not None:
            Y = P + Xi
            P, gamma_a = _l2_ball(Y, xi_a, a, mode)
            Xi = Y - P
        Y = P + c_cols
        Pt, _ = _kernels.simplex_rows(np.ascontiguousarray(Y.T), b)
        P = Pt.T
        c_cols = Y - P
        if xi_b is not None:
            Y = P + Th
            Pt, gamma_b = _l2_ball(np.ascontiguousarray(Y.T), xi_b, b, mode)
            P = Pt.T
            Th = Y - P
        if not np.isfinite(P).all():
            raise NonFiniteIterate(f"iterate left the float range at sweep {sweep}")
        row, col, viol = _residuals(P, a, b, L2, mode, xi_a, xi_b, ref_a, ref_b)
        if max(row, col) <= marginal_tol and viol <= constraint_tol:
            converged = True
            break
    state = DykstraState(
        plan=P, xi=Xi, theta=Th, iteration=sweep, marginal_row=c_rows, marginal_col=c_cols
    )
    return state, (row, col, viol), converged, gamma_a, gamma_b


def dykstra_pointwise(problem, *, xi_a=None, xi_b=None, sigma=None, tolerances=None, max_iter=None):
    """Project the sigma-kernel onto the polytope cut by the requested balls."""
    tol = tolerances or problem.spec.tolerances
    started = time.perf_counter()
    kind = problem.spec.regulariser
    mode = problem.spec.normalisation
    a = problem.source.weights
    b = problem.target.weights
    C = problem.cost.values
    if sigma is None:
        sigma = choose_sigma(C, kind, xi=xi_a if xi_a is not None else xi_b)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    max_sweeps = max_iter or problem.spec.max_iterations or DEFAULT_MAX_SWEEPS
    cycle = _kl_cycle if kind == KL else _l2_cycle
    state, (row, col, viol), converged, act_a, act_b = cycle(
        C, a, b, mode, xi_a, xi_b, sigma, tol.marginal_tol, tol.constraint_tol, max_sweeps
    )
    activity = None
    if xi_a is not None or xi_b is not None:
        activity = {}
        if act_a is not None:
            activity["rows"] = act_a > (0.0 if kind == KL else 1.0)
        if act_b is not None:
            activity["cols"] = act_b > (0.0 if kind == KL else 1.0)
    return build_report(
        state.plan,
        problem,
        iterations=state.iteration,
        converged=converged,
        method=f"dykstra-{kind}",
        started=started,
        constraint_residual=viol,
        activity=activity,
    )


def _forced_uniform_plan(problem, xi_a, xi_b):
    """Analytic solution when a ball sits at its maximum spread.

    A conditional ball at xi = m admits exactly one shape, the uniform
    one, so the feasible set collapses to a single candidate plan. The
    alternation converges to it only sublinearly (no interior), so build
    the candidate directly; fall through when it is not feasible.
    """
    if problem.spec.normalisation != CONDITIONAL:
        return None
    a = problem.source.weights
    b = problem.target.weights
    n, m = problem.cost.shape
    kind = problem.spec.regulariser
    tol = problem.spec.tolerances
    if xi_a >= m * (1.0 - 1e-12):
        P = np.outer(a, np.full(m, 1.0 / m))
    elif xi_b >= n * (1.0 - 1e-12):
        P = np.outer(np.full(n, 1.0 / n), b)
    else:
        return None
    row = np.abs(P.sum(axis=1) - a).max()
    col = np.abs(P.sum(axis=0) - b).max()
    if max(row, col) > tol.marginal_tol:
        return None
    ref_a = ref_value(kind, xi_a, m)
    ref_b = ref_value(kind, xi_b, n)
    psi_a = rowwise_psi(P, a, kind, CONDITIONAL)
    psi_b = rowwise_psi(P.T, b, kind, CONDITIONAL)
    viol = max(float((psi_a - ref_a).max()), float((psi_b - ref_b).max()))
    if viol > tol.constraint_tol:
        return None
    return build_report(
        P,
        problem,
        iterations=0,
        converged=True,
        method="otari-d-uniform",
        started=time.perf_counter(),
        constraint_residual=max(viol, 0.0),
        activity={
            "rows": psi_a >= ref_a - tol.constraint_tol,
            "cols": psi_b >= ref_b - tol.constraint_tol,
        },
    )


def solve_otari_double(
    C, a, b, kind, xi_a, xi_b, sigma=None, *, mode=CONDITIONAL, tolerances=None, max_iterations=None
):
    """Doubly pointwise-constrained plan by cyclic projection.

    Cycle order: row marginal, row ball (correction Xi), column
    marginal, column ball (correction Theta); the reported plan is the
    column-ball output of the final sweep.
    """
    tol = tolerances or Tolerances()
    problem = validate_problem(
        C,
        a,
        b,
        ProblemSpec(
            regulariser=kind,
            constraint=Constraint.double(xi_a, xi_b),
            normalisation=mode,
            tolerances=tol,
        ),
    )
    forced = _forced_uniform_plan(problem, xi_a, xi_b)
    if forced is not None:
        return forced
    report = dykstra_pointwise(
        problem, xi_a=xi_a, xi_b=xi_b, sigma=sigma, tolerances=tol, max_iter=max_iterations
    )
    report.method = "otari-d-dykstra"
    return report


def solve_quadratic(C, a, b, epsilon, *, tolerances=None, max_iterations=None):
    """Fixed-penalty quadratic plan: Euclidean projection of -C/eps onto
    the transport polytope."""
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be a positive real, got {epsilon!r}")
    tol = tolerances or Tolerances()
    problem = validate_problem(
        C,
        a,
        b,
        ProblemSpec(
            regulariser=L2,
            constraint=Constraint.fixed_epsilon(float(epsilon)),
            normalisation=CONDITIONAL,
            tolerances=tol,
        ),
    )
    report = dykstra_pointwise(
        problem, sigma=float(epsilon), tolerances=tol, max_iter=max_iterations
    )
    report.method = "qot"
    return report
