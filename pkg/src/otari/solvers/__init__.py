"""Solver family: exact LP baseline, fixed-penalty solves, global-budget
dual ascent, pointwise-constrained dual ascent, and Dykstra projection."""

import math

import numpy as np

from ..core import CONDITIONAL, KL, L2, Tolerances
from ._common import marginal_residuals, rowwise_psi
from ._dual import (
    EPS_FLOOR,
    DualState,
    dual_objective_and_grad,
    recover_plan,
    solve_otari_source,
    solve_otari_target,
    solve_rot,
)
from ._dykstra import (
    DykstraState,
    choose_sigma,
    dykstra_pointwise,
    solve_otari_double,
    solve_quadratic,
)
from ._exact import solve_exact
from ._sinkhorn import solve_sinkhorn

METHODS = (
    "exact",
    "eot",
    "qot",
    "eotari-s",
    "eotari-t",
    "eotari-d",
    "qotari-s",
    "qotari-t",
    "qotari-d",
)


def _mean_row_entropy(P):
    Q = P / P.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = np.where(Q > 0, Q * np.log(Q), 0.0)
    return float(-T.sum(axis=1).mean())


#: largest mean-entropy miss (nats) the matched solve still calls converged
MATCH_TOL = 0.05


def solve_matched_perplexity(C, a, b, kind, xi, *, tolerances=None, max_outer=40):
    """Fixed-penalty solve whose mean conditional row entropy is log xi.

    This realises the "global regularisation with average perplexity xi"
    baselines: a 1-D search over the penalty weight, each step one
    fixed-eps solve (entropic for KL, projected quadratic for L2). The
    search runs at a loosened tolerance; the returned report re-solves at
    full tolerance.

    Coarse solves stop converging as eps shrinks, and their iterates
    read as artificially spread, so a non-converged attempt marks the
    edge of the trustworthy range instead of feeding the bracket. When
    the target is out of reach the report comes back with the nearest
    attainable penalty and converged=False (perplexity_match holds the
    miss in nats).
    """
    target = math.log(xi)
    Cv = C.values if hasattr(C, "values") else np.asarray(C, dtype=float)
    coarse = Tolerances(marginal_tol=1e-4, constraint_tol=1e-4)

    def attempt(eps):
        if kind == KL:
            rep = solve_sinkhorn(Cv, a, b, eps, tolerances=coarse, max_iter=2000)
        else:
            rep = solve_quadratic(Cv, a, b, eps, tolerances=coarse, max_iterations=2000)
        return _mean_row_entropy(rep.plan.values), rep.converged

    eps = choose_sigma(Cv, kind, xi=xi) * 10.0
    h, ok = attempt(eps)
    lo = hi = eps
    steps = 0
    while (not ok or h < target) and steps < 40:
        hi *= 4.0
        h, ok = attempt(hi)
        steps += 1
    if steps:
        lo = hi / 4.0
    else:
        while h > target and steps < 40:
            h_next, ok_next = attempt(lo / 4.0)
            if not ok_next:
                break
            lo /= 4.0
            h = h_next
            steps += 1
        hi = lo * 4.0 if steps else lo
    for _ in range(max_outer):
        if hi / lo < 1.0 + 1e-3:
            break
        mid = math.sqrt(lo * hi)
        h, ok = attempt(mid)
        if not ok or h < target:
            lo = mid
        else:
            hi = mid
    eps = math.sqrt(lo * hi)
    if kind == KL:
        report = solve_sinkhorn(Cv, a, b, eps, tolerances=tolerances)
    else:
        report = solve_quadratic(Cv, a, b, eps, tolerances=tolerances)
    achieved = _mean_row_entropy(report.plan.values)
    miss = abs(achieved - target)
    report.residuals["perplexity_match"] = miss
    if miss > MATCH_TOL:
        report.converged = False
    report.method += "-matched"
    return report


def solve(
    C,
    a,
    b,
    method,
    *,
    xi=None,
    xi_b=None,
    eta=None,
    epsilon=None,
    sigma=None,
    mode=CONDITIONAL,
    tolerances=None,
    max_iterations=None,
):
    """Dispatch a named method (the CLI vocabulary) to its solver.

    eot/qot accept exactly one of epsilon (fixed penalty), eta (global
    budget), or xi (penalty matched so mean row perplexity is xi).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "exact":
        return solve_exact(C, a, b)
    if method in ("eot", "qot"):
        kind = KL if method == "eot" else L2
        given = [p for p, v in (("epsilon", epsilon), ("eta", eta), ("xi", xi)) if v is not None]
        if len(given) != 1:
            raise ValueError(f"{method} needs exactly one of epsilon, eta, xi; got {given or 'none'}")
        if epsilon is not None:
            if kind == KL:
                return solve_sinkhorn(C, a, b, epsilon, tolerances=tolerances)
            return solve_quadratic(
                C, a, b, epsilon, tolerances=tolerances, max_iterations=max_iterations
            )
        if eta is not None:
            return solve_rot(
                C, a, b, kind, eta, mode=mode, tolerances=tolerances, max_iterations=max_iterations
            )
        return solve_matched_perplexity(C, a, b, kind, xi, tolerances=tolerances)
    if xi is None:
        raise ValueError(f"{method} requires xi")
    kind = KL if method.startswith("e") else L2
    variant = method.rsplit("-", 1)[1]
    if variant == "s":
        return solve_otari_source(
            C, a, b, kind, xi, mode=mode, tolerances=tolerances, max_iterations=max_iterations
        )
    if variant == "t":
        return solve_otari_target(
            C, a, b, kind, xi, mode=mode, tolerances=tolerances, max_iterations=max_iterations
        )
    return solve_otari_double(
        C,
        a,
        b,
        kind,
        xi,
        xi_b if xi_b is not None else xi,
        sigma,
        mode=mode,
        tolerances=tolerances,
        max_iterations=max_iterations,
    )


__all__ = [
    "EPS_FLOOR",
    "METHODS",
    "DualState",
    "DykstraState",
    "choose_sigma",
    "dual_objective_and_grad",
    "dykstra_pointwise",
    "marginal_residuals",
    "recover_plan",
    "rowwise_psi",
    "solve",
    "solve_exact",
    "solve_matched_perplexity",
    "solve_otari_double",
    "solve_otari_source",
    "solve_otari_target",
    "solve_quadratic",
    "solve_rot",
    "solve_sinkhorn",
]
