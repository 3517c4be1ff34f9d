"""Concave dual ascent for the globally and pointwise constrained problems.

The dual is maximised over (lambda, mu, epsilon > 0) with epsilon held
positive through the smooth reparameterisation epsilon = eps_floor +
exp(s): an inactive constraint then shows up as s drifting to -inf
instead of a boundary hit, which keeps the problem unconstrained for the
quasi-Newton polish. The plan is recovered from the dual argument
row-wise as t_i * conj_grad(t_i (lambda_i 1 + mu - C_i) / eps_i), where
t_i is a_i under the conditional convention and 1 under the raw one.
"""

import math
import time

import numpy as np
from scipy.optimize import minimize

from .. import _kernels
from ..core import (
    CONDITIONAL,
    GLOBAL,
    KL,
    SOURCE,
    Constraint,
    DualCertificate,
    ProblemSpec,
    Tolerances,
    validate_problem,
)
from ..errors import InfeasibleEta, Overflow
from ..regularizers import EXP_MAX, ref_value
from ._common import build_report, rowwise_psi
from ._dykstra import choose_sigma, dykstra_pointwise
from ._exact import solve_exact

EPS_FLOOR = 1e-10
INACTIVE_EPS = 10.0 * EPS_FLOOR
ADAM_STEPS = 500
ADAM_LR = 0.1
WARMUP_SKIP_GRAD = 1e-3
LBFGS_MAXITER = 2000
# beyond this exponent the optimizer's surrogate continues exp linearly;
# the surrogate stays concave, C1 and exact wherever iterates can converge
_CLIP = 500.0


# ---------------------------------------------------------------------------
# dual function


class DualState:
    """Point in dual space plus the bookkeeping the ascent tracks."""

    def __init__(self, lam, mu, epsilon, value=-np.inf, grad_norm=np.inf):
        self.lam = np.asarray(lam, dtype=float)
        self.mu = np.asarray(mu, dtype=float)
        self.epsilon = np.atleast_1d(np.asarray(epsilon, dtype=float))
        if np.any(self.epsilon < EPS_FLOOR * (1.0 - 1e-9)):
            raise ValueError(f"epsilon below the floor {EPS_FLOOR}")
        self.value = float(value)
        self.grad_norm = float(grad_norm)


def _exp_ext(Q):
    """exp and its derivative, extended linearly beyond the clip point."""
    E = np.exp(np.minimum(Q, _CLIP))
    dE = E
    over = Q > _CLIP
    if over.any():
        cap = math.exp(_CLIP)
        E = np.where(over, cap * (1.0 + (Q - _CLIP)), E)
        dE = np.where(over, cap, dE)
    return E, dE


def _core(lam, mu, eps_rows, problem, clipped):
    """Constraint-independent part of the dual and its gradients.

    Returns (base, g_lam, g_mu, core, P) where base = <lam,a> + <mu,b>
    - sum_i eps_i psi*(Q_i) and core_i = psi of row i of the recovered
    plan (conditional or raw as the problem says), whose sum against the
    reference levels the callers subtract.
    """
    C = problem.cost.values
    a = problem.source.weights
    b = problem.target.weights
    t = a if problem.spec.normalisation == CONDITIONAL else np.ones_like(a)
    D = lam[:, None] + mu[None, :] - C
    Q = (t / eps_rows)[:, None] * D
    if problem.spec.regulariser == KL:
        if not clipped and Q.max() > EXP_MAX:
            raise Overflow("dual argument exceeds the exp range; rescale epsilon")
        E, dE = _exp_ext(Q) if clipped else (np.exp(Q),) * 2
        conj_rows = E.sum(axis=1)
        P = t[:, None] * dE
        core = (dE * Q - E).sum(axis=1)
    else:
        Qp = np.maximum(Q, 0.0)
        conj_rows = 0.5 * (Qp * Qp).sum(axis=1)
        P = t[:, None] * Qp
        core = conj_rows
    base = lam @ a + mu @ b - eps_rows @ conj_rows
    return base, a - P.sum(axis=1), b - P.sum(axis=0), core, P


def _eps_rows(epsilon, n_source):
    return epsilon if epsilon.size == n_source else np.full(n_source, epsilon[0])


def dual_objective_and_grad(state, problem):
    """Exact dual value and gradient at `state`.

    The lambda/mu components of the gradient are the marginal residuals
    a - P1 and b - P^T 1; the epsilon component is the constraint
    residual (psi of each recovered row minus its reference level, or
    their sum minus eta for a global budget). Raises Overflow when a KL
    exponent leaves the float64 range.
    """
    con = problem.spec.constraint
    n = len(problem.source)
    eps_rows = _eps_rows(state.epsilon, n)
    base, g_lam, g_mu, core, _ = _core(state.lam, state.mu, eps_rows, problem, clipped=False)
    if con.kind == GLOBAL:
        value = base - state.epsilon[0] * con.eta
        g_eps = np.array([core.sum() - con.eta])
    else:
        ref = ref_value(problem.spec.regulariser, con.xi_a, len(problem.target))
        value = base - ref * eps_rows.sum()
        g_eps = core - ref
    return value, {"lam": g_lam, "mu": g_mu, "epsilon": g_eps}


def recover_plan(state, problem):
    """Primal plan at a dual state (conj_grad applied row-wise)."""
    eps_rows = _eps_rows(state.epsilon, len(problem.source))
    return _core(state.lam, state.mu, eps_rows, problem, clipped=True)[4]


# ---------------------------------------------------------------------------
# ascent engine


def _make_objective(problem, n, k_eps):
    """Map the packed vector x = [lambda, mu, s] to (value, ascent grad)."""
    con = problem.spec.constraint
    if con.kind == GLOBAL:
        target = con.eta
    else:
        target = ref_value(problem.spec.regulariser, con.xi_a, len(problem.target))

    def fun(x):
        lam = x[:n]
        mu = x[n:-k_eps]
        eps = EPS_FLOOR + np.exp(np.minimum(x[-k_eps:], 500.0))
        eps_rows = _eps_rows(eps, n)
        base, g_lam, g_mu, core, _ = _core(lam, mu, eps_rows, problem, clipped=True)
        if con.kind == GLOBAL:
            value = base - eps[0] * target
            g_eps = np.array([core.sum() - target])
        else:
            value = base - target * eps.sum()
            g_eps = core - target
        g_s = g_eps * (eps - EPS_FLOOR)
        return value, np.concatenate([g_lam, g_mu, g_s])

    return fun


def _ascend(fun, x0, grad_tol, max_iter):
    """Adaptive-gradient warm start, then limited-memory quasi-Newton.

    Warm-start steps that would lower the objective are rejected and the
    step size halved, so the recorded trace is nondecreasing. Returns
    (x, value, grad, trace, evals).
    """
    x = np.asarray(x0, dtype=float).copy()
    val, g = fun(x)
    evals = 1
    trace = [val]
    if np.abs(g).max() > WARMUP_SKIP_GRAD:
        m = np.zeros_like(x)
        v = np.zeros_like(x)
        step = ADAM_LR
        for t in range(1, ADAM_STEPS + 1):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            mhat = m / (1.0 - 0.9**t)
            vhat = v / (1.0 - 0.999**t)
            lr = step / (1.0 + t / 150.0)
            cand = x + lr * mhat / (np.sqrt(vhat) + 1e-8)
            cval, cg = fun(cand)
            evals += 1
            if cval >= val - 1e-12 * (1.0 + abs(val)):
                x, val, g = cand, cval, cg
                trace.append(val)
                if np.abs(g).max() <= grad_tol:
                    break
            else:
                step *= 0.5
                if step < 1e-12:
                    break

    def neg(z):
        v_, g_ = fun(z)
        return -v_, -g_

    for _ in range(3):
        if np.abs(g).max() <= grad_tol:
            break
        res = minimize(
            neg,
            x,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": max_iter,
                "ftol": 1e-17,
                "gtol": 0.5 * grad_tol,
                "maxcor": 20,
            },
        )
        evals += res.nfev
        new_val, new_g = fun(res.x)
        evals += 1
        if new_val < val - 1e-12 * (1.0 + abs(val)):
            break  # line search went sour; keep the better point
        improved = new_val > val + 1e-15 * (1.0 + abs(val))
        x, val, g = res.x, new_val, new_g
        trace.append(val)
        if not improved:
            break
    return x, val, g, np.asarray(trace), evals


def _pack(lam, mu, eps):
    s = np.log(np.maximum(np.atleast_1d(eps) - EPS_FLOOR, 1e-300))
    return np.concatenate([lam, mu, s])


def _run_ascent(problem, lam0, mu0, eps0, grad_tol, max_iter):
    n = len(problem.source)
    k = np.atleast_1d(eps0).size
    fun = _make_objective(problem, n, k)
    x, val, g, trace, evals = _ascend(fun, _pack(lam0, mu0, eps0), grad_tol, max_iter)
    eps = EPS_FLOOR + np.exp(np.minimum(x[-k:], 500.0))
    state = DualState(x[:n], x[n:-k], eps, value=val, grad_norm=float(np.abs(g).max()))
    return state, trace, evals


# ---------------------------------------------------------------------------
# warm starts


def _sinkhorn_potentials(C, a, b, eps, max_iter=2000, tol=1e-9):
    """Raw-convention potentials (f, g) and plan of a fixed-eps entropic solve."""
    M = -C / eps
    u = np.zeros(C.shape[0])
    v = np.zeros(C.shape[1])
    _kernels.sinkhorn_log(M, np.log(a), np.log(b), u, v, max_iter, tol)
    P = np.exp(u[:, None] + M + v[None, :])
    return eps * u, eps * v, P


def _bisect_entropic(problem, measure, target, hint, strict=True):
    """Find eps with measure(P_sinkhorn(eps)) ~ target (measure decreasing).

    Returns (eps, f, g). When even the loose end of the bracket cannot
    get the measure down to `target`, raises InfeasibleEta if strict,
    else settles for the loose end (post-hoc residuals catch the rest).
    """
    C = problem.cost.values
    a = problem.source.weights
    b = problem.target.weights
    scale = max(float(np.median(C)), 1e-6 * float(C.max()), 1e-12)
    hi = hint if hint is not None else scale

    def h(eps):
        f, g, P = _sinkhorn_potentials(C, a, b, eps)
        return measure(P), f, g

    val_hi, f, g = h(hi)
    grow = 0
    while val_hi > target:
        hi *= 4.0
        val_hi, f, g = h(hi)
        grow += 1
        if grow > 40:
            if strict:
                raise InfeasibleEta(
                    f"budget {target:.6g} below the attainable minimum "
                    f"{val_hi:.6g} of the regulariser sum"
                )
            return hi, f, g
    lo = hi
    val_lo = val_hi
    shrink = 0
    while val_lo < target and shrink < 40:
        lo /= 4.0
        val_lo, _, _ = h(lo)
        shrink += 1
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        val_mid, f, g = h(mid)
        if val_mid > target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.01:
            break
    return math.sqrt(lo * hi), f, g


def _fixed_eps_start(problem, eps, maxiter=200):
    """Cheap (lambda, mu) maximiser at fixed eps (cold-start helper)."""
    n = len(problem.source)
    eps_rows = np.full(n, eps)

    def neg(z):
        base, g_lam, g_mu, _, _ = _core(z[:n], z[n:], eps_rows, problem, clipped=True)
        return -base, -np.concatenate([g_lam, g_mu])

    z0 = np.zeros(n + len(problem.target))
    res = minimize(neg, z0, jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
    return res.x[:n], res.x[n:]


# ---------------------------------------------------------------------------
# solvers


def _polytope_floor(a, m, kind, mode):
    """A certain lower bound for the polytope minimum of sum_i psi."""
    n = a.size
    if kind == KL:
        if mode == CONDITIONAL:
            return n * (-math.log(m) - 1.0)
        return float((a * (np.log(a / m) - 1.0)).sum())
    if mode == CONDITIONAL:
        return n / (2.0 * m)
    return float((a * a).sum() / (2.0 * m))


def solve_rot(C, a, b, kind, eta, *, mode=CONDITIONAL, tolerances=None, max_iterations=None):
    """Globally budgeted plan: sum of row psi values capped at eta.

    Maximises the scalar-epsilon dual. When the budget is slack at the
    unregularised optimum the exact plan is returned with eps* = 0;
    when it lies below the polytope minimum of the psi sum the dual is
    unbounded and InfeasibleEta is raised.
    """
    tol = tolerances or Tolerances()
    problem = validate_problem(
        C,
        a,
        b,
        ProblemSpec(
            regulariser=kind,
            constraint=Constraint.global_budget(eta),
            normalisation=mode,
            tolerances=tol,
        ),
    )
    started = time.perf_counter()
    av = problem.source.weights
    bv = problem.target.weights
    Cv = problem.cost.values
    m = len(problem.target)

    floor = _polytope_floor(av, m, kind, mode)
    if eta < floor - 1e-12 * (1.0 + abs(floor)):
        raise InfeasibleEta(
            f"eta = {eta:.6g} below the polytope floor {floor:.6g} of the psi sum"
        )

    base = solve_exact(Cv, av, bv)
    exact_total = float(rowwise_psi(base.plan.values, av, kind, mode).sum())
    if eta >= exact_total - 1e-12 * (1.0 + abs(exact_total)):
        return build_report(
            base.plan.values,
            problem,
            iterations=base.iterations,
            converged=True,
            method="rot-exact",
            started=started,
            certificate=DualCertificate(
                lam=base.certificate.lam, mu=base.certificate.mu, epsilon=np.zeros(1)
            ),
            activity={"global": False},
        )

    def total_psi(P):
        return float(rowwise_psi(P, av, kind, mode).sum())

    if kind == KL and mode != CONDITIONAL:
        eps0, lam0, mu0 = _bisect_entropic(problem, total_psi, eta, None)
    elif kind == KL:
        eps_raw, f, g = _bisect_entropic(problem, total_psi, eta, None)
        # the raw fixed-eps solution maps exactly onto conditional variables
        # for uniform a (eps_c = eps_raw * a_i constant, lam = f - eps log a);
        # near-uniform sources still give a good bracket and the ascent does
        # the rest
        eps0 = float(np.mean(av) * eps_raw)
        lam0 = f - eps_raw * np.log(av)
        mu0 = g
    else:
        eps0 = 0.1 * max(float(np.median(Cv)), 1e-9) * m
        lam0, mu0 = _fixed_eps_start(problem, eps0)

    max_iter = max_iterations or problem.spec.max_iterations or LBFGS_MAXITER
    state, trace, evals = _run_ascent(
        problem, lam0, mu0, np.array([max(eps0, INACTIVE_EPS)]), tol.dual_grad_tol, max_iter
    )
    if state.epsilon[0] > 1e10 * max(float(np.median(Cv)), 1e-9):
        raise InfeasibleEta(
            "dual unbounded: epsilon grew without meeting the budget, "
            f"eta = {eta:.6g} looks unattainable"
        )
    value, grads = dual_objective_and_grad(state, problem)
    state.value = value
    P = recover_plan(state, problem)
    cons = max(total_psi(P) - eta, 0.0)
    report = build_report(
        P,
        problem,
        iterations=evals,
        converged=state.grad_norm <= tol.dual_grad_tol
        and cons <= tol.constraint_tol
        and max(abs(grads["lam"]).max(), abs(grads["mu"]).max()) <= tol.marginal_tol,
        method="rot-dual",
        started=started,
        constraint_residual=cons,
        certificate=DualCertificate(lam=state.lam, mu=state.mu, epsilon=state.epsilon),
        trace=trace,
        activity={"global": bool(state.epsilon[0] > INACTIVE_EPS)},
    )
    return report


def solve_otari_source(
    C, a, b, kind, xi, *, mode=CONDITIONAL, tolerances=None, max_iterations=None
):
    """Pointwise row-constrained plan via the per-row-epsilon dual.

    Every row whose constraint is active at the solution satisfies
    psi(row) = psi(e_xi) to constraint_tol. Rows whose eps_i collapses to
    the floor are reported inactive; the solve then falls back to Dykstra
    refinement at a sigma below min eps (fallback_used=True).
    """
    tol = tolerances or Tolerances()
    problem = validate_problem(
        C,
        a,
        b,
        ProblemSpec(
            regulariser=kind,
            constraint=Constraint.source(xi),
            normalisation=mode,
            tolerances=tol,
        ),
    )
    started = time.perf_counter()
    av = problem.source.weights
    bv = problem.target.weights
    Cv = problem.cost.values
    n, m = problem.cost.shape
    ref = ref_value(kind, xi, m)

    if xi <= 1.0 + 1e-12:
        # psi(q) <= psi(e_1) holds for every distribution, so the
        # constraint set is vacuous and the problem is the plain LP
        base = solve_exact(Cv, av, bv)
        return build_report(
            base.plan.values,
            problem,
            iterations=base.iterations,
            converged=True,
            method="otari-s-exact",
            started=started,
            certificate=DualCertificate(
                lam=base.certificate.lam, mu=base.certificate.mu, epsilon=np.zeros(n)
            ),
            activity={"rows": np.zeros(n, dtype=bool)},
        )

    if kind == KL:

        def mean_psi(P):
            return float(rowwise_psi(P, av, kind, mode).mean())

        eps_raw, f, g = _bisect_entropic(problem, mean_psi, ref, None, strict=False)
        if mode == CONDITIONAL:
            eps0 = np.maximum(av * eps_raw, INACTIVE_EPS)
            lam0 = f - eps_raw * np.log(av)
        else:
            eps0 = np.full(n, eps_raw)
            lam0 = f
        mu0 = g
    else:
        e = 0.1 * max(float(np.median(Cv)), 1e-9) * xi
        lam0, mu0 = _fixed_eps_start(problem, e)
        eps0 = np.full(n, e)

    max_iter = max_iterations or problem.spec.max_iterations or LBFGS_MAXITER
    state, trace, evals = _run_ascent(problem, lam0, mu0, eps0, tol.dual_grad_tol, max_iter)
    value, grads = dual_objective_and_grad(state, problem)
    state.value = value
    P = recover_plan(state, problem)
    psi_rows = rowwise_psi(P, av, kind, mode)
    viol = float(np.maximum(psi_rows - ref, 0.0).max())
    marg = max(abs(grads["lam"]).max(), abs(grads["mu"]).max())
    ok = (
        state.grad_norm <= tol.dual_grad_tol
        and marg <= tol.marginal_tol
        and viol <= tol.constraint_tol
    )
    # a slack row's true multiplier is 0, which the log reparameterisation
    # can only approach, so eps collapses there; classify such rows
    # (strictly inside the ball, or eps far below the rest) as inactive
    inactive = (psi_rows < ref - tol.constraint_tol) | (
        state.epsilon < max(INACTIVE_EPS, 1e-2 * float(np.median(state.epsilon)))
    )
    active = ~inactive
    cert = DualCertificate(lam=state.lam, mu=state.mu, epsilon=state.epsilon)

    if ok:
        return build_report(
            P,
            problem,
            iterations=evals,
            converged=True,
            method="otari-s-dual",
            started=started,
            constraint_residual=viol,
            certificate=cert,
            trace=trace,
            activity={"rows": active},
        )

    # stalled ascent (collapsing eps wrecks the conditioning): refine by
    # projection at a sigma no larger than the smallest trustworthy eps;
    # a global stall leaves every eps at garbage scale, so keep sigma
    # above a fraction of the heuristic or the kernel cannot equilibrate
    sigma = None
    if active.any():
        sigma = 0.9 * float(state.epsilon[active].min())
        sigma = max(sigma, 0.1 * choose_sigma(Cv, kind, xi=xi))
    fallback = dykstra_pointwise(
        problem,
        xi_a=xi,
        xi_b=None,
        sigma=sigma,
        tolerances=tol,
    )
    fallback.method = "otari-s-dual+dykstra"
    fallback.fallback_used = True
    fallback.certificate = cert
    fallback.trace = trace
    return fallback


def solve_otari_target(
    C, a, b, kind, xi, *, mode=CONDITIONAL, tolerances=None, max_iterations=None
):
    """Pointwise column-constrained plan (transpose wrapper)."""
    Cv = C.values if hasattr(C, "values") else np.asarray(C, dtype=float)
    rep = solve_otari_source(
        Cv.T,
        b if not hasattr(b, "weights") else b.weights,
        a if not hasattr(a, "weights") else a.weights,
        kind,
        xi,
        mode=mode,
        tolerances=tolerances,
        max_iterations=max_iterations,
    )
    problem = validate_problem(
        C,
        a,
        b,
        ProblemSpec(
            regulariser=kind,
            constraint=Constraint.target(xi),
            normalisation=mode,
            tolerances=tolerances or Tolerances(),
        ),
    )
    started = time.perf_counter() - rep.runtime_seconds
    cert = rep.certificate
    out = build_report(
        rep.plan.values.T,
        problem,
        iterations=rep.iterations,
        converged=rep.converged,
        method=rep.method.replace("otari-s", "otari-t"),
        started=started,
        constraint_residual=rep.residuals["constraint"],
        certificate=None
        if cert is None
        else DualCertificate(lam=cert.mu, mu=cert.lam, epsilon=cert.epsilon),
        trace=rep.trace,
        activity=None if rep.activity is None else {"cols": rep.activity.get("rows")},
        fallback_used=rep.fallback_used,
    )
    return out
