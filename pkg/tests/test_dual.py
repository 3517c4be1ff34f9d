import numpy as np
import pytest

from otari.core import (
    CONDITIONAL,
    Constraint,
    KL,
    L2,
    ProblemSpec,
    RAW,
    Tolerances,
    validate_problem,
)
from otari.errors import InfeasibleEta, Overflow
from otari.solvers import (
    rowwise_psi,
    solve_exact,
    solve_otari_source,
    solve_otari_target,
    solve_rot,
    solve_sinkhorn,
)
from otari.solvers._dual import DualState, dual_objective_and_grad, recover_plan

from oracles import central_diff_grad


def _random_problem(kind, mode, constraint, seed):
    rng = np.random.default_rng(seed)
    C = rng.random((5, 6))
    a = rng.random(5) + 0.5
    a /= a.sum()
    b = rng.random(6) + 0.5
    b /= b.sum()
    spec = ProblemSpec(regulariser=kind, constraint=constraint, normalisation=mode)
    return validate_problem(C, a, b, spec), rng


def _fd_error(problem, rng, k_eps):
    n, m = 5, 6
    lam = 0.1 * rng.standard_normal(n)
    mu = 0.1 * rng.standard_normal(m)
    eps = 0.5 + rng.random(k_eps)

    def value_at(x):
        state = DualState(x[:n], x[n : n + m], x[n + m :])
        return dual_objective_and_grad(state, problem)[0]

    x0 = np.concatenate([lam, mu, eps])
    _, grad = dual_objective_and_grad(DualState(lam, mu, eps), problem)
    an = np.concatenate([grad["lam"], grad["mu"], grad["epsilon"]])
    fd = central_diff_grad(value_at, x0)
    return np.abs(fd - an).max() / (1.0 + np.abs(an).max())


# ---- finite-difference gradient checks


@pytest.mark.parametrize("kind", [KL, L2])
@pytest.mark.parametrize("mode", [CONDITIONAL, RAW])
def test_fd_gradient_global(kind, mode):
    problem, rng = _random_problem(kind, mode, Constraint.global_budget(1.0), seed=7)
    assert _fd_error(problem, rng, k_eps=1) <= 1e-6


@pytest.mark.parametrize("kind", [KL, L2])
@pytest.mark.parametrize("mode", [CONDITIONAL, RAW])
def test_fd_gradient_source(kind, mode):
    problem, rng = _random_problem(kind, mode, Constraint.source(3.0), seed=19)
    assert _fd_error(problem, rng, k_eps=5) <= 1e-6


def test_overflow_guard():
    problem, _ = _random_problem(KL, RAW, Constraint.global_budget(1.0), seed=3)
    state = DualState(50.0 * np.ones(5), np.zeros(6), np.array([1e-2]))
    with pytest.raises(Overflow):
        dual_objective_and_grad(state, problem)


def test_state_rejects_epsilon_below_floor():
    with pytest.raises(ValueError):
        DualState(np.zeros(2), np.zeros(2), np.array([1e-12]))


# ---- globally budgeted solves


def test_rot_entropic_self_consistency():
    # budget set to the raw psi total of a fixed-eps entropic plan must
    # recover that plan and its epsilon
    rng = np.random.default_rng(400)
    C = rng.random((20, 30))
    a = rng.random(20) + 0.2
    a /= a.sum()
    b = rng.random(30) + 0.2
    b /= b.sum()
    eps0 = 0.05 + 0.1 * rng.random()
    base = solve_sinkhorn(C, a, b, eps0, tolerances=Tolerances(marginal_tol=1e-10))
    eta = rowwise_psi(base.plan.values, a, KL, RAW).sum()
    rep = solve_rot(C, a, b, KL, eta, mode=RAW)
    assert rep.converged
    assert np.abs(rep.plan.values - base.plan.values).max() <= 1e-5
    eps_star = float(rep.certificate.epsilon[0])
    assert abs(eps_star - eps0) <= 0.01 * eps0


def test_rot_trace_nondecreasing():
    rng = np.random.default_rng(21)
    C = rng.random((6, 5))
    a = np.full(6, 1 / 6)
    b = np.full(5, 0.2)
    rep = solve_rot(C, a, b, KL, 6 * (-np.log(3.0) - 1.0))
    assert rep.converged
    tr = np.asarray(rep.trace)
    assert len(tr) > 1
    assert (np.diff(tr) >= -1e-9 * (1.0 + np.abs(tr[:-1]))).all()


@pytest.mark.parametrize("kind", [KL, L2])
def test_rot_slack_budget_returns_exact(kind):
    rng = np.random.default_rng(21)
    C = rng.random((6, 5))
    a = np.full(6, 1 / 6)
    b = np.full(5, 0.2)
    exact = solve_exact(C, a, b)
    eta = rowwise_psi(exact.plan.values, a, kind, CONDITIONAL).sum() + 1.0
    rep = solve_rot(C, a, b, kind, eta)
    assert rep.method == "rot-exact"
    assert float(rep.certificate.epsilon[0]) == 0.0
    assert np.array_equal(rep.plan.values, exact.plan.values)


@pytest.mark.parametrize("kind", [KL, L2])
def test_rot_active_budget_met(kind):
    rng = np.random.default_rng(21)
    C = rng.random((6, 5))
    a = np.full(6, 1 / 6)
    b = np.full(5, 0.2)
    exact = solve_exact(C, a, b)
    hi = rowwise_psi(exact.plan.values, a, kind, CONDITIONAL).sum()
    lo = rowwise_psi(np.outer(a, b), a, kind, CONDITIONAL).sum()
    eta = lo + 0.5 * (hi - lo)
    rep = solve_rot(C, a, b, kind, eta)
    assert rep.converged
    assert rep.method == "rot-dual"
    tot = rowwise_psi(rep.plan.values, a, kind, CONDITIONAL).sum()
    assert abs(tot - eta) <= 1e-6 * (1.0 + abs(eta))
    assert float(rep.certificate.epsilon[0]) > 0.0


def test_rot_eta_below_floor_raises():
    rng = np.random.default_rng(21)
    C = rng.random((6, 5))
    a = np.full(6, 1 / 6)
    b = np.full(5, 0.2)
    lo = rowwise_psi(np.outer(a, b), a, KL, CONDITIONAL).sum()
    with pytest.raises(InfeasibleEta):
        solve_rot(C, a, b, KL, lo - 10.0)


# ---- pointwise row/column constrained solves


def test_otari_source_certificate_reproduces_plan():
    rng = np.random.default_rng(0)
    C = rng.random((8, 8))
    a = np.full(8, 1 / 8)
    rep = solve_otari_source(C, a, a, KL, 4.0)
    assert rep.converged and not rep.fallback_used
    assert rep.method == "otari-s-dual"
    problem = validate_problem(
        C, a, a, ProblemSpec(regulariser=KL, constraint=Constraint.source(4.0))
    )
    state = DualState(
        rep.certificate.lam, rep.certificate.mu, rep.certificate.epsilon
    )
    assert np.abs(recover_plan(state, problem) - rep.plan.values).max() <= 1e-12
    _, grad = dual_objective_and_grad(state, problem)
    assert np.abs(grad["lam"]).max() <= 1e-6
    assert np.abs(grad["mu"]).max() <= 1e-6


def test_otari_source_unit_perplexity_is_exact():
    rng = np.random.default_rng(11)
    C = rng.random((8, 8))
    a = np.full(8, 1 / 8)
    exact = solve_exact(C, a, a)
    rep = solve_otari_source(C, a, a, KL, 1.0)
    assert rep.method == "otari-s-exact"
    assert np.array_equal(rep.plan.values, exact.plan.values)


def test_otari_source_maximal_perplexity_is_product():
    rng = np.random.default_rng(21)
    C = rng.random((6, 5))
    a = np.full(6, 1 / 6)
    b = np.full(5, 0.2)
    rep = solve_otari_source(C, a, b, KL, 5.0)
    assert rep.converged
    assert np.abs(rep.plan.values - np.outer(a, b)).max() <= 1e-8


def test_otari_source_fallback_converges():
    # tight perplexity stalls the smooth ascent; the alternating-projection
    # fallback must finish the job and say so
    rng = np.random.default_rng(11)
    C = rng.random((8, 8))
    a = np.full(8, 1 / 8)
    rep = solve_otari_source(C, a, a, KL, 1.2)
    assert rep.converged
    assert rep.fallback_used
    assert rep.method == "otari-s-dual+dykstra"


def test_otari_target_is_transposed_source():
    rng = np.random.default_rng(5)
    C = rng.random((6, 9))
    a = rng.random(6) + 0.5
    a /= a.sum()
    b = rng.random(9) + 0.5
    b /= b.sum()
    rep_t = solve_otari_target(C, a, b, KL, 3.0)
    rep_s = solve_otari_source(C.T.copy(), b, a, KL, 3.0)
    assert rep_t.method.startswith("otari-t")
    assert np.abs(rep_t.plan.values - rep_s.plan.values.T).max() <= 1e-12
    assert "cols" in rep_t.activity
