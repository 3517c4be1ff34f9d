import math

import numpy as np
import pytest

from otari.core import (
    CONDITIONAL,
    Constraint,
    KL,
    L2,
    ProblemSpec,
    Tolerances,
    validate_problem,
)
from otari.errors import NonFiniteIterate
from otari.diagnostics import row_perplexity
from otari.solvers import (
    choose_sigma,
    dykstra_pointwise,
    solve_otari_double,
    solve_quadratic,
)
from otari.solvers._dual import DualCertificate

from oracles import lp_transport


def _problem(C, a, b, kind, constraint, tol=None):
    spec = ProblemSpec(
        regulariser=kind,
        constraint=constraint,
        normalisation=CONDITIONAL,
        tolerances=tol or Tolerances(),
    )
    return validate_problem(C, a, b, spec)


# ---- temperature heuristic


def test_choose_sigma_from_certificate():
    cert = DualCertificate(np.zeros(2), np.zeros(2), np.array([2.0, 5.0]))
    assert choose_sigma(np.ones((2, 2)), KL, certificate=cert) == pytest.approx(1.8)


def test_choose_sigma_entropic_heuristic():
    C = np.ones((100, 100))  # median 1
    assert choose_sigma(C, KL) == pytest.approx(0.1 / math.log(100))


def test_choose_sigma_quadratic_heuristic():
    C = np.ones((10, 10))
    assert choose_sigma(C, L2, xi=3.0) == pytest.approx(0.3)


def test_choose_sigma_zero_cost_stays_positive():
    assert choose_sigma(np.zeros((4, 4)), KL) > 0
    assert choose_sigma(np.zeros((4, 4)), L2, xi=2.0) > 0


# ---- two-state pinned solution

# with C = [[0,1],[1,0]], uniform marginals and xi = 1.5, the symmetric
# optimum [[x, .5-x],[.5-x, x]] has row entropy log 1.5; root found by
# scalar bisection to machine precision
_TWO_STATE_X = 0.42986174650126746


def test_double_two_state_pinned():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = np.array([0.5, 0.5])
    rep = solve_otari_double(
        C, a, a, KL, 1.5, 1.5,
        tolerances=Tolerances(marginal_tol=1e-10, constraint_tol=1e-9),
        max_iterations=60_000,
    )
    x = rep.plan.values[0, 0]
    assert x == pytest.approx(_TWO_STATE_X, abs=1e-7)
    P = rep.plan.values
    assert np.abs(P - P.T).max() <= 1e-9
    assert np.abs(row_perplexity(P) - 1.5).max() <= 1e-3


def test_double_two_state_default_tolerances():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = np.array([0.5, 0.5])
    rep = solve_otari_double(C, a, a, KL, 1.5, 1.5)
    assert rep.converged
    assert rep.plan.values[0, 0] == pytest.approx(_TWO_STATE_X, abs=1e-3)


# ---- forced-uniform shortcut


def test_double_maximal_row_perplexity_shortcut():
    rng = np.random.default_rng(3)
    C = rng.random((4, 6))
    a = np.full(4, 0.25)
    b = np.full(6, 1 / 6)
    rep = solve_otari_double(C, a, b, KL, 6.0, 4.0)
    assert rep.method == "otari-d-uniform"
    assert rep.iterations == 0
    assert np.abs(rep.plan.values - np.outer(a, b)).max() <= 1e-15


# ---- marginal and ball contracts


@pytest.mark.parametrize("kind", [KL, L2])
def test_pointwise_marginals_and_rows(kind):
    rng = np.random.default_rng(8)
    C = rng.random((20, 30))
    a = rng.random(20) + 0.2
    a /= a.sum()
    b = rng.random(30) + 0.2
    b /= b.sum()
    problem = _problem(C, a, b, kind, Constraint.source(4.0))
    rep = dykstra_pointwise(problem, xi_a=4.0, max_iter=60_000)
    assert rep.converged
    P = rep.plan.values
    assert np.abs(P.sum(axis=1) - a).max() <= 1e-6
    assert np.abs(P.sum(axis=0) - b).max() <= 1e-6
    assert rep.method == f"dykstra-{kind}"
    # rows flagged active sit on the perplexity shell
    active = rep.activity["rows"]
    if kind == KL and active.any():
        assert np.abs(row_perplexity(P)[active] - 4.0).max() <= 1e-3


def test_nonfinite_iterate_guard():
    # a strictly positive cost at denormal sigma zeroes the whole kernel
    C = np.array([[1.0, 2.0], [2.0, 1.0]])
    a = np.array([0.5, 0.5])
    problem = _problem(C, a, a, KL, Constraint.source(1.5))
    with pytest.raises(NonFiniteIterate):
        dykstra_pointwise(problem, xi_a=1.5, sigma=1e-308)


def test_sigma_must_be_positive():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = np.array([0.5, 0.5])
    problem = _problem(C, a, a, KL, Constraint.source(1.5))
    with pytest.raises(ValueError):
        dykstra_pointwise(problem, xi_a=1.5, sigma=0.0)


# ---- fixed-penalty quadratic solve


def test_quadratic_rejects_bad_epsilon():
    C = np.zeros((2, 2))
    a = np.array([0.5, 0.5])
    for eps in (0.0, -0.5, np.nan):
        with pytest.raises(ValueError):
            solve_quadratic(C, a, a, eps)


def test_quadratic_variational_optimality():
    # the solution minimises ||P - (-C/eps)||^2 over the polytope, so no
    # feasible competitor may do better
    rng = np.random.default_rng(14)
    C = rng.random((6, 8))
    a = rng.random(6) + 0.3
    a /= a.sum()
    b = rng.random(8) + 0.3
    b /= b.sum()
    eps = 0.7
    rep = solve_quadratic(
        C, a, b, eps, tolerances=Tolerances(marginal_tol=1e-9, constraint_tol=1e-9)
    )
    K = -C / eps
    dist = ((rep.plan.values - K) ** 2).sum()
    competitors = [np.outer(a, b), lp_transport(C, a, b)[1]]
    for seed in range(5):
        r = np.random.default_rng(seed)
        competitors.append(lp_transport(r.random((6, 8)), a, b)[1])
    for Q in competitors:
        assert dist <= ((Q - K) ** 2).sum() + 1e-7


def test_quadratic_objective_matches_plan():
    rng = np.random.default_rng(9)
    C = rng.random((5, 5))
    a = np.full(5, 0.2)
    rep = solve_quadratic(C, a, a, 0.5)
    assert rep.method == "qot"
    assert rep.objective == pytest.approx(float((rep.plan.values * C).sum()), abs=1e-12)
