import numpy as np
import pytest

from otari.errors import NonFiniteInput
from otari.solvers import solve_sinkhorn
from otari.core import Tolerances

from oracles import sinkhorn_scaling


def test_two_state_pinned():
    # symmetric 2x2 with unit off-diagonal cost at eps=1: the diagonal
    # entry solves 2x = 1/(1 + e^{-1}) by symmetry of the fixed point
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = np.array([0.5, 0.5])
    rep = solve_sinkhorn(C, a, a, 1.0, tolerances=Tolerances(marginal_tol=1e-12))
    x = 0.5 / (1.0 + np.exp(-1.0))
    expect = np.array([[x, 0.5 - x], [0.5 - x, x]])
    assert np.abs(rep.plan.values - expect).max() <= 1e-10
    assert rep.method == "sinkhorn"


def test_zero_cost_gives_product_plan():
    a = np.full(4, 0.25)
    b = np.full(7, 1 / 7)
    rep = solve_sinkhorn(np.zeros((4, 7)), a, b, 1.0)
    assert np.abs(rep.plan.values - np.outer(a, b)).max() <= 1e-12
    assert rep.iterations == 1


def test_marginals_random():
    rng = np.random.default_rng(8)
    C = rng.random((20, 30))
    a = rng.random(20) + 0.1
    a /= a.sum()
    b = rng.random(30) + 0.1
    b /= b.sum()
    rep = solve_sinkhorn(C, a, b, 0.05)
    P = rep.plan.values
    assert rep.converged
    assert np.abs(P.sum(axis=1) - a).max() <= 1e-6
    assert np.abs(P.sum(axis=0) - b).max() <= 1e-6
    assert (P > 0).all()


def test_matches_scaling_oracle():
    rng = np.random.default_rng(13)
    C = rng.random((6, 9))
    a = rng.random(6) + 0.2
    a /= a.sum()
    b = rng.random(9) + 0.2
    b /= b.sum()
    rep = solve_sinkhorn(C, a, b, 0.2, tolerances=Tolerances(marginal_tol=1e-12))
    P_ref = sinkhorn_scaling(C, a, b, 0.2, iters=20_000)
    assert np.abs(rep.plan.values - P_ref).max() <= 1e-10


def test_certificate_consistent():
    # lam/mu reproduce the plan through the Gibbs kernel
    rng = np.random.default_rng(2)
    C = rng.random((5, 6))
    a = np.full(5, 0.2)
    b = np.full(6, 1 / 6)
    eps = 0.3
    rep = solve_sinkhorn(C, a, b, eps, tolerances=Tolerances(marginal_tol=1e-12))
    cert = rep.certificate
    logP = (cert.lam[:, None] + cert.mu[None, :] - C) / eps
    assert np.abs(np.exp(logP) - rep.plan.values).max() <= 1e-9
    assert cert.epsilon[0] == eps


def test_rejects_bad_epsilon():
    C = np.zeros((2, 2))
    a = np.array([0.5, 0.5])
    for eps in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(NonFiniteInput):
            solve_sinkhorn(C, a, a, eps)


def test_iteration_cap_reported():
    rng = np.random.default_rng(1)
    C = rng.random((6, 5)) + 5.0 * np.eye(6, 5)
    a = np.full(6, 1 / 6)
    b = np.full(5, 0.2)
    rep = solve_sinkhorn(C, a, b, 1e-3, max_iter=3)
    assert not rep.converged
    assert rep.iterations == 3
