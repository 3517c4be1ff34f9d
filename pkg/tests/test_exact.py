import numpy as np
import pytest

from otari.errors import SizeGuard
from otari.solvers import solve_exact, solve_otari_source
from otari.core import KL

from oracles import assignment_plan, lp_transport


def test_anti_diagonal_pinned():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = np.array([0.5, 0.5])
    rep = solve_exact(C, a, a)
    assert np.allclose(rep.plan.values, np.diag([0.5, 0.5]), atol=1e-12)
    assert rep.objective == pytest.approx(0.0, abs=1e-12)
    assert rep.method == "exact"
    assert rep.converged


def test_matches_assignment_oracle():
    # square uniform marginals: the LP optimum is a permutation matrix
    for seed in range(20):
        rng = np.random.default_rng(seed)
        C = rng.random((6, 6))
        a = np.full(6, 1 / 6)
        rep = solve_exact(C, a, a)
        P_ref = assignment_plan(C)
        assert np.array_equal(rep.plan.values, P_ref)
        assert rep.objective == float((P_ref * C).sum())


def test_matches_lp_oracle_rectangular():
    for seed in (3, 17, 92):
        rng = np.random.default_rng(seed)
        C = rng.random((7, 11))
        a = rng.random(7) + 0.1
        a /= a.sum()
        b = rng.random(11) + 0.1
        b /= b.sum()
        rep = solve_exact(C, a, b)
        cost_ref, P_ref = lp_transport(C, a, b)
        assert rep.objective <= cost_ref + 1e-9
        assert rep.objective == pytest.approx(cost_ref, abs=1e-9)
        P = rep.plan.values
        assert np.abs(P.sum(axis=1) - a).max() <= 1e-12
        assert np.abs(P.sum(axis=0) - b).max() <= 1e-12


def test_vertex_support():
    # basic feasible solutions carry at most n + m - 1 nonzero cells
    rng = np.random.default_rng(5)
    C = rng.random((9, 13))
    a = rng.random(9) + 0.1
    a /= a.sum()
    b = rng.random(13) + 0.1
    b /= b.sum()
    rep = solve_exact(C, a, b)
    assert int((rep.plan.values > 0).sum()) <= 9 + 13 - 1


def test_size_guard():
    with pytest.raises(SizeGuard):
        solve_exact(
            np.zeros((2000, 2001)),
            np.full(2000, 1 / 2000),
            np.full(2001, 1 / 2001),
        )


def test_lower_bounds_regularised_cost():
    rng = np.random.default_rng(41)
    C = rng.random((8, 8))
    a = np.full(8, 1 / 8)
    exact = solve_exact(C, a, a)
    reg = solve_otari_source(C, a, a, KL, 3.0)
    assert exact.objective <= reg.objective + 1e-10
