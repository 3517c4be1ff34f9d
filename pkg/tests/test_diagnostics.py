import numpy as np
import pytest

from otari import diagnostics as diag
from otari.core import KL
from otari.errors import DimensionMismatch
from otari.solvers import solve_exact, solve_otari_source

from oracles import shannon_entropy


def test_row_perplexity_pinned():
    P = np.full((3, 10), 0.1)
    assert np.allclose(diag.row_perplexity(P), 10.0, atol=1e-12)
    one_hot = np.zeros((2, 5))
    one_hot[:, 0] = 1.0
    assert np.allclose(diag.row_perplexity(one_hot), 1.0, atol=1e-12)
    half = np.array([[0.5, 0.5, 0.0, 0.0]])
    assert diag.row_perplexity(half)[0] == pytest.approx(2.0, abs=1e-12)


def test_row_perplexity_scale_invariant():
    # rows are normalised before measuring, so total mass is irrelevant
    rng = np.random.default_rng(4)
    P = rng.random((5, 7))
    assert np.allclose(diag.row_perplexity(P), diag.row_perplexity(3.7 * P))


def test_col_perplexity_is_transposed_row():
    rng = np.random.default_rng(4)
    P = rng.random((5, 7))
    assert np.allclose(diag.col_perplexity(P), diag.row_perplexity(P.T))


def test_product_plan_entropy_splits():
    rng = np.random.default_rng(10)
    a = rng.random(6) + 0.2
    a /= a.sum()
    b = rng.random(9) + 0.2
    b /= b.sum()
    H = diag.global_entropy(np.outer(a, b))
    assert H == pytest.approx(shannon_entropy(a) + shannon_entropy(b), abs=1e-12)


def test_transport_cost_pinned_and_checked():
    P = np.diag([0.5, 0.5])
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert diag.transport_cost(P, C) == 0.0
    with pytest.raises(DimensionMismatch):
        diag.transport_cost(P, np.zeros((2, 3)))


def test_marginal_residual_zero_on_feasible():
    rng = np.random.default_rng(2)
    a = rng.random(4) + 0.5
    a /= a.sum()
    b = rng.random(6) + 0.5
    b /= b.sum()
    row, col = diag.marginal_residual(np.outer(a, b), a, b)
    assert row <= 1e-15 and col <= 1e-15


def test_sparsity_threshold():
    P = np.array([[0.0, 1e-9], [0.5, 0.5]])
    assert diag.sparsity(P) == 0.25
    assert diag.sparsity(P, threshold=1e-8) == 0.5


def test_vertex_plan_support_fraction():
    rng = np.random.default_rng(6)
    C = rng.random((6, 6))
    a = np.full(6, 1 / 6)
    rep = solve_exact(C, a, a)
    assert 1.0 - diag.sparsity(rep.plan.values) <= 11 / 36


def test_plan_mass_sums_to_one():
    rng = np.random.default_rng(6)
    C = rng.random((6, 6))
    a = np.full(6, 1 / 6)
    rep = solve_otari_source(C, a, a, KL, 2.0)
    assert rep.plan.values.sum() == pytest.approx(1.0, abs=1e-9)


def test_pointwise_rows_sit_on_the_shell():
    rng = np.random.default_rng(0)
    C = rng.random((8, 8))
    a = np.full(8, 1 / 8)
    rep = solve_otari_source(C, a, a, KL, 4.0)
    active = rep.activity["rows"]
    assert active.all()
    assert np.abs(diag.row_perplexity(rep.plan.values) - 4.0).max() <= 1e-3


def test_analyze_bundle():
    rng = np.random.default_rng(3)
    C = rng.random((5, 6))
    a = np.full(5, 0.2)
    b = np.full(6, 1 / 6)
    rep = solve_otari_source(C, a, b, KL, 3.0)
    d = diag.analyze(rep.plan, C)
    assert d.row_entropy.shape == (5,)
    assert d.col_perplexity.shape == (6,)
    assert d.cost == pytest.approx(rep.objective, abs=1e-12)
    assert d.marginal_residuals[0] <= 1e-6
    assert 0.0 < d.nnz_fraction <= 1.0
    with pytest.raises(DimensionMismatch):
        diag.analyze(rep.plan.values, C)  # raw array without marginals
