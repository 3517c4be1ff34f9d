import numpy as np
import pytest

from otari import regularizers as reg
from otari.core import KL, L2
from otari.errors import DomainViolation, InvalidPerplexity, Overflow

from oracles import central_diff_grad


def test_kl_value_pinned():
    assert reg.kl_value(np.array([1.0, 0.0])) == pytest.approx(-1.0, abs=1e-12)
    assert reg.kl_value(np.array([0.5, 0.5])) == pytest.approx(
        -(np.log(2) + 1), abs=1e-12
    )
    assert reg.kl_value(np.array([0.0, 0.0])) == 0.0


def test_kl_value_rejects_negative():
    with pytest.raises(DomainViolation):
        reg.kl_value(np.array([0.5, -0.1]))


def test_kl_conj_grad():
    assert np.allclose(reg.kl_conj_grad(np.zeros(2)), np.ones(2))
    out = reg.kl_conj_grad(np.array([np.log(2.0), -745.0]))
    assert out[0] == pytest.approx(2.0)
    assert out[1] == pytest.approx(0.0, abs=1e-300)


def test_kl_grad_conj_grad_round_trip():
    p = np.array([0.3, 0.7])
    assert np.allclose(reg.kl_conj_grad(reg.kl_grad(p)), p, atol=1e-12)


def test_kl_conj_overflow_guard():
    with pytest.raises(Overflow):
        reg.kl_conj_value(np.array([800.0]))
    with pytest.raises(Overflow):
        reg.kl_conj_grad(np.array([0.0, 710.0]))


def test_l2_pinned():
    assert reg.l2_value(np.array([0.6, 0.8])) == pytest.approx(0.5)
    assert np.allclose(reg.l2_conj_grad(np.array([1.0, -1.0])), [1.0, 0.0])
    assert reg.l2_conj_value(np.array([1.0, -1.0])) == pytest.approx(0.5)


def test_ref_value_pinned():
    assert reg.ref_value(KL, 5.0, 10) == pytest.approx(-(np.log(5) + 1))
    assert reg.ref_value(L2, 4.0, 10) == pytest.approx(0.125)
    assert reg.ref_value(KL, 1.0, 3) == pytest.approx(-1.0)


def test_ref_value_bounds():
    with pytest.raises(InvalidPerplexity):
        reg.ref_value(KL, 0.9, 10)
    with pytest.raises(InvalidPerplexity):
        reg.ref_value(L2, 11.0, 10)


def test_reference_level_of():
    lvl = reg.ReferenceLevel.of(KL, 2.0, 8)
    assert lvl.value == pytest.approx(-(np.log(2) + 1))
    assert lvl.dimension == 8


def test_bregman_divergence_pinned():
    rng = np.random.default_rng(0)
    P = rng.random((3, 4))
    assert reg.bregman_divergence(KL, P, P) == pytest.approx(0.0, abs=1e-12)
    assert reg.bregman_divergence(L2, P, P) == 0.0
    assert reg.bregman_divergence(
        L2, np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]])
    ) == pytest.approx(0.5)
    # hand value: 0.5 log 2 + 0.5 log(2/3), masses cancel
    got = reg.bregman_divergence(KL, np.array([[0.5, 0.5]]), np.array([[0.25, 0.75]]))
    assert got == pytest.approx(0.5 * np.log(2) + 0.5 * np.log(2 / 3), abs=1e-12)


def test_bregman_kl_domain_violation():
    with pytest.raises(DomainViolation):
        reg.bregman_divergence(KL, np.array([[0.5, 0.5]]), np.array([[0.0, 1.0]]))


def test_bregman_nonnegative_random():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        P = rng.random((2, 3)) + 1e-6
        Q = rng.random((2, 3)) + 1e-6
        assert reg.bregman_divergence(KL, P, Q) >= -1e-12
        assert reg.bregman_divergence(L2, P, Q) >= 0.0


def test_fenchel_young_inequality():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        q = rng.normal(size=5) * 2
        p = rng.random(5) + 1e-9
        for kind in (KL, L2):
            r = reg.Regulariser(kind)
            assert r.conj_value(q) >= (q * p).sum() - r.value(p) - 1e-10
            # equality at the conjugate gradient
            pstar = r.conj_grad(q)
            lhs = r.conj_value(q)
            rhs = (q * pstar).sum() - r.value(pstar)
            assert lhs == pytest.approx(rhs, abs=1e-10)


def test_conj_grad_matches_finite_differences():
    rng = np.random.default_rng(3)
    for kind in (KL, L2):
        r = reg.Regulariser(kind)
        for _ in range(20):
            q = rng.normal(size=4)
            g = r.conj_grad(q)
            fd = central_diff_grad(r.conj_value, q)
            denom = np.maximum(np.abs(g), 1e-8)
            assert np.max(np.abs(g - fd) / denom) < 1e-4


def test_kl_strict_convexity_spot():
    rng = np.random.default_rng(4)
    p = rng.random(6) + 0.01
    q = rng.random(6) + 0.01
    mid = reg.kl_value(0.5 * p + 0.5 * q)
    assert mid < 0.5 * reg.kl_value(p) + 0.5 * reg.kl_value(q)


def test_regulariser_dispatch():
    r = reg.Regulariser(KL)
    assert r.ref_value(2.0, 4) == pytest.approx(-(np.log(2) + 1))
    r2 = reg.Regulariser(L2)
    assert r2.ref_value(2.0, 4) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        reg.Regulariser("huber")
