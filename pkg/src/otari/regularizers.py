"""The psi abstraction: row regularisers, conjugates, Bregman divergences.

Two kinds are shipped:

* ``kl``: psi(p) = <p, log p - 1>, the negative-entropy functional with
  the 0 log 0 = 0 convention. Conjugate (over the nonnegative orthant)
  psi*(q) = sum_j exp(q_j), gradient exp(q).
* ``l2``: psi(p) = 1/2 ||p||^2. Conjugate restricted to the nonnegative
  orthant psi*(q) = 1/2 ||[q]_+||^2, gradient [q]_+.

The reference level psi(e_xi) for the uniform vector e_xi = (1/xi) 1_{i<=xi}
is -(log xi + 1) for kl and 1/(2 xi) for l2. The latter follows from the
definition of psi_2; the constraint set it induces is
||row||^2 <= 1/xi either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import KL, L2, KINDS
from .errors import (
    DimensionMismatch,
    DomainViolation,
    InvalidPerplexity,
    NonFiniteInput,
    Overflow,
)

#: exp arguments above this overflow float64
EXP_MAX = 709.0


def _check_finite(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    return arr


def kl_value(p, axis=None):
    """psi_KL(p) = sum p (log p - 1), summed over `axis` (all by default)."""
    p = _check_finite(p, "p")
    if np.any(p < 0):
        raise DomainViolation("psi_KL is defined on nonnegative vectors")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - 1.0), 0.0)
    return terms.sum(axis=axis)


def kl_grad(p):
    """log p elementwise; -inf on zero entries."""
    p = _check_finite(p, "p")
    if np.any(p < 0):
        raise DomainViolation("psi_KL gradient needs nonnegative input")
    with np.errstate(divide="ignore"):
        return np.log(p)


def kl_conj_value(q, axis=None):
    q = _check_finite(q, "q")
    if q.size and q.max() > EXP_MAX:
        raise Overflow(f"exp argument {q.max():.6g} exceeds {EXP_MAX}")
    return np.exp(q).sum(axis=axis)


def kl_conj_grad(q):
    q = _check_finite(q, "q")
    if q.size and q.max() > EXP_MAX:
        raise Overflow(f"exp argument {q.max():.6g} exceeds {EXP_MAX}")
    return np.exp(q)


def l2_value(p, axis=None):
    p = _check_finite(p, "p")
    return 0.5 * np.square(p).sum(axis=axis)


def l2_grad(p):
    return _check_finite(p, "p").copy()


def l2_conj_value(q, axis=None):
    q = _check_finite(q, "q")
    return 0.5 * np.square(np.maximum(q, 0.0)).sum(axis=axis)


def l2_conj_grad(q):
    return np.maximum(_check_finite(q, "q"), 0.0)


def ref_value(kind, xi, m):
    """psi(e_xi) for the reference vector of dimension m."""
    if not np.isfinite(xi):
        raise NonFiniteInput("perplexity must be finite")
    if not 1 <= xi <= m:
        raise InvalidPerplexity(f"perplexity {xi!r} outside [1, {m}]")
    if kind == KL:
        return -(np.log(xi) + 1.0)
    if kind == L2:
        return 1.0 / (2.0 * xi)
    raise ValueError(f"unknown regulariser {kind!r}")


@dataclass(frozen=True)
class ReferenceLevel:
    kind: str
    xi: float
    dimension: int
    value: float

    @classmethod
    def of(cls, kind, xi, m) -> "ReferenceLevel":
        return cls(kind, float(xi), int(m), float(ref_value(kind, xi, m)))


def bregman_divergence(kind, P, Q):
    """D_psi(P, Q) = psi(P) - psi(Q) - <P - Q, grad psi(Q)>, summed.

    The kl case uses the mass-unnormalised form
    sum P log(P/Q) - sum P + sum Q, a genuine divergence for arbitrary
    nonnegative matrices (Dykstra iterates are not couplings).
    """
    P = _check_finite(P, "P")
    Q = _check_finite(Q, "Q")
    if P.shape != Q.shape:
        raise DimensionMismatch(f"shape mismatch {P.shape} vs {Q.shape}")
    if kind == L2:
        return 0.5 * np.square(P - Q).sum()
    if kind != KL:
        raise ValueError(f"unknown regulariser {kind!r}")
    if np.any(P < 0) or np.any(Q < 0):
        raise DomainViolation("kl divergence needs nonnegative inputs")
    if np.any((P > 0) & (Q == 0)):
        raise DomainViolation("P > 0 where Q = 0")
    pos = P > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(pos, np.log(np.where(pos, P, 1.0) / np.where(pos, Q, 1.0)), 0.0)
    return float((P * logs).sum() - P.sum() + Q.sum())


@dataclass(frozen=True)
class Regulariser:
    """Dispatch wrapper bundling the psi operations for one kind."""

    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regulariser {self.kind!r}")

    def value(self, p, axis=None):
        return kl_value(p, axis) if self.kind == KL else l2_value(p, axis)

    def grad(self, p):
        return kl_grad(p) if self.kind == KL else l2_grad(p)

    def conj_value(self, q, axis=None):
        return kl_conj_value(q, axis) if self.kind == KL else l2_conj_value(q, axis)

    def conj_grad(self, q):
        return kl_conj_grad(q) if self.kind == KL else l2_conj_grad(q)

    def ref_value(self, xi, m):
        return ref_value(self.kind, xi, m)


KL_REG = Regulariser(KL)
L2_REG = Regulariser(L2)
