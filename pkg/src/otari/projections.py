"""Bregman projections onto marginal polytopes and pointwise psi-balls.

KL projections run in the log domain: a matrix is carried as L = log K so
tempering K^(1/(1+gamma)) is the scalar multiply L/(1+gamma) and tiny
kernel entries never underflow. Public functions accept and return
probability-domain matrices; the _log variants are the forms the iterative
solvers compose.

All projections decouple across rows, so processing any row subset in any
order gives identical output.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import CONDITIONAL, KL, NORMALISATIONS, RAW, Measure
from .errors import (
    DomainViolation,
    InvalidPerplexity,
    NonFiniteInput,
    Overflow,
    RootBracketFailure,
    ZeroRow,
)
from .regularizers import ref_value


@dataclass(frozen=True)
class RowRootResult:
    """Outcome of one scalar multiplier search.

    multiplier is the nonnegative dual variable of the row's constraint;
    residual is the remaining constraint-equation gap (0 when the
    constraint was inactive); capped marks a root pushed to the bracket
    cap, where the constraint is active but only attainable in the limit.
    """

    multiplier: float
    residual: float
    iterations: int
    capped: bool = False


def _weights(a, n, name="a"):
    w = a.weights if isinstance(a, Measure) else np.asarray(a, dtype=float)
    if w.ndim != 1 or w.shape[0] != n:
        raise DomainViolation(f"{name} must have one weight per row, got {w.shape}")
    if not np.isfinite(w).all() or (w <= 0).any():
        raise NonFiniteInput(f"{name} must be strictly positive and finite")
    return w


def _log_matrix(K, name="K"):
    K = np.ascontiguousarray(K, dtype=float)
    if K.ndim != 2:
        raise DomainViolation(f"{name} must be a matrix, got ndim={K.ndim}")
    if np.isnan(K).any():
        raise NonFiniteInput(f"{name} contains nan")
    if (K < 0).any():
        raise DomainViolation(f"{name} must be nonnegative for KL projections")
    with np.errstate(divide="ignore"):
        return np.log(K)


def _check_xi(xi, m):
    xi = float(xi)
    if not np.isfinite(xi):
        raise NonFiniteInput("xi must be finite")
    if xi < 1.0 or xi > m:
        raise InvalidPerplexity(f"xi must lie in [1, {m}], got {xi}")
    return xi


def _check_mode(mode):
    if mode not in NORMALISATIONS:
        raise ValueError(f"unknown normalisation mode {mode!r}")
    return mode


def _lse_rows(L):
    zmax = L.max(axis=1)
    if not np.isfinite(zmax).all():
        raise ZeroRow("a row has no support")
    s = np.exp(L - zmax[:, None]).sum(axis=1)
    return zmax + np.log(s)


# ---------------------------------------------------------------------------
# KL


def proj_kl_row_marginal(K, a):
    """KL projection onto the semi-relaxed polytope {P >= 0, P1 = a}.

    Closed form: scale row i by a_i over its current sum.
    """
    K = np.ascontiguousarray(K, dtype=float)
    a = _weights(a, K.shape[0])
    rowsum = K.sum(axis=1)
    if not np.isfinite(rowsum).all() or (rowsum <= 0).any():
        raise ZeroRow("every row of K needs positive mass")
    return K * (a / rowsum)[:, None]


def _proj_kl_row_marginal_log(L, loga):
    return L + (loga - _lse_rows(L))[:, None]


def _shannon_targets(a, xi, mode, n, m):
    if mode == CONDITIONAL:
        return np.full(n, np.log(xi))
    # raw mode: psi_KL(row) = -(log xi + 1) at row mass a_i pins the
    # normalised row's entropy at this level, which can exceed log m
    return (np.log(xi) + 1.0) / a + np.log(a) - 1.0


def proj_kl_marginal_and_entropy(K, a, xi, mode=CONDITIONAL):
    """KL projection onto {P1 = a} intersected with the pointwise entropy set.

    Returns (P, gamma): row i of P is a_i times the tempered softmax of
    log K_i, and gamma_i >= 0 is the row's multiplier, zero when the
    marginal-only projection already meets the entropy bound.
    """
    L = _log_matrix(K)
    a = _weights(a, L.shape[0])
    Lout, gamma = _proj_kl_marginal_and_entropy_log(L, a, xi, mode)
    return np.exp(Lout), gamma


def _proj_kl_marginal_and_entropy_log(L, a, xi, mode=CONDITIONAL):
    n, m = L.shape
    xi = _check_xi(xi, m)
    _check_mode(mode)
    _lse_rows(L)  # ZeroRow guard
    targets = _shannon_targets(a, xi, mode, n, m)
    infeasible = targets > np.log(m) + 1e-9
    if infeasible.any():
        i = int(np.argmax(infeasible))
        raise RootBracketFailure(
            f"row {i}: entropy target {targets[i]:.6f} exceeds log m = "
            f"{np.log(m):.6f}; no feasible row exists at mass {a[i]:.3e}"
        )
    gamma, _, _, status = _kernels.kl_entropy_roots(
        L, targets, _kernels.GAMMA_CAP, _kernels.ROOT_TOL, _kernels.ROOT_MAX_BISECT
    )
    if (status == _kernels.STATUS_BRACKET_FAIL).any():
        raise RootBracketFailure("entropy root bracket expansion exhausted")
    t = 1.0 / (1.0 + gamma)
    Z = L * t[:, None]
    Lout = np.log(a)[:, None] + Z - _lse_rows(Z)[:, None]
    return Lout, gamma


def proj_kl_entropy_ball(K, xi, mode=CONDITIONAL, a=None):
    """KL projection onto the pointwise entropy ball alone (no marginal).

    Rows are tempered, K_i^(1/(1+gamma_i)), without renormalisation. In
    Conditional mode the ball constrains P_i/a_i, so the row masses a
    must be supplied.
    """
    L = _log_matrix(K)
    Lout, _ = _proj_kl_entropy_ball_log(L, xi, mode, a)
    return np.exp(Lout)


def _proj_kl_entropy_ball_log(L, xi, mode=CONDITIONAL, a=None):
    n, m = L.shape
    xi = _check_xi(xi, m)
    _check_mode(mode)
    level = ref_value(KL, xi, m)
    if mode == RAW:
        Y = L
    else:
        if a is None:
            raise ValueError("conditional mode needs the row masses a")
        a = _weights(a, n)
        Y = L - np.log(a)[:, None]
    beta, _, _, status = _kernels.kl_ball_roots(
        np.ascontiguousarray(Y),
        np.full(n, level),
        _kernels.GAMMA_CAP,
        _kernels.ROOT_TOL,
        _kernels.ROOT_MAX_BISECT,
    )
    if (status == _kernels.STATUS_OVERFLOW).any():
        raise Overflow("psi evaluation overflowed during ball projection")
    if (status == _kernels.STATUS_BRACKET_FAIL).any():
        raise RootBracketFailure("psi ball root bracket expansion exhausted")
    t = 1.0 / (1.0 + beta)
    Lout = Y * t[:, None]
    if mode == CONDITIONAL:
        Lout = Lout + np.log(a)[:, None]
    return Lout, beta


def kl_entropy_root(log_row, target_entropy):
    """Multiplier for one row of the marginal-and-entropy projection."""
    Y = np.ascontiguousarray(log_row, dtype=float).reshape(1, -1)
    g, r, it, status = _kernels.kl_entropy_roots(
        Y,
        np.array([float(target_entropy)]),
        _kernels.GAMMA_CAP,
        _kernels.ROOT_TOL,
        _kernels.ROOT_MAX_BISECT,
    )
    if status[0] == _kernels.STATUS_BRACKET_FAIL:
        raise RootBracketFailure("entropy root bracket expansion exhausted")
    return RowRootResult(
        multiplier=float(g[0]),
        residual=float(r[0]),
        iterations=int(it[0]),
        capped=bool(status[0] == _kernels.STATUS_CAPPED),
    )


def kl_ball_root(log_row, level):
    """Multiplier for one row of the entropy-ball projection."""
    Y = np.ascontiguousarray(log_row, dtype=float).reshape(1, -1)
    g, r, it, status = _kernels.kl_ball_roots(
        Y,
        np.array([float(level)]),
        _kernels.GAMMA_CAP,
        _kernels.ROOT_TOL,
        _kernels.ROOT_MAX_BISECT,
    )
    if status[0] == _kernels.STATUS_OVERFLOW:
        raise Overflow("psi evaluation overflowed")
    if status[0] == _kernels.STATUS_BRACKET_FAIL:
        raise RootBracketFailure("psi ball root bracket expansion exhausted")
    return RowRootResult(
        multiplier=float(g[0]),
        residual=float(r[0]),
        iterations=int(it[0]),
        capped=bool(status[0] == _kernels.STATUS_CAPPED),
    )


# ---------------------------------------------------------------------------
# l2


def proj_l2_row_marginal(K, a):
    """Euclidean projection of each row onto {p >= 0, sum p = a_i}.

    Sort-and-threshold per row; K may hold negative entries (quadratic
    kernels are -C/sigma).
    """
    K = np.ascontiguousarray(K, dtype=float)
    if not np.isfinite(K).all():
        raise NonFiniteInput("K must be finite")
    a = _weights(a, K.shape[0])
    out, _ = _kernels.simplex_rows(K, a)
    return out


def proj_l2_ball(K, xi, a, mode=CONDITIONAL):
    """Euclidean projection of each row onto the l2 ball of psi(e_xi).

    Raw mode bounds ||P_i||^2 by 1/xi; Conditional mode bounds the
    conditional row ||P_i/a_i||^2 instead. Either way the projection is a
    per-row shrink by gamma_i = max(sqrt(xi)||.||, 1).
    """
    K = np.ascontiguousarray(K, dtype=float)
    if not np.isfinite(K).all():
        raise NonFiniteInput("K must be finite")
    n, m = K.shape
    xi = _check_xi(xi, m)
    _check_mode(mode)
    a = _weights(a, n)
    norms = np.sqrt((K * K).sum(axis=1))
    if mode == RAW:
        gamma = np.maximum(np.sqrt(xi) * norms, 1.0)
    else:
        gamma = np.maximum(np.sqrt(xi) * norms / a, 1.0)
    return K / gamma[:, None]
