"""Plan analytics: entropies, perplexities, residuals, sparsity, cost.

Read-only presentation layer. Perplexities use the plain Shannon entropy
of each normalised row, exp(-sum q log q), so they land in [1, m]; the
constraint machinery's shifted psi lives in the solvers, not here.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import TransportPlan
from .errors import DimensionMismatch


def _values(P):
    return P.values if isinstance(P, TransportPlan) else np.asarray(P, dtype=float)


def _shannon_rows(M):
    """Entropy of each row after normalising it to mass one."""
    M = np.asarray(M, dtype=float)
    totals = M.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(totals > 0, M / totals, 0.0)
        T = np.where(Q > 0, Q * np.log(Q), 0.0)
    return -T.sum(axis=1)


def row_entropy(P):
    return _shannon_rows(_values(P))


def row_perplexity(P):
    return np.exp(row_entropy(P))


def col_entropy(P):
    return _shannon_rows(_values(P).T)


def col_perplexity(P):
    return np.exp(col_entropy(P))


def global_entropy(P):
    """Shannon entropy of the whole plan normalised to total mass one."""
    V = _values(P)
    total = V.sum()
    if total <= 0:
        return 0.0
    return float(_shannon_rows(V.reshape(1, -1))[0])


def transport_cost(P, C):
    V = _values(P)
    Cv = C.values if hasattr(C, "values") else np.asarray(C, dtype=float)
    if V.shape != Cv.shape:
        raise DimensionMismatch(f"plan {V.shape} vs cost {Cv.shape}")
    return float((V * Cv).sum())


def marginal_residual(P, a, b) -> Tuple[float, float]:
    V = _values(P)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if V.shape != (a.size, b.size):
        raise DimensionMismatch(f"plan {V.shape} vs marginals ({a.size}, {b.size})")
    return float(np.abs(V.sum(axis=1) - a).max()), float(np.abs(V.sum(axis=0) - b).max())


def sparsity(P, threshold=0.0):
    """Fraction of entries at or below the threshold (exact zeros by default)."""
    V = _values(P)
    return float((V <= threshold).sum()) / V.size


@dataclass
class PlanDiagnostics:
    row_entropy: np.ndarray
    row_perplexity: np.ndarray
    col_entropy: np.ndarray
    col_perplexity: np.ndarray
    global_entropy: float
    cost: float
    marginal_residuals: Tuple[float, float]
    nnz_fraction: float


def analyze(P, C, a=None, b=None) -> PlanDiagnostics:
    """Full diagnostic bundle for one plan.

    Marginals default to the ones attached to a TransportPlan; raw
    arrays must supply a and b explicitly.
    """
    if isinstance(P, TransportPlan):
        a = P.source_marginal.weights if a is None else np.asarray(a, dtype=float)
        b = P.target_marginal.weights if b is None else np.asarray(b, dtype=float)
    elif a is None or b is None:
        raise DimensionMismatch("raw plan arrays need explicit marginals")
    re = row_entropy(P)
    ce = col_entropy(P)
    return PlanDiagnostics(
        row_entropy=re,
        row_perplexity=np.exp(re),
        col_entropy=ce,
        col_perplexity=np.exp(ce),
        global_entropy=global_entropy(P),
        cost=transport_cost(P, C),
        marginal_residuals=marginal_residual(P, a, b),
        nnz_fraction=1.0 - sparsity(P),
    )
