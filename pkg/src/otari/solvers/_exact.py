"""Unregularised baseline: network-simplex solve of the transport LP."""

import time

import numpy as np

from .. import _kernels
from ..core import Constraint, DualCertificate, ProblemSpec, validate_problem
from ..errors import OtariError, SizeGuard
from ._common import build_report

# beyond this many cells the dense tableau stops being a sensible data
# structure; callers should subsample or switch to a regularised solver
MAX_CELLS = 4_000_000


def solve_exact(C, a, b, *, max_pivots=None):
    """Optimal plan of the linear transport problem.

    Returns a vertex of the polytope (at most N_S + N_T - 1 nonzeros)
    together with the LP dual potentials. Raises SizeGuard when the
    dense tableau would exceed MAX_CELLS cells.
    """
    problem = validate_problem(C, a, b, ProblemSpec(constraint=Constraint.none()))
    started = time.perf_counter()
    m, n = problem.cost.shape
    if m * n > MAX_CELLS:
        raise SizeGuard(
            f"dense exact solve on {m}x{n} = {m * n} cells exceeds {MAX_CELLS}"
        )
    if max_pivots is None:
        max_pivots = max(4000, 50 * (m + n))
    piv_tol = 1e-11 * (1.0 + float(np.abs(problem.cost.values).max()))
    P, u, v, pivots, status = _kernels.transport_simplex(
        problem.cost.values,
        problem.source.weights,
        problem.target.weights,
        max_pivots,
        piv_tol,
        200,
    )
    if status != _kernels._TS_OPTIMAL:
        raise OtariError(f"simplex pivot limit {max_pivots} hit before optimality")
    return build_report(
        P,
        problem,
        iterations=pivots,
        converged=True,
        method="exact",
        started=started,
        certificate=DualCertificate(lam=u, mu=v, epsilon=np.zeros(1)),
    )
