"""Fixed-penalty entropic solver (log-domain Sinkhorn)."""

import time

import numpy as np

from .. import _kernels
from ..core import Constraint, DualCertificate, ProblemSpec, Tolerances, validate_problem
from ..errors import NonFiniteInput
from ._common import build_report

DEFAULT_MAX_ITER = 10_000


def solve_sinkhorn(C, a, b, epsilon, *, tolerances=None, max_iter=DEFAULT_MAX_ITER):
    """Entropically smoothed plan at a single penalty weight epsilon.

    Alternates log-domain scalings until the row marginal gap falls under
    marginal_tol (columns are exact by construction). On iteration
    exhaustion the best iterate is returned with converged=False.
    """
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise NonFiniteInput(f"epsilon must be a positive real, got {epsilon!r}")
    tol = tolerances or Tolerances()
    problem = validate_problem(
        C, a, b, ProblemSpec(constraint=Constraint.fixed_epsilon(float(epsilon)))
    )
    started = time.perf_counter()
    M = -problem.cost.values / epsilon
    loga = np.log(problem.source.weights)
    logb = np.log(problem.target.weights)
    u = np.zeros(len(problem.source))
    v = np.zeros(len(problem.target))
    it, res = _kernels.sinkhorn_log(M, loga, logb, u, v, max_iter, tol.marginal_tol)
    P = np.exp(u[:, None] + M + v[None, :])
    return build_report(
        P,
        problem,
        iterations=it,
        converged=res <= tol.marginal_tol,
        method="sinkhorn",
        started=started,
        certificate=DualCertificate(
            lam=epsilon * u, mu=epsilon * v, epsilon=np.array([float(epsilon)])
        ),
    )
