"""Independent reference implementations used to pin expected values.

Everything here is deliberately written with different algorithms than the
package (plain bisection instead of bracketed kernels, scipy solvers, brute
force enumeration) so agreement is meaningful.
"""

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog


def shannon_entropy(q):
    q = np.asarray(q, dtype=float)
    nz = q > 0
    return float(-(q[nz] * np.log(q[nz])).sum())


def psi_kl(p):
    p = np.asarray(p, dtype=float)
    nz = p > 0
    return float((p[nz] * (np.log(p[nz]) - 1.0)).sum())


def tempered_softmax(logk, gamma):
    z = np.asarray(logk, dtype=float) / (1.0 + gamma)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def entropy_root_bisect(logk, target, lo=0.0, hi=None, iters=500):
    """Scalar bisection for H(softmax(logk/(1+g))) = target; assumes a root."""
    if hi is None:
        hi = 1.0
        while shannon_entropy(tempered_softmax(logk, hi)) < target:
            hi *= 2.0
            if hi > 1e9:
                raise AssertionError("oracle bracket blew up")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if shannon_entropy(tempered_softmax(logk, mid)) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


def psi_ball_root_bisect(logk, level, iters=500):
    """Scalar bisection for psi_KL(exp(logk/(1+g))) = level (nonincreasing)."""
    logk = np.asarray(logk, dtype=float)

    def phi(g):
        return psi_kl(np.exp(logk / (1.0 + g)))

    if phi(0.0) <= level:
        return 0.0
    lo, hi = 0.0, 1.0
    while phi(hi) > level:
        hi *= 2.0
        if hi > 1e9:
            raise AssertionError("oracle bracket blew up")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if phi(mid) > level:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


def simplex_project_bisect(k, total, iters=500):
    """Euclidean projection of k onto {p >= 0, sum p = total} by lambda search."""
    k = np.asarray(k, dtype=float)

    def mass(lam):
        return np.maximum(k + lam, 0.0).sum()

    lo = -k.max()
    hi = total / k.size - k.min() + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mass(mid) < total:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return np.maximum(k + lam, 0.0), lam


def lp_transport(C, a, b):
    """Optimal transport cost and a plan via scipy's LP solver."""
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    res = linprog(
        C.ravel(),
        A_eq=A_eq,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
    )
    assert res.status == 0, res.message
    return res.fun, res.x.reshape(m, n)


def assignment_plan(C):
    """Permutation plan from the Hungarian algorithm, uniform marginals."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    rows, cols = linear_sum_assignment(C)
    P = np.zeros_like(C)
    P[rows, cols] = 1.0 / n
    return P


def brute_force_assignment_cost(C):
    """Minimum over all permutations; only for small square C."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(C[i, perm[i]] for i in range(n)) / n
        best = min(best, cost)
    return best


def sinkhorn_scaling(C, a, b, eps, iters=50000, tol=1e-13):
    """Classic probability-domain Sinkhorn, independent of the log-domain path."""
    K = np.exp(-np.asarray(C, dtype=float) / eps)
    u = np.ones(len(a))
    v = np.ones(len(b))
    for _ in range(iters):
        u = a / (K @ v)
        v = b / (K.T @ u)
        P = u[:, None] * K * v[None, :]
        if np.abs(P.sum(1) - a).max() < tol:
            break
    return u[:, None] * K * v[None, :]


def naive_sqdist(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    out = np.zeros((X.shape[0], Y.shape[0]))
    for i in range(X.shape[0]):
        for j in range(Y.shape[0]):
            out[i, j] = ((X[i] - Y[j]) ** 2).sum()
    return out


def naive_knn(train_X, train_y, test_X, k=1):
    """Lowest-index tie breaking, matching a stable argsort on distances."""
    preds = np.empty(test_X.shape[0], dtype=train_y.dtype)
    for i, x in enumerate(test_X):
        d = ((train_X - x) ** 2).sum(axis=1)
        idx = np.argsort(d, kind="stable")[:k]
        votes = train_y[idx]
        vals, counts = np.unique(votes, return_counts=True)
        preds[i] = vals[np.argmax(counts)]
    return preds


def central_diff_grad(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g
