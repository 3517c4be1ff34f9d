"""Hot numeric kernels: numba loop versions with pure-numpy fallbacks.

Every public name at the bottom of this module dispatches on the active
backend (see _backend). The two paths implement identical bracket,
stopping, and pivot rules, so kernels built from exact arithmetic
(simplex projection, transportation simplex) match bit-for-bit. Kernels
that evaluate exp/log cannot: the compiled scalar libm and numpy's
vectorised routines round differently in the last ulp, so those agree
to rounding only. The benchmark under benchmarks/ times both paths.

Root-finder status codes (shared by the KL root kernels):
  0  constraint inactive, multiplier 0
  1  root bracketed and found to tolerance
  2  multiplier capped at gamma_max with residual still short (ActiveAtCap)
  3  bracket expansion exhausted without straddling (infeasible target)
  4  overflow in a psi evaluation
  5  bisection iteration cap hit before tolerance
"""

import numpy as np

from ._backend import HAS_NUMBA, njit

#: bracket expansion cap for all scalar multiplier searches
GAMMA_CAP = 1e6
#: residual tolerance of the scalar root problems
ROOT_TOL = 1e-10
ROOT_MAX_BISECT = 200

STATUS_INACTIVE = 0
STATUS_OK = 1
STATUS_CAPPED = 2
STATUS_BRACKET_FAIL = 3
STATUS_OVERFLOW = 4
STATUS_NO_CONVERGE = 5

_EXP_GUARD = 700.0


# ---------------------------------------------------------------------------
# scalar row evaluations (compiled helpers)


def _entropy_var_tempered(y, t):
    """Shannon entropy of p = softmax(t*y) plus Var_p(y).

    The variance feeds the Newton step: dH/dgamma = Var * t^3 with
    t = 1/(1+gamma). y may hold -inf (empty support cell).
    """
    m = y.shape[0]
    zmax = t * y[0]
    for j in range(1, m):
        z = t * y[j]
        if z > zmax:
            zmax = z
    s = 0.0
    sy = 0.0
    syy = 0.0
    for j in range(m):
        d = t * y[j] - zmax
        if d > -745.0:
            e = np.exp(d)
            s += e
            sy += y[j] * e
            syy += y[j] * y[j] * e
    mean = sy / s
    var = syy / s - mean * mean
    if var < 0.0:
        var = 0.0
    return np.log(s) + zmax - t * mean, var


def _psi_var_tempered(y, t):
    """psi_KL of the unnormalised row exp(t*y) plus sum y^2 exp(t*y).

    The second moment feeds the Newton step: dpsi/dbeta = -t^3 * s2 with
    t = 1/(1+beta). Returns (nan, nan) on overflow.
    """
    m = y.shape[0]
    total = 0.0
    s2 = 0.0
    for j in range(m):
        z = t * y[j]
        if z > _EXP_GUARD:
            return np.nan, np.nan
        if z > -745.0:
            e = np.exp(z)
            total += e * (z - 1.0)
            s2 += y[j] * y[j] * e
    return total, s2


_entropy_var_tempered_nb = njit(_entropy_var_tempered)
_psi_var_tempered_nb = njit(_psi_var_tempered)


# ---------------------------------------------------------------------------
# KL entropy roots, joint marginal+entropy flavour
# find gamma >= 0 with H(softmax(y/(1+gamma))) = target (H nondecreasing);
# safeguarded Newton inside a maintained bracket, bisection fallback


def _kl_entropy_roots_loops(Y, targets, cap, tol, max_bisect):
    n = Y.shape[0]
    gamma = np.zeros(n)
    resid = np.zeros(n)
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        y = Y[i]
        target = targets[i]
        h0, _ = _entropy_var_tempered_nb(y, 1.0)
        if h0 >= target:
            continue
        lo = 0.0
        hi = 1.0
        h_hi, var_hi = _entropy_var_tempered_nb(y, 1.0 / (1.0 + hi))
        while h_hi < target and hi < cap:
            lo = hi
            hi = hi * 2.0
            if hi > cap:
                hi = cap
            h_hi, var_hi = _entropy_var_tempered_nb(y, 1.0 / (1.0 + hi))
        if h_hi < target:
            gamma[i] = cap
            resid[i] = h_hi - target
            status[i] = STATUS_CAPPED
            continue
        g = hi
        r = h_hi - target
        var_g = var_hi
        it = 0
        while abs(r) > tol and it < max_bisect:
            it += 1
            if r > 0.0:
                hi = g
            else:
                lo = g
            tcur = 1.0 / (1.0 + g)
            deriv = var_g * tcur * tcur * tcur
            cand = 0.5 * (lo + hi)
            if deriv > 0.0:
                step = g - r / deriv
                if step > lo and step < hi:
                    cand = step
            g = cand
            h_g, var_g = _entropy_var_tempered_nb(y, 1.0 / (1.0 + g))
            r = h_g - target
        gamma[i] = g
        resid[i] = r
        iters[i] = it
        status[i] = STATUS_OK if abs(r) <= tol else STATUS_NO_CONVERGE
    return gamma, resid, iters, status


def _entropy_var_batch(Y, t):
    Z = Y * t[:, None]
    zmax = Z.max(axis=1)
    D = Z - zmax[:, None]
    E = np.exp(np.maximum(D, -745.0)) * (D > -745.0)
    s = E.sum(axis=1)
    Ysafe = np.where(E > 0.0, Y, 0.0)
    sy = (Ysafe * E).sum(axis=1)
    syy = (Ysafe * Ysafe * E).sum(axis=1)
    mean = sy / s
    var = np.maximum(syy / s - mean * mean, 0.0)
    return np.log(s) + zmax - t * mean, var


def _kl_entropy_roots_numpy(Y, targets, cap, tol, max_bisect):
    n = Y.shape[0]
    gamma = np.zeros(n)
    resid = np.zeros(n)
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    h0, _ = _entropy_var_batch(Y, np.ones(n))
    active = h0 < targets
    if not active.any():
        return gamma, resid, iters, status
    lo = np.zeros(n)
    hi = np.ones(n)
    h_hi, var_hi = _entropy_var_batch(Y, 1.0 / (1.0 + hi))
    h_hi = np.where(active, h_hi, 0.0)
    need = active & (h_hi < targets) & (hi < cap)
    while need.any():
        lo[need] = hi[need]
        hi[need] = np.minimum(hi[need] * 2.0, cap)
        h_hi[need], var_hi[need] = _entropy_var_batch(Y[need], 1.0 / (1.0 + hi[need]))
        need = active & (h_hi < targets) & (hi < cap)
    capped = active & (h_hi < targets)
    gamma[capped] = cap
    resid[capped] = (h_hi - targets)[capped]
    status[capped] = STATUS_CAPPED
    work = active & ~capped
    g = np.where(work, hi, 0.0)
    r = np.where(work, h_hi - targets, 0.0)
    var_g = var_hi.copy()
    open_rows = work & (np.abs(r) > tol)
    it = 0
    while open_rows.any() and it < max_bisect:
        it += 1
        above = open_rows & (r > 0.0)
        hi[above] = g[above]
        lo[open_rows & ~above] = g[open_rows & ~above]
        tcur = 1.0 / (1.0 + g)
        deriv = var_g * tcur * tcur * tcur
        cand = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g - r / deriv
        newton_ok = open_rows & (deriv > 0.0) & (step > lo) & (step < hi)
        cand = np.where(newton_ok, step, cand)
        g[open_rows] = cand[open_rows]
        h_g = np.empty(n)
        h_g[open_rows], var_g[open_rows] = _entropy_var_batch(
            Y[open_rows], 1.0 / (1.0 + g[open_rows])
        )
        r[open_rows] = h_g[open_rows] - targets[open_rows]
        iters[open_rows] = it
        open_rows = open_rows & (np.abs(r) > tol)
    gamma[work] = g[work]
    resid[work] = r[work]
    status[work] = np.where(np.abs(r[work]) <= tol, STATUS_OK, STATUS_NO_CONVERGE)
    return gamma, resid, iters, status


# ---------------------------------------------------------------------------
# KL entropy-ball roots (no marginal): psi_KL(exp(y/(1+beta))) = c,
# psi nonincreasing in beta; safeguarded Newton, bisection fallback


def _kl_ball_roots_loops(Y, c_targets, cap, tol, max_bisect):
    n = Y.shape[0]
    beta = np.zeros(n)
    resid = np.zeros(n)
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        y = Y[i]
        c = c_targets[i]
        p0, _ = _psi_var_tempered_nb(y, 1.0)
        if np.isnan(p0):
            status[i] = STATUS_OVERFLOW
            continue
        if p0 <= c:
            continue
        lo = 0.0
        hi = 1.0
        p_hi, s2_hi = _psi_var_tempered_nb(y, 1.0 / (1.0 + hi))
        bad = False
        while p_hi > c and hi < cap:
            lo = hi
            hi = hi * 2.0
            if hi > cap:
                hi = cap
            p_hi, s2_hi = _psi_var_tempered_nb(y, 1.0 / (1.0 + hi))
            if np.isnan(p_hi):
                bad = True
                break
        if bad:
            status[i] = STATUS_OVERFLOW
            continue
        if p_hi > c:
            beta[i] = cap
            resid[i] = p_hi - c
            status[i] = STATUS_CAPPED
            continue
        g = hi
        r = p_hi - c
        s2_g = s2_hi
        it = 0
        while abs(r) > tol and it < max_bisect:
            it += 1
            if r > 0.0:
                lo = g
            else:
                hi = g
            tcur = 1.0 / (1.0 + g)
            deriv = -s2_g * tcur * tcur * tcur
            cand = 0.5 * (lo + hi)
            if deriv < 0.0:
                step = g - r / deriv
                if step > lo and step < hi:
                    cand = step
            g = cand
            p_g, s2_g = _psi_var_tempered_nb(y, 1.0 / (1.0 + g))
            r = p_g - c
        beta[i] = g
        resid[i] = r
        iters[i] = it
        status[i] = STATUS_OK if abs(r) <= tol else STATUS_NO_CONVERGE
    return beta, resid, iters, status


def _psi_var_batch(Y, t):
    Z = Y * t[:, None]
    E = np.exp(np.minimum(np.maximum(Z, -745.0), _EXP_GUARD)) * (Z > -745.0)
    vals = (np.where(E > 0.0, Z - 1.0, 0.0) * E).sum(axis=1)
    Ysafe = np.where(E > 0.0, Y, 0.0)
    s2 = (Ysafe * Ysafe * E).sum(axis=1)
    over = Z.max(axis=1) > _EXP_GUARD
    return np.where(over, np.nan, vals), np.where(over, np.nan, s2)


def _kl_ball_roots_numpy(Y, c_targets, cap, tol, max_bisect):
    n = Y.shape[0]
    beta = np.zeros(n)
    resid = np.zeros(n)
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    p0, _ = _psi_var_batch(Y, np.ones(n))
    over = np.isnan(p0)
    status[over] = STATUS_OVERFLOW
    active = ~over & (p0 > c_targets)
    if not active.any():
        return beta, resid, iters, status
    lo = np.zeros(n)
    hi = np.ones(n)
    p_hi, s2_hi = _psi_var_batch(Y, 1.0 / (1.0 + hi))
    p_hi = np.where(active, p_hi, 0.0)
    need = active & (p_hi > c_targets) & (hi < cap)
    while need.any():
        lo[need] = hi[need]
        hi[need] = np.minimum(hi[need] * 2.0, cap)
        p_hi[need], s2_hi[need] = _psi_var_batch(Y[need], 1.0 / (1.0 + hi[need]))
        bad = need & np.isnan(p_hi)
        if bad.any():
            status[bad] = STATUS_OVERFLOW
            active = active & ~bad
        need = active & (p_hi > c_targets) & (hi < cap)
    capped = active & (p_hi > c_targets)
    beta[capped] = cap
    resid[capped] = (p_hi - c_targets)[capped]
    status[capped] = STATUS_CAPPED
    work = active & ~capped
    g = np.where(work, hi, 0.0)
    r = np.where(work, p_hi - c_targets, 0.0)
    s2_g = s2_hi.copy()
    open_rows = work & (np.abs(r) > tol)
    it = 0
    while open_rows.any() and it < max_bisect:
        it += 1
        above = open_rows & (r > 0.0)
        lo[above] = g[above]
        hi[open_rows & ~above] = g[open_rows & ~above]
        tcur = 1.0 / (1.0 + g)
        deriv = -s2_g * tcur * tcur * tcur
        cand = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g - r / deriv
        newton_ok = open_rows & (deriv < 0.0) & (step > lo) & (step < hi)
        cand = np.where(newton_ok, step, cand)
        g[open_rows] = cand[open_rows]
        p_g = np.empty(n)
        p_g[open_rows], s2_g[open_rows] = _psi_var_batch(
            Y[open_rows], 1.0 / (1.0 + g[open_rows])
        )
        r[open_rows] = p_g[open_rows] - c_targets[open_rows]
        iters[open_rows] = it
        open_rows = open_rows & (np.abs(r) > tol)
    beta[work] = g[work]
    resid[work] = r[work]
    status[work] = np.where(np.abs(r[work]) <= tol, STATUS_OK, STATUS_NO_CONVERGE)
    return beta, resid, iters, status


# ---------------------------------------------------------------------------
# log-domain Sinkhorn sweep


def _sinkhorn_log_loops(M, loga, logb, u, v, max_iter, tol):
    """In-place updates of scaled potentials u, v for plan exp(u + M + v).

    M = -C/eps. Returns (iterations, residual). Column sums are exact
    after the v update, so the reported residual is the row-marginal gap.
    """
    n, m = M.shape
    res = np.inf
    it = 0
    while it < max_iter:
        it += 1
        for i in range(n):
            zmax = M[i, 0] + v[0]
            for j in range(1, m):
                z = M[i, j] + v[j]
                if z > zmax:
                    zmax = z
            s = 0.0
            for j in range(m):
                s += np.exp(M[i, j] + v[j] - zmax)
            u[i] = loga[i] - zmax - np.log(s)
        for j in range(m):
            zmax = M[0, j] + u[0]
            for i in range(1, n):
                z = M[i, j] + u[i]
                if z > zmax:
                    zmax = z
            s = 0.0
            for i in range(n):
                s += np.exp(M[i, j] + u[i] - zmax)
            v[j] = logb[j] - zmax - np.log(s)
        res = 0.0
        for i in range(n):
            rowsum = 0.0
            for j in range(m):
                rowsum += np.exp(u[i] + M[i, j] + v[j])
            gap = abs(rowsum - np.exp(loga[i]))
            if gap > res:
                res = gap
        if res <= tol:
            break
    return it, res


def _sinkhorn_log_numpy(M, loga, logb, u, v, max_iter, tol):
    a = np.exp(loga)
    res = np.inf
    it = 0
    while it < max_iter:
        it += 1
        Z = M + v[None, :]
        zmax = Z.max(axis=1)
        u[:] = loga - zmax - np.log(np.exp(Z - zmax[:, None]).sum(axis=1))
        Z = M + u[:, None]
        zmax = Z.max(axis=0)
        v[:] = logb - zmax - np.log(np.exp(Z - zmax[None, :]).sum(axis=0))
        rowsum = np.exp(u[:, None] + M + v[None, :]).sum(axis=1)
        res = np.abs(rowsum - a).max()
        if res <= tol:
            break
    return it, res


# ---------------------------------------------------------------------------
# Euclidean projection of rows onto scaled simplices (sort and threshold)


def _simplex_rows_loops(K, targets):
    n, m = K.shape
    out = np.empty_like(K)
    lam = np.empty(n)
    for i in range(n):
        srt = np.sort(K[i])[::-1]
        cum = 0.0
        rho = 0
        lam_i = 0.0
        for r in range(1, m + 1):
            cum += srt[r - 1]
            cand = (targets[i] - cum) / r
            if srt[r - 1] + cand > 0.0:
                rho = r
                lam_i = cand
        lam[i] = lam_i
        for j in range(m):
            val = K[i, j] + lam_i
            out[i, j] = val if val > 0.0 else 0.0
    return out, lam


def _simplex_rows_numpy(K, targets):
    n, m = K.shape
    srt = -np.sort(-K, axis=1)
    cum = np.cumsum(srt, axis=1)
    r = np.arange(1, m + 1)
    cand = (targets[:, None] - cum) / r
    mask = srt + cand > 0.0
    rho = mask.sum(axis=1)
    lam = cand[np.arange(n), rho - 1]
    out = np.maximum(K + lam[:, None], 0.0)
    return out, lam


# ---------------------------------------------------------------------------
# transportation simplex (exact solver)

_TS_OPTIMAL = 0
_TS_PIVOT_LIMIT = 1


def _tree_rebuild(m, n, arc_i, arc_j, parent, parent_arc, depth, order):
    N = m + n
    nb = N - 1
    deg = np.zeros(N, dtype=np.int64)
    for s in range(nb):
        deg[arc_i[s]] += 1
        deg[m + arc_j[s]] += 1
    off = np.zeros(N + 1, dtype=np.int64)
    for t in range(N):
        off[t + 1] = off[t] + deg[t]
    adj_arc = np.empty(2 * nb, dtype=np.int64)
    adj_to = np.empty(2 * nb, dtype=np.int64)
    fill = off[:N].copy()
    for s in range(nb):
        x = arc_i[s]
        y = m + arc_j[s]
        adj_arc[fill[x]] = s
        adj_to[fill[x]] = y
        fill[x] += 1
        adj_arc[fill[y]] = s
        adj_to[fill[y]] = x
        fill[y] += 1
    visited = np.zeros(N, dtype=np.int64)
    order[0] = 0
    visited[0] = 1
    parent[0] = -1
    parent_arc[0] = -1
    depth[0] = 0
    head = 0
    tail = 1
    while head < tail:
        x = order[head]
        head += 1
        for idx in range(off[x], off[x + 1]):
            y = adj_to[idx]
            if visited[y] == 0:
                visited[y] = 1
                parent[y] = x
                parent_arc[y] = adj_arc[idx]
                depth[y] = depth[x] + 1
                order[tail] = y
                tail += 1
    return tail


def _potentials(C, m, n, arc_i, arc_j, parent, parent_arc, order, upot, vpot):
    N = m + n
    upot[0] = 0.0
    for idx in range(N):
        x = order[idx]
        if parent[x] == -1:
            continue
        s = parent_arc[x]
        i0 = arc_i[s]
        j0 = arc_j[s]
        if x < m:
            upot[x] = C[i0, j0] - vpot[j0]
        else:
            vpot[x - m] = C[i0, j0] - upot[i0]


def _transport_simplex_loops(C, a, b, max_pivots, piv_tol, bland_after):
    m, n = C.shape
    N = m + n
    nb = N - 1
    arc_i = np.empty(nb, dtype=np.int64)
    arc_j = np.empty(nb, dtype=np.int64)
    arc_flow = np.zeros(nb)
    arem = a.copy()
    brem = b.copy()
    i = 0
    j = 0
    for slot in range(nb):
        t = arem[i] if arem[i] < brem[j] else brem[j]
        arc_i[slot] = i
        arc_j[slot] = j
        arc_flow[slot] = t
        arem[i] -= t
        brem[j] -= t
        if i == m - 1 and j == n - 1:
            break
        if arem[i] == 0.0 and i < m - 1:
            i += 1
        else:
            j += 1
    parent = np.empty(N, dtype=np.int64)
    parent_arc = np.empty(N, dtype=np.int64)
    depth = np.empty(N, dtype=np.int64)
    order = np.empty(N, dtype=np.int64)
    upot = np.zeros(m)
    vpot = np.zeros(n)
    path_x = np.empty(N, dtype=np.int64)
    path_y = np.empty(N, dtype=np.int64)
    _tree_rebuild(m, n, arc_i, arc_j, parent, parent_arc, depth, order)
    pivots = 0
    degen_run = 0
    status = _TS_OPTIMAL
    while True:
        _potentials(C, m, n, arc_i, arc_j, parent, parent_arc, order, upot, vpot)
        ei = -1
        ej = -1
        if degen_run < bland_after:
            best = -piv_tol
            for ii in range(m):
                for jj in range(n):
                    rc = C[ii, jj] - upot[ii] - vpot[jj]
                    if rc < best:
                        best = rc
                        ei = ii
                        ej = jj
        else:
            done = False
            for ii in range(m):
                if done:
                    break
                for jj in range(n):
                    if C[ii, jj] - upot[ii] - vpot[jj] < -piv_tol:
                        ei = ii
                        ej = jj
                        done = True
                        break
        if ei < 0:
            break
        if pivots >= max_pivots:
            status = _TS_PIVOT_LIMIT
            break
        pivots += 1
        x = ei
        y = m + ej
        nx = 0
        ny = 0
        while depth[x] > depth[y]:
            path_x[nx] = parent_arc[x]
            x = parent[x]
            nx += 1
        while depth[y] > depth[x]:
            path_y[ny] = parent_arc[y]
            y = parent[y]
            ny += 1
        while x != y:
            path_x[nx] = parent_arc[x]
            x = parent[x]
            nx += 1
            path_y[ny] = parent_arc[y]
            y = parent[y]
            ny += 1
        theta = np.inf
        leave = -1
        for k in range(0, nx, 2):
            s = path_x[k]
            if arc_flow[s] < theta or (arc_flow[s] == theta and s < leave):
                theta = arc_flow[s]
                leave = s
        for k in range(0, ny, 2):
            s = path_y[k]
            if arc_flow[s] < theta or (arc_flow[s] == theta and s < leave):
                theta = arc_flow[s]
                leave = s
        for k in range(nx):
            s = path_x[k]
            if k % 2 == 0:
                arc_flow[s] -= theta
            else:
                arc_flow[s] += theta
        for k in range(ny):
            s = path_y[k]
            if k % 2 == 0:
                arc_flow[s] -= theta
            else:
                arc_flow[s] += theta
        arc_i[leave] = ei
        arc_j[leave] = ej
        arc_flow[leave] = theta
        if theta == 0.0:
            degen_run += 1
        else:
            degen_run = 0
        _tree_rebuild(m, n, arc_i, arc_j, parent, parent_arc, depth, order)
    plan = np.zeros((m, n))
    for s in range(nb):
        plan[arc_i[s], arc_j[s]] = arc_flow[s]
    return plan, upot, vpot, pivots, status


def _transport_simplex_numpy(C, a, b, max_pivots, piv_tol, bland_after):
    """Same pivot rules as the compiled version; entering scan vectorised."""
    m, n = C.shape
    N = m + n
    nb = N - 1
    arc_i = np.empty(nb, dtype=np.int64)
    arc_j = np.empty(nb, dtype=np.int64)
    arc_flow = np.zeros(nb)
    arem = a.copy()
    brem = b.copy()
    i = 0
    j = 0
    for slot in range(nb):
        t = min(arem[i], brem[j])
        arc_i[slot] = i
        arc_j[slot] = j
        arc_flow[slot] = t
        arem[i] -= t
        brem[j] -= t
        if i == m - 1 and j == n - 1:
            break
        if arem[i] == 0.0 and i < m - 1:
            i += 1
        else:
            j += 1
    parent = np.empty(N, dtype=np.int64)
    parent_arc = np.empty(N, dtype=np.int64)
    depth = np.empty(N, dtype=np.int64)
    order = np.empty(N, dtype=np.int64)
    upot = np.zeros(m)
    vpot = np.zeros(n)
    _tree_rebuild(m, n, arc_i, arc_j, parent, parent_arc, depth, order)
    pivots = 0
    degen_run = 0
    status = _TS_OPTIMAL
    while True:
        _potentials(C, m, n, arc_i, arc_j, parent, parent_arc, order, upot, vpot)
        rc = C - upot[:, None] - vpot[None, :]
        if degen_run < bland_after:
            flat = int(np.argmin(rc))
            if rc.flat[flat] >= -piv_tol:
                break
        else:
            negs = np.flatnonzero(rc.ravel() < -piv_tol)
            if negs.size == 0:
                break
            flat = int(negs[0])
        if pivots >= max_pivots:
            status = _TS_PIVOT_LIMIT
            break
        pivots += 1
        ei, ej = divmod(flat, n)
        x = ei
        y = m + ej
        px = []
        py = []
        while depth[x] > depth[y]:
            px.append(parent_arc[x])
            x = parent[x]
        while depth[y] > depth[x]:
            py.append(parent_arc[y])
            y = parent[y]
        while x != y:
            px.append(parent_arc[x])
            x = parent[x]
            py.append(parent_arc[y])
            y = parent[y]
        theta = np.inf
        leave = -1
        for k in range(0, len(px), 2):
            s = px[k]
            if arc_flow[s] < theta or (arc_flow[s] == theta and s < leave):
                theta = arc_flow[s]
                leave = s
        for k in range(0, len(py), 2):
            s = py[k]
            if arc_flow[s] < theta or (arc_flow[s] == theta and s < leave):
                theta = arc_flow[s]
                leave = s
        for k, s in enumerate(px):
            arc_flow[s] += theta if k % 2 else -theta
        for k, s in enumerate(py):
            arc_flow[s] += theta if k % 2 else -theta
        arc_i[leave] = ei
        arc_j[leave] = ej
        arc_flow[leave] = theta
        degen_run = degen_run + 1 if theta == 0.0 else 0
        _tree_rebuild(m, n, arc_i, arc_j, parent, parent_arc, depth, order)
    plan = np.zeros((m, n))
    for s in range(nb):
        plan[arc_i[s], arc_j[s]] = arc_flow[s]
    return plan, upot, vpot, pivots, status


# ---------------------------------------------------------------------------
# backend dispatch

_kl_entropy_roots_nb = njit(_kl_entropy_roots_loops)
_kl_ball_roots_nb = njit(_kl_ball_roots_loops)
_sinkhorn_log_nb = njit(_sinkhorn_log_loops)
_simplex_rows_nb = njit(_simplex_rows_loops)
# the compiled transport simplex resolves these two globals at first call,
# so they must point at compiled versions by then
_tree_rebuild = njit(_tree_rebuild)
_potentials = njit(_potentials)
_transport_simplex_nb = njit(_transport_simplex_loops)

if HAS_NUMBA:
    kl_entropy_roots = _kl_entropy_roots_nb
    kl_ball_roots = _kl_ball_roots_nb
    sinkhorn_log = _sinkhorn_log_nb
    simplex_rows = _simplex_rows_nb
    transport_simplex = _transport_simplex_nb
else:
    kl_entropy_roots = _kl_entropy_roots_numpy
    kl_ball_roots = _kl_ball_roots_numpy
    sinkhorn_log = _sinkhorn_log_numpy
    simplex_rows = _simplex_rows_numpy
    transport_simplex = _transport_simplex_numpy


def warmup():
    """Trigger jit compilation of every kernel on tiny inputs."""
    Y = np.log(np.array([[0.7, 0.3], [0.2, 0.8]]))
    kl_entropy_roots(Y, np.array([0.5, 0.5]), GAMMA_CAP, ROOT_TOL, ROOT_MAX_BISECT)
    kl_ball_roots(Y, np.array([-1.5, -1.5]), GAMMA_CAP, ROOT_TOL, ROOT_MAX_BISECT)
    M = np.array([[0.0, -1.0], [-1.0, 0.0]])
    u = np.zeros(2)
    v = np.zeros(2)
    sinkhorn_log(M, np.log(np.full(2, 0.5)), np.log(np.full(2, 0.5)), u, v, 50, 1e-9)
    simplex_rows(np.array([[0.4, -0.2], [0.1, 0.3]]), np.array([0.5, 0.5]))
    transport_simplex(
        np.array([[0.0, 1.0], [1.0, 0.0]]),
        np.full(2, 0.5),
        np.full(2, 0.5),
        100,
        1e-11,
        200,
    )
