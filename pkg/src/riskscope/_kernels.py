"""Compiled coordinate-descent kernel.

Minimizes  (a/2) b'Qb - c'b + sum_j [ w_j |b_j| + rho_j b_j^2 ]  over lo <= b <= hi
with cyclic, deterministic sweeps. Every coordinate update is an exact 1-D
minimization, so the objective never increases.
"""
import numpy as np
from numba import njit

CONVERGED = 0
MAX_ITER = 1
UNBOUNDED = 2


@njit(cache=True)
def _coord_kkt(gj, bj, wj, rhoj, loj, hij):
    if loj == hij:
        return 0.0
    d = gj + 2.0 * rhoj * bj
    if bj > 0.0:
        L = d + wj
        U = L
    elif bj < 0.0:
        L = d - wj
        U = L
    else:
        L = d - wj
        U = d + wj
    if bj <= loj:
        L = -np.inf
    if bj >= hij:
        U = np.inf
    if L <= 0.0 <= U:
        return 0.0
    if L > 0.0:
        return L
    return -U


@njit(cache=True)
def kkt_inf(g, beta, w, rho, lo, hi):
    r = 0.0
    for j in range(beta.size):
        v = _coord_kkt(g[j], beta[j], w[j], rho[j], lo[j], hi[j])
        if v > r:
            r = v
    return r


@njit(cache=True)
def half_objective(g, c, beta, w, rho):
    val = 0.5 * np.dot(beta, g) - 0.5 * np.dot(beta, c)
    for j in range(beta.size):
        val += w[j] * abs(beta[j]) + rho[j] * beta[j] * beta[j]
    return val


@njit(cache=True)
def _update(j, Q, a, g, beta, w, rho, lo, hi):
    """Exact minimization in coordinate j; returns (|step| * curvature, status)."""
    qjj = Q[j, j]
    A = a * qjj + 2.0 * rho[j]
    B = g[j] - a * qjj * beta[j]
    if A > 0.0:
        if B > w[j]:
            b = -(B - w[j]) / A
        elif B < -w[j]:
            b = -(B + w[j]) / A
        else:
            b = 0.0
    else:
        if B > w[j]:
            if lo[j] == -np.inf:
                return 0.0, UNBOUNDED
            b = lo[j]
        elif B < -w[j]:
            if hi[j] == np.inf:
                return 0.0, UNBOUNDED
            b = hi[j]
        else:
            b = 0.0
    if b < lo[j]:
        b = lo[j]
    elif b > hi[j]:
        b = hi[j]
    delta = b - beta[j]
    if delta != 0.0:
        ad = a * delta
        for i in range(g.size):
            g[i] += ad * Q[i, j]
        beta[j] = b
    return abs(delta) * max(A, 1e-300), CONVERGED


@njit(cache=True)
def cd_solve(Q, c, a, w, rho, lo, hi, beta0, tol, max_sweeps, record):
    p = beta0.size
    beta = beta0.copy()
    for j in range(p):
        if beta[j] < lo[j]:
            beta[j] = lo[j]
        elif beta[j] > hi[j]:
            beta[j] = hi[j]
    g = a * np.dot(Q, beta) - c
    trace = np.empty(max_sweeps + 1 if record else 0)
    nt = 0
    if record:
        trace[0] = half_objective(g, c, beta, w, rho)
        nt = 1
    resid = kkt_inf(g, beta, w, rho, lo, hi)
    if resid <= tol:
        return beta, 0, CONVERGED, resid, trace[:nt]
    sweeps = 0
    active = np.empty(p, dtype=np.int64)
    while sweeps < max_sweeps:
        for j in range(p):
            _, st = _update(j, Q, a, g, beta, w, rho, lo, hi)
            if st != CONVERGED:
                return beta, sweeps, st, np.inf, trace[:nt]
        sweeps += 1
        if record:
            trace[nt] = half_objective(g, c, beta, w, rho)
            nt += 1
        # sweeps restricted to the current support until it settles
        na = 0
        for j in range(p):
            if beta[j] != 0.0 and lo[j] != hi[j]:
                active[na] = j
                na += 1
        while sweeps < max_sweeps and na > 0:
            mx = 0.0
            for k in range(na):
                d, st = _update(active[k], Q, a, g, beta, w, rho, lo, hi)
                if d > mx:
                    mx = d
            sweeps += 1
            if record:
                trace[nt] = half_objective(g, c, beta, w, rho)
                nt += 1
            if mx <= 0.1 * tol:
                break
        g = a * np.dot(Q, beta) - c
        resid = kkt_inf(g, beta, w, rho, lo, hi)
        if resid <= tol:
            return beta, sweeps, CONVERGED, resid, trace[:nt]
    return beta, sweeps, MAX_ITER, resid, trace[:nt]
