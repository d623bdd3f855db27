"""Small dense linear-algebra helpers."""
import numpy as np
from scipy.optimize import brentq


def power_iteration(A, tol=1e-10, max_iter=10_000):
    """Largest eigenvalue of the symmetric positive semidefinite matrix ``A``.

    The start vector is deterministic (all ones plus a fixed ramp) so that
    repeated calls return bit-identical results.
    """
    p = A.shape[0]
    v = np.ones(p) + np.linspace(0.0, 1.0, p)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (A @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def project_ellipsoid(z, center, svd, t):
    """Project ``z`` onto ``{b : ||X (b - center)|| <= t}``.

    ``svd`` is ``(s, Vt)`` from the full SVD of ``X``. The constraint set is a
    (possibly degenerate) ellipsoidal cylinder; the multiplier ``nu`` of the
    projection solves the secular equation
    ``sum_i s_i^2 c_i^2 / (1 + nu s_i^2)^2 = t^2``.
    """
    s, Vt = svd
    u0 = z - center
    c = Vt[: s.size] @ u0
    s2 = s * s
    cur = float(np.sum(s2 * c * c))
    if cur <= t * t:
        return z.copy()
    if t == 0.0:
        return center + u0 - Vt[: s.size].T @ c

    def secular(nu):
        return float(np.sum(s2 * c * c / (1.0 + nu * s2) ** 2)) - t * t

    hi = 1.0
    while secular(hi) > 0:
        hi *= 2.0
    nu = brentq(secular, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    c_new = c / (1.0 + nu * s2)
    return center + u0 + Vt[: s.size].T @ (c_new - c)
