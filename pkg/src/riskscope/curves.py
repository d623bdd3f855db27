"""The variational curves M, F, G, H and the critical radius.

For a noise realization ``eps`` and radius ``t``,

    M(t) = sup { eps'X(b - beta*) - h(b) : ||X(b - beta*)|| <= t }
    F(t) = M(t) - t^2/2
    G(t) = M(t) - t * risk
    H(t) = (M(t) + h(beta*)) / t

The supremum is computed through its Lagrangian dual. For ``mu > 0`` the
inner problem

    minimize (mu/2) ||X(b - beta*)||^2 - eps'X(b - beta*) + h(b)

is a penalized least-squares problem (response ``X beta* + eps/mu``, penalty
``h/mu``) handled by the solver kernels. Its attained radius ``r(mu)`` is
non-increasing in ``mu``; a root search on ``log mu`` matches ``r(mu) = t``.
The reported value is the dual function at the final multiplier,

    D(mu, t) = eps'Xu - h(b) + (mu/2) (t^2 - ||Xu||^2),

an upper bound on ``M(t)`` whose error is quadratic in the radius mismatch.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ArgumentError, CapabilityError, NumericError
from .linalg import project_ellipsoid
from .model import eval_penalty, is_finite_everywhere, prox_penalty, split_penalty
from .solver import SolverConfig, minimize_quadratic

WHICH = ("M", "F", "G", "H")


@dataclass(frozen=True)
class CurveConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    rad_tol: float = 1e-6
    mu_min: float = 1e-12
    mu_max: float = 1e15

    def __post_init__(self):
        if not self.rad_tol > 0:
            raise ArgumentError("rad_tol must be positive")
        if not 0 < self.mu_min < 1 < self.mu_max:
            raise ArgumentError("need mu_min < 1 < mu_max")


@dataclass(frozen=True, eq=False)
class CurveEval:
    """One point on a curve.

    ``active`` tells whether the radius constraint binds; ``dual_mu`` is the
    multiplier of the inner problem (0 when the constraint is inactive).
    The slope of M at ``t`` equals ``dual_mu * t``.
    """

    t: float
    value: float
    attaining_beta: np.ndarray | None
    active: bool
    dual_mu: float
    which: str = "M"

    def to_row(self):
        return (self.t, self.value, self.active, self.dual_mu)


@dataclass(frozen=True, eq=False)
class CriticalRadius:
    t_c: float
    attaining_beta0: np.ndarray


def critical_radius(instance, cfg=None):
    """Smallest prediction radius reachable inside the domain of h."""
    cfg = cfg or SolverConfig()
    _, ind = split_penalty(instance.penalty)
    if ind is None:
        return CriticalRadius(0.0, instance.beta_star.copy())
    c = instance.gram @ instance.beta_star
    b, _, _, _ = minimize_quadratic(instance, 1.0, c, ind, tol=cfg.tol * 1e-2,
                                    max_iter=cfg.max_iter)
    t_c = float(np.linalg.norm(instance.X @ (b - instance.beta_star)))
    return CriticalRadius(t_c, b)


class _Found(Exception):
    pass


class CurveEvaluator:
    """Evaluates M, F, G, H for one instance and one noise vector.

    Inner solutions are cached by multiplier and reused as warm starts, so
    sweeping a grid in increasing order is much cheaper than independent calls.
    """

    def __init__(self, instance, eps, cfg=None):
        self.instance = instance
        self.eps = np.asarray(eps, dtype=float)
        if self.eps.shape != (instance.n,):
            raise ArgumentError(f"eps has shape {self.eps.shape}, expected ({instance.n},)")
        self.cfg = cfg or CurveConfig()
        self._xte = instance.X.T @ self.eps
        self._qb = instance.gram @ instance.beta_star
        self._cache = {}
        self._keys = []
        self._tc = None
        self._h_star = None

    # -- helpers -------------------------------------------------------------
    @property
    def h_star(self):
        if self._h_star is None:
            self._h_star = eval_penalty(self.instance.penalty, self.instance.beta_star)
        return self._h_star

    @property
    def t_c(self):
        if self._tc is None:
            self._tc = critical_radius(self.instance, self.cfg.solver)
        return self._tc.t_c

    def _warm(self, mu):
        keys = self._keys
        if not keys:
            return None
        i = bisect.bisect_left(keys, mu)
        near = [keys[j] for j in (i - 1, i) if 0 <= j < len(keys)]
        key = min(near, key=lambda m: abs(math.log(m) - math.log(mu)))
        return self._cache[key][0]

    def inner(self, mu):
        """Solution of the inner problem at multiplier ``mu``: ``(b, radius, primal value)``."""
        hit = self._cache.get(mu)
        if hit is not None:
            return hit
        inst = self.instance
        c = mu * self._qb + self._xte
        tol = 0.5 * self.cfg.solver.tol * max(1.0, mu)
        b, _, _, _ = minimize_quadratic(inst, mu, c, inst.penalty, tol=tol,
                                        max_iter=self.cfg.solver.max_iter,
                                        method=self.cfg.solver.method, beta0=self._warm(mu))
        xu = inst.X @ (b - inst.beta_star)
        r = float(np.linalg.norm(xu))
        val = float(self.eps @ xu) - eval_penalty(inst.penalty, b)
        out = (b, r, val)
        self._cache[mu] = out
        bisect.insort(self._keys, mu)
        return out

    # -- M -------------------------------------------------------------------
    def M(self, t):
        t = float(t)
        if not t >= 0:
            raise ArgumentError(f"t must be nonnegative, got {t}")
        cfg = self.cfg
        inst = self.instance
        tc = self.t_c
        if t < tc - 1e-12 * max(1.0, tc):
            return CurveEval(t, -math.inf, None, True, math.inf)
        if t == 0.0 and inst.rank == inst.p:
            return CurveEval(0.0, -self.h_star, inst.beta_star.copy(), True, math.inf)
        if t == 0.0:
            # sup of -h over beta* + ker X; the dual route degenerates at mu = inf
            return CurveEval(0.0, eval_M_validation(inst, self.eps, 0.0), None, True, math.inf)

        # bracket mu_lo (radius >= t) and mu_hi (radius <= t); start near mu = 1
        # or from cached multipliers, so tiny mu (ill-conditioned) is only
        # visited when the constraint may be inactive
        mu_lo, mu_hi = self._bracket_from_cache(t)
        if mu_lo is None and mu_hi is None:
            if self.inner(1.0)[1] >= t:
                mu_lo = 1.0
            else:
                mu_hi = 1.0
        while mu_hi is None:
            mu = min(4.0 * mu_lo, cfg.mu_max)
            if self.inner(mu)[1] <= t:
                mu_hi = mu
            elif mu >= cfg.mu_max:
                b, r, _ = self.inner(mu)
                if abs(r - t) <= cfg.rad_tol * max(1.0, t):
                    return self._dual(t, mu)
                raise NumericError(
                    f"cannot reach radius {t:.6g}: r(mu_max)={r:.6g} (t_c={tc:.6g})")
            else:
                mu_lo = mu
        while mu_lo is None:
            mu = max(mu_hi / 4.0, cfg.mu_min)
            b, r, v = self.inner(mu)
            if r >= t:
                mu_lo = mu
            elif mu <= cfg.mu_min:
                # constraint inactive: the unconstrained supremum is attained
                return CurveEval(t, v, b, False, 0.0)
            else:
                mu_hi = mu
        while mu_hi / mu_lo > 4.0:
            # coarse bisection in log scale before the root search
            mid = math.sqrt(mu_lo * mu_hi)
            if self.inner(mid)[1] >= t:
                mu_lo = mid
            else:
                mu_hi = mid

        tight = 1e-10 * max(1.0, t)
        _, r_hi, _ = self.inner(mu_hi)
        if abs(r_hi - t) <= tight:
            return self._dual(t, mu_hi)
        _, r_lo, _ = self.inner(mu_lo)
        if abs(r_lo - t) <= tight:
            return self._dual(t, mu_lo)

        best = [None, math.inf]

        def f(x):
            mu = math.exp(x)
            _, r, _ = self.inner(mu)
            d = r - t
            if abs(d) < best[1]:
                best[0], best[1] = mu, abs(d)
            if abs(d) <= tight:
                raise _Found
            return d

        try:
            brentq(f, math.log(mu_lo), math.log(mu_hi), xtol=1e-15, rtol=1e-15, maxiter=200)
        except _Found:
            pass
        except (ValueError, RuntimeError) as exc:
            raise NumericError(f"radius root search failed at t={t:.6g}: {exc}") from exc
        mu = best[0]
        if best[1] > cfg.rad_tol * max(1.0, t):
            raise NumericError(f"radius mismatch {best[1]:.3e} at t={t:.6g} exceeds rad_tol")
        return self._dual(t, mu)

    def _bracket_from_cache(self, t):
        """Adjacent cached multipliers around radius ``t`` (r is non-increasing in mu)."""
        keys = self._keys
        if not keys:
            return None, None
        lo, hi = 0, len(keys)
        # first index whose radius drops below t
        while lo < hi:
            mid = (lo + hi) // 2
            if self._cache[keys[mid]][1] >= t:
                lo = mid + 1
            else:
                hi = mid
        mu_lo = keys[lo - 1] if lo > 0 else None
        mu_hi = keys[lo] if lo < len(keys) else None
        if mu_lo is not None and self._cache[mu_lo][1] == t:
            mu_hi = mu_lo
        return mu_lo, mu_hi

    def _dual(self, t, mu):
        b, r, v = self.inner(mu)
        value = v + 0.5 * mu * (t * t - r * r)
        return CurveEval(t, value, b, True, mu)

    # -- derived curves ------------------------------------------------------
    def F(self, t):
        m = self.M(t)
        return CurveEval(m.t, m.value - 0.5 * m.t ** 2, m.attaining_beta, m.active, m.dual_mu, "F")

    def G(self, t, risk):
        m = self.M(t)
        return CurveEval(m.t, m.value - m.t * float(risk), m.attaining_beta, m.active,
                         m.dual_mu, "G")

    def H(self, t):
        t = float(t)
        if not t > 0:
            raise ArgumentError(f"H is defined for t > 0 only, got {t}")
        if not math.isfinite(self.h_star):
            raise CapabilityError("H needs h(beta_star) < +inf")
        m = self.M(t)
        return CurveEval(t, (m.value + self.h_star) / t, m.attaining_beta, m.active,
                         m.dual_mu, "H")

    def F_slope(self, t):
        """Right derivative of F at ``t`` (``mu*t - t``), from the dual multiplier."""
        m = self.M(t)
        return m.dual_mu * m.t - m.t

    def curve(self, which, grid, risk=None):
        which = which.upper()
        if which not in WHICH:
            raise ArgumentError(f"unknown curve {which!r}")
        grid = [float(t) for t in grid]
        out = [None] * len(grid)
        for i in sorted(range(len(grid)), key=lambda k: grid[k]):
            t = grid[i]
            if which == "M":
                out[i] = self.M(t)
            elif which == "F":
                out[i] = self.F(t)
            elif which == "H":
                out[i] = self.H(t)
            else:
                if risk is None:
                    raise ArgumentError("G needs the solver risk")
                out[i] = self.G(t, risk)
        return out


# -- functional interface ----------------------------------------------------

def eval_M(instance, eps, t, cfg=None):
    return CurveEvaluator(instance, eps, cfg).M(t)


def eval_F(instance, eps, t, cfg=None):
    return CurveEvaluator(instance, eps, cfg).F(t)


def eval_G(instance, eps, t, risk, cfg=None):
    return CurveEvaluator(instance, eps, cfg).G(t, risk)


def eval_H(instance, eps, t, cfg=None):
    return CurveEvaluator(instance, eps, cfg).H(t)


# -- independent check --------------------------------------------------------

def eval_M_validation(instance, eps, t, *, rho=None, max_iter=200_000, tol=1e-12):
    """M(t) by ADMM on the primal, without the dual root search or the solver.

    Splits ``min h(b) - eps'X b + 1_E(z)``, ``b = z``, where ``E`` is the
    ellipsoid ``||X(z - beta*)|| <= t`` (projection through the SVD of X and
    a secular equation). Intended for tests on small instances.
    """
    X = instance.X
    pen = instance.penalty
    bs = instance.beta_star
    q = X.T @ np.asarray(eps, dtype=float)
    _, s, Vt = np.linalg.svd(X, full_matrices=True)
    svd = (s, Vt)
    if rho is None:
        rho = max(1.0, float(np.linalg.norm(q))) / max(t, 1e-3)
    z = project_ellipsoid(bs.copy(), bs, svd, t)
    w = np.zeros_like(z)
    for k in range(max_iter):
        b = prox_penalty(pen, z - w + q / rho, 1.0 / rho)
        z_old = z
        z = project_ellipsoid(b + w, bs, svd, t)
        w = w + b - z
        if k % 50 == 0:
            pr = np.linalg.norm(b - z)
            du = rho * np.linalg.norm(z - z_old)
            scale = 1.0 + np.linalg.norm(z)
            if pr <= tol * scale and du <= tol * scale * rho:
                break
    # report at the feasible point of the ellipsoid, h evaluated where finite
    point = z if math.isfinite(eval_penalty(pen, z)) else b
    return float(q @ (point - bs)) - eval_penalty(pen, point)
