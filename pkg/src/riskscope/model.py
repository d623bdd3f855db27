"""Problem instances, penalty functions and noise models.

A penalty is a small frozen dataclass describing ``h``; the estimator studied
throughout the package is

    beta_hat in argmin ||X beta - y||^2 + 2 h(beta),    y = X beta_star + eps.

Penalties
---------
Zero, ScaledL1, ScaledLqNorm, SquaredL2      finite everywhere
Box, Ball, Singleton                         indicators of closed convex sets
Sum(finite, indicator)                       one finite term plus one indicator
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import ArgumentError, CapabilityError

# relative slack used when testing membership of an indicator's set
MEMBERSHIP_TOL = 1e-10


# --------------------------------------------------------------------------
# penalty variants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    """h = 0 (ordinary least squares)."""


@dataclass(frozen=True)
class ScaledL1:
    """Lasso penalty h(b) = sqrt(n) * lam * ||b||_1."""

    lam: float
    n: int

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ArgumentError(f"lam must be finite and nonnegative, got {self.lam}")
        if int(self.n) < 1:
            raise ArgumentError(f"n must be >= 1, got {self.n}")

    @property
    def weight(self):
        return math.sqrt(self.n) * self.lam


_NORMS = ("l1", "l2", "linf")


@dataclass(frozen=True)
class ScaledLqNorm:
    """h(b) = lam * N(b)**q with N one of the l1, l2 or linf norms."""

    lam: float
    q: int = 1
    norm: str = "l2"

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ArgumentError(f"lam must be finite and nonnegative, got {self.lam}")
        if int(self.q) != self.q or self.q < 1:
            raise ArgumentError(f"q must be an integer >= 1, got {self.q}")
        if self.norm not in _NORMS:
            raise ArgumentError(f"norm must be one of {_NORMS}, got {self.norm!r}")


@dataclass(frozen=True)
class SquaredL2:
    """Ridge penalty h(b) = lam * ||b||^2."""

    lam: float

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ArgumentError(f"lam must be finite and nonnegative, got {self.lam}")


def _as_bound(v):
    if np.ndim(v) == 0:
        return float(v)
    return tuple(float(x) for x in np.asarray(v, dtype=float).ravel())


@dataclass(frozen=True)
class Box:
    """Indicator of the box [lo, hi]; bounds are scalars or length-p tuples."""

    lo: Union[float, tuple] = -math.inf
    hi: Union[float, tuple] = math.inf

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_bound(self.lo))
        object.__setattr__(self, "hi", _as_bound(self.hi))
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape and hi.shape and lo.shape != hi.shape:
            raise ArgumentError("box bounds have different lengths")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ArgumentError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise ArgumentError("empty box: some lo > hi")

    def bounds(self, p):
        lo = np.broadcast_to(np.asarray(self.lo, float), (p,)).copy() if np.ndim(self.lo) == 0 \
            else np.asarray(self.lo, float)
        hi = np.broadcast_to(np.asarray(self.hi, float), (p,)).copy() if np.ndim(self.hi) == 0 \
            else np.asarray(self.hi, float)
        if lo.shape != (p,) or hi.shape != (p,):
            raise ArgumentError(f"box bounds do not match dimension {p}")
        return lo, hi


@dataclass(frozen=True)
class Ball:
    """Indicator of the Euclidean ball of given radius around ``center`` (default 0)."""

    radius: float
    center: Union[tuple, None] = None

    def __post_init__(self):
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise ArgumentError(f"ball radius must be finite and >= 0, got {self.radius}")
        if self.center is not None:
            object.__setattr__(self, "center", _as_bound(self.center))

    def center_vec(self, p):
        if self.center is None:
            return np.zeros(p)
        c = np.asarray(self.center, float)
        if c.shape != (p,):
            raise ArgumentError(f"ball center has length {c.size}, expected {p}")
        return c


@dataclass(frozen=True)
class Singleton:
    """Indicator of the single point ``point``."""

    point: Union[float, tuple] = 0.0

    def __post_init__(self):
        object.__setattr__(self, "point", _as_bound(self.point))

    def vec(self, p):
        if np.ndim(self.point) == 0:
            return np.full(p, float(self.point))
        v = np.asarray(self.point, float)
        if v.shape != (p,):
            raise ArgumentError(f"singleton point has length {v.size}, expected {p}")
        return v


INDICATORS = (Box, Ball, Singleton)
FINITE = (Zero, ScaledL1, ScaledLqNorm, SquaredL2)


@dataclass(frozen=True)
class Sum:
    """finite + indicator."""

    finite: Union[Zero, ScaledL1, ScaledLqNorm, SquaredL2]
    indicator: Union[Box, Ball, Singleton]

    def __post_init__(self):
        if not isinstance(self.finite, FINITE):
            raise ArgumentError("Sum.finite must be a finite penalty variant")
        if not isinstance(self.indicator, INDICATORS):
            raise ArgumentError("Sum.indicator must be an indicator variant")


Penalty = Union[Zero, ScaledL1, ScaledLqNorm, SquaredL2, Box, Ball, Singleton, Sum]
PENALTY_TYPES = FINITE + INDICATORS + (Sum,)


def split_penalty(pen):
    """Return ``(finite_part, indicator_part_or_None)``."""
    if isinstance(pen, Sum):
        return pen.finite, pen.indicator
    if isinstance(pen, INDICATORS):
        return Zero(), pen
    if isinstance(pen, FINITE):
        return pen, None
    raise CapabilityError(f"unsupported penalty {pen!r}")


def is_finite_everywhere(pen):
    return split_penalty(pen)[1] is None


def is_norm(pen):
    """True when h is a norm (positive homogeneous, vanishing only at 0)."""
    if isinstance(pen, ScaledL1):
        return pen.lam > 0
    if isinstance(pen, ScaledLqNorm):
        return pen.q == 1 and pen.lam > 0
    return False


def separable_params(pen, p):
    """Coordinatewise description ``h(b) = sum_j w_j|b_j| + rho_j b_j^2 + 1[lo_j <= b_j <= hi_j]``.

    Returns ``None`` when ``pen`` is not of that form.
    """
    fin, ind = split_penalty(pen)
    w = np.zeros(p)
    rho = np.zeros(p)
    if isinstance(fin, ScaledL1):
        w[:] = fin.weight
    elif isinstance(fin, SquaredL2):
        rho[:] = fin.lam
    elif isinstance(fin, ScaledLqNorm):
        if fin.norm == "l1" and fin.q == 1:
            w[:] = fin.lam
        elif fin.norm == "l2" and fin.q == 2:
            rho[:] = fin.lam
        elif fin.lam == 0:
            pass
        else:
            return None
    if ind is None:
        lo = np.full(p, -np.inf)
        hi = np.full(p, np.inf)
    elif isinstance(ind, Box):
        lo, hi = ind.bounds(p)
    elif isinstance(ind, Singleton):
        lo = ind.vec(p).copy()
        hi = lo.copy()
    else:
        return None
    return w, rho, lo, hi


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _norm(b, which):
    if which == "l1":
        return float(np.sum(np.abs(b)))
    if which == "l2":
        return float(np.linalg.norm(b))
    return float(np.max(np.abs(b))) if b.size else 0.0


def _in_set(ind, b):
    p = b.size
    if isinstance(ind, Box):
        lo, hi = ind.bounds(p)
        scale = MEMBERSHIP_TOL * (1.0 + np.abs(b))
        return bool(np.all(b >= lo - scale) and np.all(b <= hi + scale))
    if isinstance(ind, Ball):
        d = np.linalg.norm(b - ind.center_vec(p))
        return bool(d <= ind.radius * (1 + MEMBERSHIP_TOL) + MEMBERSHIP_TOL)
    if isinstance(ind, Singleton):
        v = ind.vec(p)
        return bool(np.all(np.abs(b - v) <= MEMBERSHIP_TOL * (1.0 + np.abs(v))))
    raise CapabilityError(f"unsupported indicator {ind!r}")


def _finite_value(fin, b):
    if isinstance(fin, Zero):
        return 0.0
    if isinstance(fin, ScaledL1):
        return fin.weight * float(np.sum(np.abs(b)))
    if isinstance(fin, SquaredL2):
        return fin.lam * float(b @ b)
    if isinstance(fin, ScaledLqNorm):
        return fin.lam * _norm(b, fin.norm) ** fin.q
    raise CapabilityError(f"unsupported penalty {fin!r}")


def eval_penalty(pen, beta):
    """Value of h at ``beta``; ``math.inf`` outside the domain of an indicator."""
    b = np.asarray(beta, dtype=float)
    if b.ndim != 1:
        raise ArgumentError("beta must be a vector")
    fin, ind = split_penalty(pen)
    _check_dims(pen, b.size)
    if ind is not None and not _in_set(ind, b):
        return math.inf
    return _finite_value(fin, b)


def _check_dims(pen, p):
    _, ind = split_penalty(pen)
    if isinstance(ind, Box):
        ind.bounds(p)
    elif isinstance(ind, Ball):
        ind.center_vec(p)
    elif isinstance(ind, Singleton):
        ind.vec(p)


# --------------------------------------------------------------------------
# proximal operators
# --------------------------------------------------------------------------

def soft_threshold(z, thresh):
    return np.sign(z) * np.maximum(np.abs(z) - thresh, 0.0)


def project(ind, z):
    """Euclidean projection onto the set of an indicator."""
    p = z.size
    if isinstance(ind, Box):
        lo, hi = ind.bounds(p)
        return np.clip(z, lo, hi)
    if isinstance(ind, Singleton):
        return ind.vec(p).copy()
    if isinstance(ind, Ball):
        c = ind.center_vec(p)
        d = z - c
        nrm = np.linalg.norm(d)
        if nrm <= ind.radius:
            return z.copy()
        return c + d * (ind.radius / nrm)
    raise CapabilityError(f"unsupported indicator {ind!r}")


def _prox_lq(lam, q, norm, z, step):
    """prox of step*lam*N(.)**q via a one-dimensional monotone equation."""
    tau = step * lam
    if tau == 0 or not np.any(z):
        return z.copy()
    if q == 1:
        if norm == "l1":
            return soft_threshold(z, tau)
        if norm == "l2":
            nz = np.linalg.norm(z)
            return z * max(0.0, 1.0 - tau / nz)
        # linf: Moreau identity with projection onto the l1 ball of radius tau
        return z - _project_l1_ball(z, tau)
    if norm == "l2":
        nz = np.linalg.norm(z)
        # rho + tau*q*rho**(q-1) = ||z||
        rho = brentq(lambda r: r + tau * q * r ** (q - 1) - nz, 0.0, nz, xtol=1e-15, rtol=1e-15)
        return z * (rho / nz)
    if norm == "l1":
        # b = soft(z, s) with s = tau*q*||b||_1**(q-1)
        def g(s):
            return s - tau * q * np.sum(np.maximum(np.abs(z) - s, 0.0)) ** (q - 1)
        smax = float(np.max(np.abs(z)))
        s = brentq(g, 0.0, smax, xtol=1e-15, rtol=1e-15)
        return soft_threshold(z, s)
    # linf: b = clip(z, rho), sum(|z|-rho)_+ = tau*q*rho**(q-1)
    az = np.abs(z)

    def g(r):
        return np.sum(np.maximum(az - r, 0.0)) - tau * q * r ** (q - 1)
    rho = brentq(g, 0.0, float(az.max()), xtol=1e-15, rtol=1e-15)
    return np.clip(z, -rho, rho)


def _project_l1_ball(z, radius):
    az = np.abs(z)
    if az.sum() <= radius:
        return z.copy()
    u = np.sort(az)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    idx = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[idx] - radius) / (idx + 1.0)
    return np.sign(z) * np.maximum(az - theta, 0.0)


def _prox_finite(fin, z, step):
    if isinstance(fin, Zero):
        return z.copy()
    if isinstance(fin, ScaledL1):
        return soft_threshold(z, step * fin.weight)
    if isinstance(fin, SquaredL2):
        return z / (1.0 + 2.0 * step * fin.lam)
    if isinstance(fin, ScaledLqNorm):
        return _prox_lq(fin.lam, fin.q, fin.norm, z, step)
    raise CapabilityError(f"unsupported penalty {fin!r}")


def _radially_symmetric(fin):
    return isinstance(fin, (Zero, SquaredL2)) or (
        isinstance(fin, ScaledLqNorm) and fin.norm == "l2")


def prox_penalty(pen, z, step, *, dykstra_tol=1e-13, dykstra_iter=100000):
    """argmin_b 0.5*||b - z||^2 + step*h(b)."""
    if not step > 0:
        raise ArgumentError(f"step must be positive, got {step}")
    z = np.asarray(z, dtype=float)
    if not isinstance(pen, PENALTY_TYPES):
        raise CapabilityError(f"unsupported penalty {pen!r}")
    _check_dims(pen, z.size)
    fin, ind = split_penalty(pen)
    if ind is None:
        return _prox_finite(fin, z, step)
    if isinstance(fin, Zero) or isinstance(ind, Singleton):
        return project(ind, z)
    sep = separable_params(pen, z.size)
    if sep is not None:
        # 1-D convex: prox of f + indicator[lo, hi] is clip(prox f)
        return project(ind, _prox_finite(fin, z, step))
    if isinstance(ind, Ball) and ind.center is None and _radially_symmetric(fin):
        return project(ind, _prox_finite(fin, z, step))
    return _dykstra_prox(fin, ind, z, step, dykstra_tol, dykstra_iter)


def _dykstra_prox(fin, ind, z, step, tol, max_iter):
    # Dykstra-like splitting for prox of a sum (Bauschke-Combettes)
    x = z.copy()
    pq = np.zeros_like(z)
    qq = np.zeros_like(z)
    for _ in range(max_iter):
        y = _prox_finite(fin, x + pq, step)
        pq = x + pq - y
        x_new = project(ind, y + qq)
        qq = y + qq - x_new
        if np.linalg.norm(x_new - x) <= tol * (1.0 + np.linalg.norm(x_new)):
            return x_new
        x = x_new
    return x


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedNoise:
    vector: tuple

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ArgumentError("fixed noise vector must be finite")
        object.__setattr__(self, "vector", tuple(float(x) for x in v))


@dataclass(frozen=True)
class GaussianNoise:
    """i.i.d. N(0, sigma^2) entries drawn from a Philox stream seeded by ``seed``."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ArgumentError(f"sigma must be positive, got {self.sigma}")
        if not 0 <= int(self.seed) < 2**64:
            raise ArgumentError("seed must be an unsigned 64-bit integer")


NoiseSpec = Union[FixedNoise, GaussianNoise]


def philox(*keys):
    """Philox generator keyed by a hash of the integer tuple ``keys``.

    ``philox(master_seed, r)`` gives replication ``r`` a stream that does not
    depend on which other replications were run, or in what order.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))


def materialize_noise(noise, n):
    if isinstance(noise, FixedNoise):
        v = np.asarray(noise.vector, dtype=float)
        if v.size != n:
            raise ArgumentError(f"noise vector has length {v.size}, expected {n}")
        return v
    if isinstance(noise, GaussianNoise):
        return noise.sigma * philox(noise.seed).standard_normal(n)
    raise ArgumentError(f"unknown noise spec {noise!r}")


def gaussian_draw(sigma, n, master_seed, rep):
    """Noise vector of Monte Carlo replication ``rep``."""
    return sigma * philox(master_seed, rep).standard_normal(n)


# --------------------------------------------------------------------------
# problem instance
# --------------------------------------------------------------------------

def sparsity(beta):
    """Number of entries exactly equal to a nonzero float."""
    return int(np.count_nonzero(np.asarray(beta) != 0.0))


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Design, target, noise model and penalty.

    Arrays are copied and made read-only on construction.
    """

    X: np.ndarray
    beta_star: np.ndarray
    noise: NoiseSpec
    penalty: Penalty = field(default_factory=Zero)

    def __post_init__(self):
        X = _frozen(np.atleast_2d(self.X))
        b = _frozen(np.ravel(self.beta_star))
        n, p = X.shape
        if n < 1 or p < 1:
            raise ArgumentError("design must have at least one row and one column")
        if not np.all(np.isfinite(X)):
            raise ArgumentError("design matrix has non-finite entries")
        if b.size != p:
            raise ArgumentError(f"beta_star has length {b.size}, design has {p} columns")
        if not np.all(np.isfinite(b)):
            raise ArgumentError("beta_star has non-finite entries")
        if isinstance(self.noise, FixedNoise) and len(self.noise.vector) != n:
            raise ArgumentError(f"noise vector has length {len(self.noise.vector)}, design has {n} rows")
        if not isinstance(self.noise, (FixedNoise, GaussianNoise)):
            raise ArgumentError(f"unknown noise spec {self.noise!r}")
        if not isinstance(self.penalty, PENALTY_TYPES):
            raise ArgumentError(f"unknown penalty {self.penalty!r}")
        fin, _ = split_penalty(self.penalty)
        if isinstance(fin, ScaledL1) and fin.n != n:
            raise ArgumentError(f"ScaledL1.n={fin.n} does not match design rows n={n}")
        _check_dims(self.penalty, p)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "beta_star", b)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def sigma(self):
        return self.noise.sigma if isinstance(self.noise, GaussianNoise) else None

    def eps(self):
        return materialize_noise(self.noise, self.n)

    def response(self, eps=None):
        if eps is None:
            eps = self.eps()
        return self.X @ self.beta_star + np.asarray(eps, dtype=float)

    def h_star(self):
        return eval_penalty(self.penalty, self.beta_star)

    def with_penalty(self, penalty):
        return ProblemInstance(self.X, self.beta_star, self.noise, penalty)

    def with_beta_star(self, beta_star):
        return ProblemInstance(self.X, beta_star, self.noise, self.penalty)

    def with_noise(self, noise):
        return ProblemInstance(self.X, self.beta_star, noise, self.penalty)

    @cached_property
    def gram(self):
        g = self.X.T @ self.X
        g.setflags(write=False)
        return g

    @cached_property
    def gram_eigh(self):
        lam, V = np.linalg.eigh(self.gram)
        return np.maximum(lam, 0.0), V

    @cached_property
    def sigma_max_sq(self):
        from .linalg import power_iteration
        return power_iteration(self.gram)

    @cached_property
    def rank(self):
        return int(np.linalg.matrix_rank(self.X))

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (np.array_equal(self.X, other.X)
                and np.array_equal(self.beta_star, other.beta_star)
                and self.noise == other.noise
                and self.penalty == other.penalty)

    __hash__ = None
