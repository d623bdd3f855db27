"""Penalized least-squares solver.

All routines here minimize the generic strongly-structured objective

    (a/2) b'Qb - c'b + h(b),        Q = X'X,

which is half of ``||Xb - y||^2 + 2h(b)`` (up to a constant) when ``a = 1``
and ``c = X'y``. The variational curves reuse the same kernels with other
values of ``a`` and ``c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ArgumentError, CapabilityError, ConvergenceError, NumericError
from .model import (
    ScaledL1, ScaledLqNorm, SquaredL2, Zero, eval_penalty, prox_penalty,
    separable_params, split_penalty,
)

# coordinate-descent sweeps before ``auto`` hands over to FISTA
CD_SWEEP_BUDGET = 300

METHODS = ("auto", "fista", "coordinate_descent", "projected_gradient", "closed_form")


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_iter: int = 100_000
    method: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise ArgumentError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ArgumentError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.method not in METHODS:
            raise ArgumentError(f"unknown method {self.method!r}; expected one of {METHODS}")


@dataclass(frozen=True, eq=False)
class SolveResult:
    beta_hat: np.ndarray
    risk: float
    objective: float
    opt_residual: float
    iterations: int
    method: str

    def to_dict(self):
        return {
            "beta_hat": [float(x) for x in self.beta_hat],
            "risk": float(self.risk),
            "objective": float(self.objective),
            "opt_residual": float(self.opt_residual),
            "iterations": int(self.iterations),
            "method": self.method,
        }


def _closed_form_rho(pen):
    """Ridge coefficient when ``pen`` is Zero/SquaredL2-like, else None."""
    fin, ind = split_penalty(pen)
    if ind is not None:
        return None
    if isinstance(fin, Zero):
        return 0.0
    if isinstance(fin, SquaredL2):
        return fin.lam
    if isinstance(fin, ScaledL1) and fin.lam == 0:
        return 0.0
    if isinstance(fin, ScaledLqNorm):
        if fin.lam == 0:
            return 0.0
        if fin.norm == "l2" and fin.q == 2:
            return fin.lam
    return None


def resolve_method(pen, p, method="auto"):
    sep = separable_params(pen, p) is not None
    rho = _closed_form_rho(pen)
    if method == "auto":
        if rho is not None:
            return "closed_form"
        return "coordinate_descent" if sep else "fista"
    if method == "closed_form" and rho is None:
        raise CapabilityError(f"no closed form for penalty {pen!r}")
    if method == "coordinate_descent" and not sep:
        raise CapabilityError(f"coordinate descent needs a separable penalty, got {pen!r}")
    return method


def half_kkt(inst, a, c, pen, b):
    """Stationarity residual of (a/2) b'Qb - c'b + h(b).

    Separable penalties: largest coordinatewise distance from 0 to the
    subdifferential. Others: Euclidean norm of the proximal-gradient mapping.
    """
    Q = inst.gram
    g = a * (Q @ b) - c
    sep = separable_params(pen, b.size)
    if sep is not None:
        w, rho, lo, hi = sep
        return float(_kernels.kkt_inf(g, b, w, rho, lo, hi))
    L = a * inst.sigma_max_sq
    if L <= 0:
        step = 1.0
    else:
        step = 1.0 / L
    b_plus = prox_penalty(pen, b - step * g, step)
    return float(np.linalg.norm(b - b_plus) / step)


def _closed_form(inst, a, c, rho):
    lam, V = inst.gram_eigh
    d = a * lam + 2.0 * rho
    cutoff = 1e-12 * max(float(d.max()), 1e-300)
    coef = V.T @ c
    safe = d > cutoff
    sol = np.zeros_like(coef)
    sol[safe] = coef[safe] / d[safe]
    return V @ sol


def _half_objective(inst, a, c, pen, b):
    return 0.5 * a * float(b @ (inst.gram @ b)) - float(c @ b) + eval_penalty(pen, b)


def _prox_grad(inst, a, c, pen, beta0, tol, max_iter, accelerate, record):
    Q = inst.gram
    L = a * inst.sigma_max_sq
    if L <= 0:
        b = prox_penalty(pen, np.zeros_like(beta0), 1.0)
        return b, 0, True, half_kkt(inst, a, c, pen, b), []
    step = 1.0 / L
    x = prox_penalty(pen, beta0, step)
    yv = x.copy()
    tk = 1.0
    trace = [_half_objective(inst, a, c, pen, x)] if record else []
    resid = math.inf
    for k in range(1, max_iter + 1):
        grad = a * (Q @ yv) - c
        x_new = prox_penalty(pen, yv - step * grad, step)
        if accelerate:
            # gradient-based adaptive restart keeps the iteration monotone-ish
            if float((yv - x_new) @ (x_new - x)) > 0:
                tk = 1.0
                yv = x_new.copy()
            else:
                tk_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
                yv = x_new + ((tk - 1.0) / tk_new) * (x_new - x)
                tk = tk_new
        else:
            yv = x_new
        x = x_new
        if record:
            trace.append(_half_objective(inst, a, c, pen, x))
        if k % 10 == 0 or k == max_iter:
            resid = half_kkt(inst, a, c, pen, x)
            if resid <= tol:
                return x, k, True, resid, trace
    return x, max_iter, False, resid, trace


def minimize_quadratic(inst, a, c, pen, *, tol, max_iter=100_000, method="auto",
                       beta0=None, record=False, auto_fallback=None):
    """Minimize (a/2) b'Qb - c'b + h(b).

    Returns ``(b, iterations, residual, trace)`` with the half-scale residual.
    Raises ``ConvergenceError`` (carrying the best iterate) on failure.
    """
    p = inst.p
    if auto_fallback is None:
        auto_fallback = method == "auto"
    method = resolve_method(pen, p, method)
    if beta0 is None:
        beta0 = np.zeros(p)
    beta0 = np.asarray(beta0, dtype=float)
    if method == "closed_form":
        b = _closed_form(inst, a, c, _closed_form_rho(pen))
        resid = half_kkt(inst, a, c, pen, b)
        trace = [_half_objective(inst, a, c, pen, b)] if record else []
        return b, 1, resid, trace
    if method == "coordinate_descent":
        w, rho, lo, hi = separable_params(pen, p)
        budget = max_iter if (record or not auto_fallback) else min(max_iter, CD_SWEEP_BUDGET)
        b, it, status, resid, trace = _kernels.cd_solve(
            np.ascontiguousarray(inst.gram), np.ascontiguousarray(c, dtype=float), float(a),
            w, rho, lo, hi, beta0, float(tol), int(budget), bool(record))
        if status == _kernels.UNBOUNDED:
            raise NumericError("objective is unbounded below along a coordinate")
        if status == _kernels.CONVERGED:
            return b, int(it), float(resid), list(trace)
        if budget < max_iter:
            # ill-conditioned supports (small lam, p > n): finish with restarted FISTA
            b2, it2, ok, resid2, _ = _prox_grad(inst, a, c, pen, b, tol, max_iter - budget,
                                                accelerate=True, record=False)
            if ok:
                return b2, int(it) + it2, resid2, []
            b, it, resid = b2, int(it) + it2, resid2
        raise ConvergenceError(
            f"coordinate descent stopped after {it} sweeps with residual {resid:.3e} > {tol:.1e}",
            best=b, residual=resid, iterations=it)
    b, it, ok, resid, trace = _prox_grad(inst, a, c, pen, beta0, tol, max_iter,
                                         accelerate=(method == "fista"), record=record)
    if not ok:
        raise ConvergenceError(
            f"{method} stopped after {it} iterations with residual {resid:.3e} > {tol:.1e}",
            best=b, residual=resid, iterations=it)
    return b, it, resid, trace


def solve(instance, y=None, cfg=None):
    """Minimize ||X b - y||^2 + 2 h(b) for the instance's penalty.

    ``y`` defaults to the instance's own response ``X beta_star + eps``.
    """
    cfg = cfg or SolverConfig()
    if y is None:
        y = instance.response()
    y = np.asarray(y, dtype=float)
    if y.shape != (instance.n,):
        raise ArgumentError(f"y has shape {y.shape}, expected ({instance.n},)")
    X = instance.X
    method = resolve_method(instance.penalty, instance.p, cfg.method)
    b, it, resid, _ = minimize_quadratic(
        instance, 1.0, X.T @ y, instance.penalty, tol=cfg.tol / 2, max_iter=cfg.max_iter,
        method=method, auto_fallback=cfg.method == "auto")
    return _result(instance, y, b, 2 * resid, it, method)


def _result(instance, y, b, resid, it, method):
    X = instance.X
    r = X @ b - y
    obj = float(r @ r) + 2.0 * eval_penalty(instance.penalty, b)
    risk = float(np.linalg.norm(X @ (b - instance.beta_star)))
    return SolveResult(beta_hat=b, risk=risk, objective=obj, opt_residual=float(resid),
                       iterations=int(it), method=method)


def solve_traced(instance, y, cfg=None):
    """Like :func:`solve` but also returns the per-iteration objective values."""
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=float)
    method = resolve_method(instance.penalty, instance.p, cfg.method)
    b, it, resid, trace = minimize_quadratic(
        instance, 1.0, instance.X.T @ y, instance.penalty, tol=cfg.tol / 2,
        max_iter=cfg.max_iter, method=method, record=True)
    yy = float(y @ y)
    full = [2.0 * v + yy for v in trace]
    return _result(instance, y, b, 2 * resid, it, method), full


def kkt_residual(instance, y, beta):
    """Distance from 0 to the subdifferential of ||Xb - y||^2 + 2h(b) at ``beta``.

    For penalties that are not coordinatewise separable the proximal-gradient
    mapping norm is reported instead; it vanishes exactly at minimizers.
    """
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if y.shape != (instance.n,) or beta.shape != (instance.p,):
        raise ArgumentError("dimension mismatch in kkt_residual")
    if not math.isfinite(eval_penalty(instance.penalty, beta)):
        return math.inf
    return 2.0 * half_kkt(instance, 1.0, instance.X.T @ y, instance.penalty, beta)
