"""Upper and lower bounds on the prediction error read off the curve H.

Each routine returns a :class:`Certificate`. Premises are compared with an
absolute margin ``PREMISE_TOL``; the recorded margin is ``rhs - lhs`` for a
premise of the form ``lhs <= rhs``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .curves import CurveEvaluator
from .errors import ArgumentError, CapabilityError
from .model import ProblemInstance, eval_penalty, is_norm

PREMISE_TOL = 1e-9
KINDS = ("FixedPointUpper", "LimitLower", "T0GammaLower", "AlmostFixedPointLower",
         "NormDualLower", "TfUpper")


@dataclass(frozen=True)
class Premise:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float

    @classmethod
    def le(cls, name, lhs, rhs, tol=PREMISE_TOL):
        margin = float(rhs) - float(lhs)
        return cls(name, float(lhs), float(rhs), bool(margin >= -tol), margin)

    @classmethod
    def ge(cls, name, lhs, rhs, tol=PREMISE_TOL):
        margin = float(lhs) - float(rhs)
        return cls(name, float(lhs), float(rhs), bool(margin >= -tol), margin)


@dataclass(frozen=True)
class Certificate:
    kind: str
    bound: float
    direction: str
    premises: tuple = ()
    slack: float = 0.0
    verdict: str = "Verified"
    flags: tuple = ()
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown certificate kind {self.kind!r}")
        if self.direction not in ("upper", "lower"):
            raise ArgumentError(f"direction must be upper or lower, got {self.direction!r}")
        if self.verdict == "Verified":
            if not all(p.satisfied for p in self.premises):
                raise ArgumentError("a Verified certificate needs all premises satisfied")
            if not math.isfinite(self.bound):
                raise ArgumentError("a Verified certificate needs a finite bound")

    @property
    def verified(self):
        return self.verdict == "Verified"

    def to_dict(self):
        return {
            "kind": self.kind,
            "direction": self.direction,
            "bound": _num(self.bound),
            "verdict": self.verdict,
            "slack": _num(self.slack),
            "premises": [
                {"name": p.name, "lhs": _num(p.lhs), "rhs": _num(p.rhs),
                 "satisfied": p.satisfied, "margin": _num(p.margin)}
                for p in self.premises
            ],
            "flags": list(self.flags),
            "details": {k: _jsonable(v) for k, v in sorted(self.details.items())},
        }

    def to_json(self):
        # repr-exact floats and sorted keys: identical inputs give identical bytes
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)


def _num(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _jsonable(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _num(v)
    return v


def _evaluator(instance, eps, cfg):
    if isinstance(cfg, CurveEvaluator):
        return cfg
    ev = CurveEvaluator(instance, eps, cfg)
    if not math.isfinite(ev.h_star):
        raise CapabilityError("certificates need h(beta_star) < +inf")
    return ev


# -- upper bound ---------------------------------------------------------------

def fixed_point_upper(instance, eps, cfg=None, *, rel_floor=1e-12, xtol=1e-13):
    """``inf{r > 0 : H(r) <= r}``, an upper bound on the prediction error.

    ``H(r) - r`` is strictly decreasing, so the crossing is bracketed by
    doubling/halving from ``max(1, ||eps||)`` and then refined by Brent's
    method. The reported bound sits on the side where ``H(r) <= r`` holds.
    """
    ev = _evaluator(instance, eps, cfg)
    scale = max(1.0, float(np.linalg.norm(ev.eps)))
    floor = rel_floor * scale

    def g(r):
        return ev.H(r).value - r

    r = scale
    flags = []
    probes = 0
    if g(r) > 0:
        lo = r
        while True:
            r *= 2.0
            probes += 1
            if g(r) <= 0:
                hi = r
                break
            lo = r
    else:
        hi = r
        lo = None
        while r > floor:
            r = max(r / 2.0, floor)
            probes += 1
            if g(r) > 0:
                lo = r
                break
            hi = r
        if lo is None:
            # H(r) <= r down to the numerical floor: the infimum is 0
            flags.append("at_floor")
            bound = hi
            prem = Premise.le("H(r)<=r", ev.H(bound).value, bound)
            return Certificate("FixedPointUpper", bound, "upper", (prem,), prem.margin,
                               "Verified", tuple(flags),
                               {"floor": floor, "probes": probes})
    root = brentq(g, lo, hi, xtol=xtol * scale, rtol=1e-15, maxiter=500)
    bound = root
    step = xtol * scale
    # make sure the reported point satisfies the defining inequality
    while g(bound) > 0:
        bound += step
        step *= 2.0
    hb = ev.H(bound).value
    prem = Premise.le("H(r)<=r", hb, bound)
    return Certificate("FixedPointUpper", bound, "upper", (prem,), prem.margin, "Verified",
                       tuple(flags), {"bracket": [lo, hi], "H_at_bound": hb, "probes": probes})


# -- lower bounds --------------------------------------------------------------

def limit_lower(instance, eps, t_max, cfg=None, *, doublings=40, stab_tol=1e-6):
    """Heuristic stand-in for ``lim_{t -> inf} H(t)``.

    Evaluates ``H(t_max 2^k)``; once two consecutive values differ by at most
    ``stab_tol`` the certificate is Verified with bound ``last - gap``
    (flagged heuristic), otherwise NotApplicable.
    """
    if not t_max > 0:
        raise ArgumentError("t_max must be positive")
    ev = _evaluator(instance, eps, cfg)
    seq = [ev.H(t_max).value]
    t = t_max
    gap = math.inf
    for _ in range(doublings):
        t *= 2.0
        seq.append(ev.H(t).value)
        gap = abs(seq[-2] - seq[-1])
        if gap <= stab_tol:
            break
    stable = gap <= stab_tol
    prem = Premise.le("stabilization gap", gap, stab_tol, tol=0.0)
    bound = max(seq[-1] - gap, 0.0) if stable else max(seq[-1], 0.0)
    verdict = "Verified" if stable else "NotApplicable"
    return Certificate("LimitLower", bound, "lower", (prem,), stab_tol - gap, verdict,
                       ("heuristic",), {"t_last": t, "sequence": seq})


def t0_gamma_lower(instance, eps, t0, gamma, solve_result, cfg=None):
    """Lower bound ``H(t0) - gamma``, valid when the t0-gamma premise holds.

    ``solve_result`` must come from the same noise realization.
    """
    if not (t0 > 0 and gamma > 0):
        raise ArgumentError("t0 and gamma must be positive")
    ev = _evaluator(instance, eps, cfg)
    inst = ev.instance
    b = np.asarray(solve_result.beta_hat, dtype=float)
    xu = inst.X @ (b - inst.beta_star)
    risk = float(np.linalg.norm(xu))
    lhs = float(ev.eps @ xu) + ev.h_star - eval_penalty(inst.penalty, b) - risk * risk
    prem = Premise.le("t0-gamma premise", lhs, t0 * gamma)
    h0 = ev.H(t0).value
    bound = h0 - gamma
    verdict = "Verified" if prem.satisfied else "NotApplicable"
    flags = ("vacuous",) if bound <= 0 else ()
    return Certificate("T0GammaLower", bound, "lower", (prem,), prem.margin, verdict, flags,
                       {"t0": t0, "gamma": gamma, "H_t0": h0})


def almost_fixed_point_lower(instance, eps, r, alpha, cfg=None):
    """Lower bound ``(1 - alpha) r`` from an almost fixed point of H."""
    if not r > 0:
        raise ArgumentError("r must be positive")
    if not 0 < alpha < 1:
        raise ArgumentError("alpha must lie in (0, 1)")
    ev = _evaluator(instance, eps, cfg)
    h_s = ev.H((1 - alpha) * r).value
    h_t = ev.H((1 - alpha * alpha) * r).value
    p1 = Premise.le("H((1-a)r)<=(1+a^2)r", h_s, (1 + alpha * alpha) * r)
    p2 = Premise.ge("H((1-a^2)r)>=r", h_t, r)
    ok = p1.satisfied and p2.satisfied
    return Certificate("AlmostFixedPointLower", (1 - alpha) * r, "lower", (p1, p2),
                       min(p1.margin, p2.margin), "Verified" if ok else "NotApplicable", (),
                       {"r": r, "alpha": alpha})


def norm_dual_lower(instance, eps, cfg=None):
    """``sup_{||Xu|| <= 1} eps'Xu - h(u)`` for a norm penalty; a lower bound."""
    if not is_norm(instance.penalty):
        raise CapabilityError(f"penalty {instance.penalty!r} is not a norm")
    if isinstance(cfg, CurveEvaluator):
        cfg = cfg.cfg
    centered = ProblemInstance(instance.X, np.zeros(instance.p), instance.noise,
                               instance.penalty)
    m = CurveEvaluator(centered, eps, cfg).M(1.0)
    bound = max(m.value, 0.0)
    return Certificate("NormDualLower", bound, "lower", (), 0.0, "Verified", (),
                       {"sup_value": m.value, "dual_mu": m.dual_mu})
