"""Monte Carlo estimates under Gaussian noise.

Replication ``r`` draws its noise from ``philox(master_seed, r)``, so every
estimate is a pure function of the instance, the configuration and the seed,
whatever order the replications run in.

The maximizer ``t_f`` of ``f(t) = E F(t)`` is located as the root of the
Monte Carlo mean of the slopes ``F'(t) = t (mu(t) - 1)``, which each curve
evaluation returns for free through its dual multiplier. ``f`` is 1-strongly
concave, so the mean slope is strictly decreasing and the root is unique.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .certificates import Certificate, Premise
from .curves import CurveConfig, CurveEvaluator
from .errors import ArgumentError, ConvergenceError, NumericError
from .model import eval_penalty, gaussian_draw, philox
from .solver import SolverConfig, solve
from .stats import cp_lower, gaussian_tail, median_ci, reps_for_band, z_quantile

BOOT_STREAM = 0xB007


def parse_grid(spec):
    """Grid from ``"a:b:k"`` (k points, linear), ``"geom:a:b:k"`` or a sequence."""
    if spec is None:
        return None
    if isinstance(spec, str):
        parts = spec.split(":")
        try:
            if parts[0] == "geom" and len(parts) == 4:
                a, b, k = float(parts[1]), float(parts[2]), int(parts[3])
                if not (0 < a < b and k >= 2):
                    raise ArgumentError(f"bad geometric grid {spec!r}")
                return np.geomspace(a, b, k)
            if len(parts) == 3:
                a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
                if not (a < b and k >= 2 and a >= 0):
                    raise ArgumentError(f"bad grid {spec!r}")
                return np.linspace(a, b, k)
        except ValueError as exc:
            raise ArgumentError(f"cannot parse grid {spec!r}") from exc
        raise ArgumentError(f"grid must be 'a:b:k' or 'geom:a:b:k', got {spec!r}")
    g = np.asarray(spec, dtype=float).ravel()
    if g.size < 1 or np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ArgumentError("grid values must be finite and nonnegative")
    return np.sort(g)


@dataclass(frozen=True)
class McConfig:
    reps: int = 1000
    master_seed: int = 0
    t_grid: object = None
    confidence: float = 0.99
    bootstrap: int = 200
    sigma: float | None = None

    def __post_init__(self):
        if int(self.reps) < 2:
            raise ArgumentError("reps must be >= 2")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ArgumentError("master_seed must be an unsigned 64-bit integer")
        if not 0 < self.confidence < 1:
            raise ArgumentError("confidence must lie in (0, 1)")
        if self.sigma is not None and not self.sigma >= 0:
            raise ArgumentError("sigma must be nonnegative")

    def grid(self):
        return parse_grid(self.t_grid)


def _sigma(instance, mc, sigma=None):
    s = sigma if sigma is not None else mc.sigma
    if s is None:
        s = instance.sigma
    if s is None:
        raise ArgumentError("no noise level: give a GaussianNoise instance or set sigma")
    return float(s)


def draw(instance, mc, r, sigma):
    return gaussian_draw(sigma, instance.n, mc.master_seed, r)


# -- f curve ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FCurveEstimate:
    grid: np.ndarray
    f_hat: np.ndarray
    stderr: np.ndarray
    t_f_hat: float
    t_f_ci: tuple
    t_f_stderr: float
    reps: int
    flags: tuple = ()
    checks: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "grid": [float(t) for t in self.grid],
            "f_hat": [float(v) if math.isfinite(v) else "-inf" for v in self.f_hat],
            "stderr": [float(v) if math.isfinite(v) else None for v in self.stderr],
            "t_f_hat": self.t_f_hat,
            "t_f_ci": list(self.t_f_ci),
            "t_f_stderr": self.t_f_stderr,
            "reps": self.reps,
            "flags": list(self.flags),
            "checks": self.checks,
        }


class _SlopeTable:
    """Per-replication F values and slopes at every radius evaluated so far."""

    def __init__(self, evaluators):
        self.evs = evaluators
        self.F = {}
        self.S = {}
        self.M = {}

    def at(self, t):
        t = float(t)
        if t not in self.S:
            F = np.empty(len(self.evs))
            S = np.empty(len(self.evs))
            M = np.empty(len(self.evs))
            for i, ev in enumerate(self.evs):
                m = ev.M(t)
                M[i] = m.value
                F[i] = m.value - 0.5 * t * t
                S[i] = m.dual_mu * t - t if math.isfinite(m.dual_mu) else math.nan
            self.F[t], self.S[t], self.M[t] = F, S, M
        return self.F[t], self.S[t]

    def mean_slope(self, t):
        return float(np.mean(self.at(t)[1]))


def _interp_root(ts, ms):
    """Root of the piecewise-linear interpolant of a decreasing sequence."""
    if ms[0] <= 0:
        return ts[0]
    for i in range(1, len(ts)):
        if ms[i] <= 0:
            a, b = ms[i - 1], ms[i]
            return ts[i - 1] + (ts[i] - ts[i - 1]) * a / (a - b)
    return ts[-1]


def estimate_f_curve(instance, mc, cfg=None, *, sigma=None, refine_tol=1e-7, spot_every=100):
    """Monte Carlo estimate of ``f(t) = E F(t)`` and its maximizer ``t_f``."""
    sig = _sigma(instance, mc, sigma)
    cfg = cfg or CurveConfig()
    grid = mc.grid()
    evs = [CurveEvaluator(instance, draw(instance, mc, r, sig), cfg) for r in range(mc.reps)]
    t_c = evs[0].t_c
    if grid is None:
        scale = sig * math.sqrt(instance.n)
        grid = np.linspace(t_c, t_c + 3 * max(scale, 1e-12), 31)
    flags = []
    table = _SlopeTable(evs)
    f_hat = np.full(grid.size, -math.inf)
    stderr = np.full(grid.size, math.inf)
    below = grid < t_c - 1e-12 * max(1.0, t_c)
    if below.any():
        flags.append("grid_below_t_c")
    for j, t in enumerate(grid):
        if below[j]:
            continue
        F, _ = table.at(t)
        f_hat[j] = float(np.mean(F))
        stderr[j] = float(np.std(F, ddof=1) / math.sqrt(mc.reps))

    # per-replication monotonicity of M along the grid
    ok_t = [float(t) for t, b in zip(grid, below) if not b]
    mono_viol = 0
    for a, b in zip(ok_t[:-1], ok_t[1:]):
        mono_viol += int(np.sum(table.M[b] < table.M[a] - 1e-9 * np.maximum(1.0, np.abs(table.M[a]))))

    # concavity advisory: interpolated midpoint test within 2 stderr
    conc_viol = 0
    fin = np.flatnonzero(np.isfinite(f_hat))
    for k in range(1, fin.size - 1):
        i0, i1, i2 = fin[k - 1], fin[k], fin[k + 1]
        w = (grid[i2] - grid[i1]) / (grid[i2] - grid[i0])
        chord = w * f_hat[i0] + (1 - w) * f_hat[i2]
        if f_hat[i1] < chord - 2 * max(stderr[i0], stderr[i1], stderr[i2]):
            conc_viol += 1
    if conc_viol:
        flags.append("concavity_advisory_failed")

    # locate t_f from the mean slope
    pos = [t for t in ok_t if t > 0]
    scale = max(max(pos) if pos else 1.0, 1e-12)
    if not pos:
        pos = [max(t_c, 1e-9 * scale) * 2 or 1e-9]
        table.at(pos[0])
    ms = [table.mean_slope(t) for t in pos]
    while ms[-1] > 0:
        flags.append("grid_extended")
        pos.append(2 * pos[-1])
        ms.append(table.mean_slope(pos[-1]))
    i = next(k for k, v in enumerate(ms) if v <= 0)
    if i == 0:
        lo = t_c + 1e-9 * scale
        if lo >= pos[0] or table.mean_slope(lo) <= 0:
            t_f = t_c
            lo = None
        hi = pos[0]
    else:
        lo, hi = pos[i - 1], pos[i]
    if lo is not None:
        if ms[i] == 0:
            t_f = hi
        else:
            t_f = brentq(table.mean_slope, lo, hi, xtol=refine_tol * max(1.0, hi), rtol=1e-12)
            table.at(t_f)

    # bootstrap of the interpolated root over replications
    ts = sorted(t for t in table.S if t > 0 and t >= t_c)
    Smat = np.array([table.S[t] for t in ts])  # (len(ts), reps)
    good = np.all(np.isfinite(Smat), axis=1)
    ts_b = [t for t, g in zip(ts, good) if g]
    Smat = Smat[good]
    base = _interp_root(ts_b, Smat.mean(axis=1))
    rng = philox(mc.master_seed, BOOT_STREAM)
    dev = np.empty(mc.bootstrap)
    for b in range(mc.bootstrap):
        idx = rng.integers(0, mc.reps, mc.reps)
        dev[b] = _interp_root(ts_b, Smat[:, idx].mean(axis=1)) - base
    a = (1 - mc.confidence) / 2
    if mc.bootstrap:
        ci = (max(t_f + float(np.quantile(dev, a)), t_c), t_f + float(np.quantile(dev, 1 - a)))
        se = float(np.std(dev, ddof=1)) if mc.bootstrap > 1 else 0.0
    else:
        ci, se = (t_f, t_f), 0.0

    # spot check of the per-replication maximizer on a few replications
    spot_fail, spot_n = 0, 0
    step = max(1, int(spot_every))
    tol = 1e-6 * max(1.0, scale)
    for r in range(0, mc.reps, step):
        ev = evs[r]
        try:
            res = solve(instance, instance.X @ instance.beta_star + ev.eps, cfg.solver)
        except ConvergenceError:
            continue
        spot_n += 1
        for t in ok_t:
            if t <= 0:
                continue
            s = table.S[t][r]
            if (t < res.risk - tol and s < -tol) or (t > res.risk + tol and s > tol):
                spot_fail += 1
                break
    checks = {"monotone_M_violations": mono_viol, "concavity_violations": conc_viol,
              "spot_checks": spot_n, "spot_check_failures": spot_fail, "t_c": t_c,
              "radii_evaluated": len(table.S)}
    return FCurveEstimate(np.asarray(grid, float), f_hat, stderr, float(t_f), ci, se,
                          int(mc.reps), tuple(dict.fromkeys(flags)), checks)


# -- risk sample -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RiskSample:
    risks: np.ndarray
    median_hat: float
    mean_hat: float
    stderr: float
    failures: tuple = ()

    @property
    def reps(self):
        return int(self.risks.size)

    def to_dict(self):
        return {"risks": [float(r) for r in self.risks], "median_hat": self.median_hat,
                "mean_hat": self.mean_hat, "stderr": self.stderr,
                "failures": list(self.failures)}


def risk_sample(risks, failures=()):
    r = np.asarray(risks, dtype=float)
    if r.size < 2:
        raise ArgumentError("need at least two risks")
    srt = np.sort(r)
    return RiskSample(r, float(np.median(srt)), float(np.mean(srt)),
                      float(np.std(srt, ddof=1) / math.sqrt(r.size)), tuple(failures))


def sample_risks(instance, mc, solver_cfg=None, *, sigma=None, keep=None):
    """Prediction errors over ``mc.reps`` noise draws; failed solves are excluded and listed.

    ``keep``, if given, is called as ``keep(r, eps, result)`` for each success.
    """
    sig = _sigma(instance, mc, sigma)
    solver_cfg = solver_cfg or SolverConfig()
    xb = instance.X @ instance.beta_star
    risks, failures = [], []
    for r in range(mc.reps):
        eps = draw(instance, mc, r, sig)
        try:
            res = solve(instance, xb + eps, solver_cfg)
        except (ConvergenceError, NumericError) as exc:
            failures.append((r, str(exc)))
            continue
        risks.append(res.risk)
        if keep is not None:
            keep(r, eps, res)
    return risk_sample(risks, failures)


# -- checks ------------------------------------------------------------------------

def concentration_check(sample, sigma, x_list, confidence=0.99):
    """Empirical tails around the median against the Gaussian tail.

    A tail passes when its one-sided Clopper-Pearson lower bound does not
    exceed ``P(N(0,1) >= x)``, i.e. the data cannot reject the inequality.
    """
    r = np.sort(np.asarray(sample.risks, dtype=float))
    N = r.size
    m = float(np.median(r))
    rows = []
    for x in x_list:
        x = float(x)
        if x < 0:
            raise ArgumentError("x must be nonnegative")
        bound = gaussian_tail(x)
        k_up = int(np.sum(r >= m + sigma * x))
        k_lo = int(np.sum(r <= m - sigma * x))
        lo_up, lo_lo = cp_lower(k_up, N, confidence), cp_lower(k_lo, N, confidence)
        rows.append({
            "x": x, "gaussian_tail": bound,
            "upper_freq": k_up / N, "upper_cp_lower": lo_up, "upper_pass": bool(lo_up <= bound),
            "lower_freq": k_lo / N, "lower_cp_lower": lo_lo, "lower_pass": bool(lo_lo <= bound),
            "reps_for_band": reps_for_band(bound, confidence=confidence),
        })
    return {"median_hat": m, "reps": N, "confidence": confidence, "rows": rows,
            "passed": all(row["upper_pass"] and row["lower_pass"] for row in rows)}


def _sqrt_gap(a, lo, hi):
    ra = math.sqrt(max(a, 0.0))
    return max(abs(math.sqrt(max(lo, 0.0)) - ra), abs(math.sqrt(max(hi, 0.0)) - ra))


def tf_proximity_check(fcurve, sample, sigma, confidence=0.99):
    """``|sqrt t_f - sqrt m| <= 3.25 sqrt(sigma)`` and the same with the mean at 4.40."""
    t_f = fcurve.t_f_hat
    tf_slack = _sqrt_gap(t_f, *fcurve.t_f_ci)
    m_lo, m_hi = median_ci(np.sort(sample.risks), confidence)
    med_slack = _sqrt_gap(sample.median_hat, m_lo, m_hi)
    z = z_quantile(1 - (1 - confidence) / 2)
    mean_slack = _sqrt_gap(sample.mean_hat, sample.mean_hat - z * sample.stderr,
                           sample.mean_hat + z * sample.stderr)
    gap_m = abs(math.sqrt(t_f) - math.sqrt(sample.median_hat))
    gap_e = abs(math.sqrt(t_f) - math.sqrt(sample.mean_hat))
    lim_m = 3.25 * math.sqrt(sigma) + tf_slack + med_slack
    lim_e = 4.40 * math.sqrt(sigma) + tf_slack + mean_slack
    return {"t_f_hat": t_f, "median_hat": sample.median_hat, "mean_hat": sample.mean_hat,
            "gap_median": gap_m, "limit_median": lim_m, "median_pass": bool(gap_m <= lim_m),
            "gap_mean": gap_e, "limit_mean": lim_e, "mean_pass": bool(gap_e <= lim_e),
            "ci_slack": {"t_f": tf_slack, "median": med_slack, "mean": mean_slack},
            "passed": bool(gap_m <= lim_m and gap_e <= lim_e)}


def tf_upper_condition(instance, s_val, mc, cfg=None, *, sigma=None):
    """Statistical certificate ``t_f <= s_val``.

    Condition checked: ``f(s) + h(beta*) <= s^2 / 2``, i.e. the expected
    supremum of ``eps'X(b - beta*) + h(beta*) - h(b)`` over the radius-``s``
    ellipsoid is at most ``s^2``. The Monte Carlo mean must clear the bound by
    a one-sided normal band at ``mc.confidence``.
    """
    if not s_val > 0:
        raise ArgumentError("s must be positive")
    sig = _sigma(instance, mc, sigma)
    cfg = cfg or CurveConfig()
    h_star = eval_penalty(instance.penalty, instance.beta_star)
    if not math.isfinite(h_star):
        raise ArgumentError("t_f condition needs h(beta_star) < +inf")
    evs = [CurveEvaluator(instance, draw(instance, mc, r, sig), cfg) for r in range(mc.reps)]
    if s_val < evs[0].t_c:
        raise ArgumentError(f"s={s_val} lies below the critical radius {evs[0].t_c}")
    F = np.array([ev.F(s_val).value for ev in evs])
    f_hat = float(np.mean(F))
    se = float(np.std(F, ddof=1) / math.sqrt(F.size))
    band = z_quantile(mc.confidence) * se
    prem = Premise.le("f(s)+h(beta*)+band<=s^2/2", f_hat + h_star + band, 0.5 * s_val ** 2)
    verdict = "Verified" if prem.satisfied else "NotApplicable"
    return Certificate("TfUpper", float(s_val), "upper", (prem,), prem.margin, verdict,
                       ("statistical", "bounds_t_f"),
                       {"f_hat": f_hat, "stderr": se, "band": band, "h_star": h_star,
                        "reps": mc.reps})
