"""Lasso experiments driven by JSON configurations.

Three experiments are available:

``compat_lower``
    Adversarial target built from the compatibility constant; checks that the
    prediction error exceeds ``0.99 lam sqrt|T| / phi`` with probability at
    least 0.49.
``sandwich``
    Well-conditioned design; checks ``risk <= C_bar lam sqrt s`` with
    probability 0.76 and the two-sided event with probability 0.25.
``small_lambda``
    Tuning parameter below ``(1 - delta_2d)/8 sigma sqrt(log(p/5d))``; checks
    the lower bound on the expected prediction error.

Each run returns an :class:`ExperimentReport`. Probability verdicts use a
one-sided Clopper-Pearson lower bound at ``confidence`` compared with the
theoretical level minus ``slack``.
"""
from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as rio
from .certificates import Premise, t0_gamma_lower
from .curves import CurveConfig
from .diagnostics import (
    c0_from_gamma, compatibility_constant, construct_compatibility_adversary, lambda_asymptotic,
    lambda_threshold, lasso_constants, re_constant, rip_delta, vg_packing,
)
from .errors import ArgumentError, ConfigError, ConvergenceError, NumericError
from .model import GaussianNoise, ProblemInstance, ScaledL1, Zero, gaussian_draw, philox
from .solver import SolverConfig, solve
from .stats import cp_lower

VERDICTS = ("PASS", "FAIL", "SKIPPED")
DEFAULT_SLACK = 0.03
LEVELS = {"compat_lower": 0.49, "sandwich_upper": 0.76, "sandwich_two_sided": 0.25}


@dataclass
class ExperimentReport:
    name: str
    label: str
    verdict: str
    config: dict
    premises: list = field(default_factory=list)
    frequencies: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    reason: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ArgumentError(f"bad verdict {self.verdict!r}")

    @property
    def headline(self):
        """(frequency, cp_lower, threshold) of the main statistic, for the summary table."""
        h = self.checks.get("headline", {})
        return h.get("frequency"), h.get("cp_lower"), h.get("threshold")

    def to_dict(self):
        return {
            "name": self.name, "label": self.label, "verdict": self.verdict,
            "reason": self.reason, "config": self.config,
            "premises": [_premise_dict(p) for p in self.premises],
            "frequencies": self.frequencies, "checks": self.checks,
            "flags": list(self.flags), "records": self.records,
        }


def _premise_dict(p):
    return {"name": p.name, "lhs": p.lhs, "rhs": p.rhs, "satisfied": p.satisfied,
            "margin": p.margin}


# -- configuration helpers -------------------------------------------------------------

def make_design(spec, base=None):
    """Design matrix from a generator spec."""
    gen = spec["generator"]
    scale = float(spec.get("scale", 1.0))
    if gen == "from_file":
        if "path" not in spec:
            raise ConfigError("design generator from_file needs 'path'")
        return scale * rio.load_matrix(rio._resolve(spec["path"], base))
    try:
        n = int(spec["n"])
        p = int(spec["p"]) if gen != "identity" else int(spec.get("p", n))
    except KeyError as exc:
        raise ConfigError(f"design generator {gen} needs {exc.args[0]!r}") from None
    rng = philox(int(spec.get("seed", 0)), 0xD51)
    if gen == "gaussian_iid":
        X = rng.standard_normal((n, p))
    elif gen == "rademacher":
        X = rng.choice(np.array([-1.0, 1.0]), size=(n, p))
    elif gen == "identity":
        if p != n:
            raise ConfigError("identity design needs p == n")
        X = math.sqrt(n) * np.eye(n)
    else:
        raise ConfigError(f"unknown design generator {gen!r}")
    return scale * X


def _lambda(cfg, p, *, s=None, gamma=None, sigma=None, delta=None, small_threshold=None):
    rule = cfg.get("lambda", {"rule": "explicit", "value": 1.0})
    kind = rule["rule"]
    if kind == "explicit":
        if "value" not in rule:
            raise ConfigError("lambda rule explicit needs 'value'")
        return float(rule["value"])
    if kind == "asymptotic":
        return lambda_asymptotic(p, s, gamma, sigma)
    if kind == "threshold":
        return lambda_threshold(p, s, gamma, sigma, delta) * float(rule.get("value", 1.0))
    if kind == "small_fraction":
        if small_threshold is None:
            raise ConfigError("lambda rule small_fraction applies to small_lambda only")
        return float(rule.get("value", 0.5)) * small_threshold
    raise ConfigError(f"unknown lambda rule {kind!r}")


def _common(cfg):
    reps = int(cfg["reps"])
    if reps < 2:
        raise ConfigError("reps must be >= 2 for binomial bands")
    if cfg.get("noise", "gaussian") != "gaussian":
        raise ConfigError("experiments need symmetric Gaussian noise; fixed noise is not allowed")
    sigma = float(cfg["sigma"])
    conf = float(cfg.get("confidence", 0.99))
    slack = float(cfg.get("slack", DEFAULT_SLACK))
    seed = int(cfg.get("master_seed", 0))
    return reps, sigma, conf, slack, seed


def _proportion(k, N, level, slack, confidence):
    lo = cp_lower(k, N, confidence)
    thr = level - slack
    return {"count": int(k), "reps": int(N), "frequency": k / N, "cp_lower": lo,
            "level": level, "threshold": thr, "pass": bool(lo >= thr)}


def _risks(inst, reps, sigma, seed, solver_cfg, on_rep=None):
    xb = inst.X @ inst.beta_star
    out = np.full(reps, np.nan)
    failures = []
    for r in range(reps):
        eps = gaussian_draw(sigma, inst.n, seed, r)
        try:
            res = solve(inst, xb + eps, solver_cfg)
        except (ConvergenceError, NumericError) as exc:
            failures.append({"rep": r, "error": str(exc)})
            continue
        out[r] = res.risk
        if on_rep is not None:
            on_rep(r, eps, res)
    return out, failures


def _penalty(lam, n):
    # lam = 0 is plain least squares; its fit and hence the risk are unique
    return Zero() if lam == 0 else ScaledL1(lam, n)


# -- compatibility lower bound -------------------------------------------------------

def run_compat_lower(cfg, base=None, solver_cfg=None):
    reps, sigma, conf, slack, seed = _common(cfg)
    X = make_design(cfg["design"], base)
    n, p = X.shape
    T = _support(cfg, p)
    lam = _lambda(cfg, p)
    if not lam > 0:
        raise ConfigError("compat_lower needs lambda > 0")
    compat = compatibility_constant(X, T, 1.0, seed=seed)
    adv = construct_compatibility_adversary(X, T, lam, sigma, float(cfg.get("q_prob", 0.99)),
                                            compat=compat)
    inst = ProblemInstance(X, adv.beta_star, GaussianNoise(sigma, seed), ScaledL1(lam, n))
    xu = X @ adv.u
    n_cert = min(int(cfg.get("certificate_reps", 5)), reps)
    certs = []

    def on_rep(r, eps, res):
        if r < n_cert:
            c = t0_gamma_lower(inst, eps, adv.t0, adv.gamma, res, CurveConfig())
            certs.append({"rep": r, "risk": res.risk, "certificate": c.to_dict(),
                          "sound": bool(not c.verified or c.bound <= res.risk + 1e-6)})

    risks, failures = _risks(inst, reps, sigma, seed, solver_cfg, on_rep)
    ok = ~np.isnan(risks)
    N = int(ok.sum())
    ev = risks[ok] >= adv.threshold
    om1 = np.empty(reps, bool)
    om2 = np.empty(reps, bool)
    for r in range(reps):
        eps = gaussian_draw(sigma, n, seed, r)
        om1[r] = np.linalg.norm(eps) <= adv.q
        om2[r] = eps @ xu >= 0
    both = (om1 & om2)[ok]
    head = _proportion(int(ev.sum()), N, LEVELS["compat_lower"], slack, conf)
    violations = int(np.sum(both & ~ev))
    checks = {
        "headline": head,
        "omega1_freq": float(om1.mean()), "omega2_freq": float(om2.mean()),
        "omega12": _proportion(int(both.sum()), N, LEVELS["compat_lower"], slack, conf),
        "omega_implication_violations": violations,
        "certificates_sound": all(c["sound"] for c in certs),
        "failures": failures,
    }
    prem = [Premise.ge("phi(T,1)>0", adv.phi, 1e-10, tol=0.0),
            Premise.ge("reps>=2", reps, 2, tol=0.0)]
    verdict = "PASS" if head["pass"] and not failures else "FAIL"
    records = [{"rep": int(r), "risk": _f(risks[r]), "event": bool(risks[r] >= adv.threshold),
                "omega1": bool(om1[r]), "omega2": bool(om2[r])} for r in range(reps)]
    if certs:
        checks["certificates"] = certs
    return ExperimentReport(
        "compat_lower", cfg.get("label", "compat_lower"), verdict, _echo(cfg),
        prem, {"event": head["frequency"], "omega12": checks["omega12"]["frequency"]},
        records, checks, ["phi_upper_estimate"] + list(compat.flags),
        "" if verdict == "PASS" else _why(head, failures),
    )


def _support(cfg, p):
    if "T" in cfg:
        T = sorted(set(int(j) for j in cfg["T"]))
    elif "s" in cfg:
        T = list(range(int(cfg["s"])))
    else:
        raise ConfigError("compat_lower needs a support 'T' or a size 's'")
    if T[-1] >= p:
        raise ConfigError(f"support index {T[-1]} out of range for p={p}")
    return T


def _quantiles(v):
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    return {str(q): float(x) for q, x in zip(qs, np.quantile(v, qs))}


def _f(x):
    return float(x) if np.isfinite(x) else None


def _why(head, failures):
    if failures:
        return f"{len(failures)} solver failures"
    return (f"cp_lower {head['cp_lower']:.4f} below threshold {head['threshold']:.4f}")


def _echo(cfg):
    return {k: cfg[k] for k in sorted(cfg)}


# -- sandwich ----------------------------------------------------------------------------

def run_sandwich(cfg, base=None, solver_cfg=None):
    reps, sigma, conf, slack, seed = _common(cfg)
    X = make_design(cfg["design"], base)
    n, p = X.shape
    if "s" not in cfg:
        raise ConfigError("sandwich needs the sparsity 's'")
    s = int(cfg["s"])
    gamma = float(cfg.get("gamma", 0.5))
    budget = int(cfg.get("rip_budget", 200_000))
    rip = rip_delta(X, s, budget, seed=seed)
    delta = rip.delta_s
    c0 = c0_from_gamma(gamma)
    kappa = re_constant(X, s, c0, seed=seed)
    lam = _lambda(cfg, p, s=s, gamma=gamma, sigma=sigma, delta=delta)
    thr = lambda_threshold(p, s, gamma, sigma, delta)
    flags = ["estimate-conditional", "kappa_upper_estimate"] + list(rip.flags)
    details = {"delta_s": delta, "rip_method": rip.method, "kappa": kappa.value,
               "lambda": lam, "lambda_threshold": thr, "c0": c0}
    p_lam = Premise.ge("lambda-tuning-log-9ep-s", lam, thr)
    p_kappa = Premise.ge("kappa>0", kappa.value, 1e-12, tol=0.0)
    premises = [p_lam, p_kappa]
    if p_kappa.satisfied and lam > 0:
        consts = lasso_constants(p, s, gamma, sigma, lam, kappa.value, delta)
        C_bar, C_under = consts.C_bar, consts.C_under
        bmin = consts.beta_min(lam, n)
        alpha = consts.alpha()
    else:
        C_bar, C_under, bmin, alpha = math.inf, sigma / (1 + delta), -math.inf, math.inf
    details.update({"C_bar": C_bar, "C_under": C_under, "beta_min": bmin, "alpha": alpha})
    p_cc = Premise.le("C_bar<=2C_under", C_bar, 2 * C_under)
    premises.append(p_cc)

    mag_cfg = cfg.get("beta_magnitude")
    if mag_cfg is not None:
        mag = float(mag_cfg)
    elif math.isfinite(bmin) and bmin > 0:
        mag = 1.05 * bmin
    else:
        # no meaningful minimum; plant unit entries
        mag = 1.0
        flags.append("beta_min_undefined")
    p_bmin = Premise.ge("explicit-beta-min", mag, bmin if math.isfinite(bmin) else math.inf)
    premises.append(p_bmin)
    details["beta_magnitude"] = mag

    upper_ok = p_lam.satisfied and p_kappa.satisfied and math.isfinite(C_bar)
    lower_ok = upper_ok and p_cc.satisfied and p_bmin.satisfied
    advisory = bool(cfg.get("advisory", False))
    failed = [q.name for q in premises if not q.satisfied]
    if not upper_ok and not advisory:
        return ExperimentReport("sandwich", cfg.get("label", "sandwich"), "SKIPPED", _echo(cfg),
                                premises, {}, [], {"details": details}, flags,
                                "premise failed: " + ", ".join(failed))

    rng = philox(seed, 0x5A4D)
    support = np.sort(rng.choice(p, size=s, replace=False))
    signs = rng.choice(np.array([-1.0, 1.0]), size=s)
    beta = np.zeros(p)
    beta[support] = mag * signs
    inst = ProblemInstance(X, beta, GaussianNoise(sigma, seed), _penalty(lam, n))
    risks, failures = _risks(inst, reps, sigma, seed, solver_cfg or SolverConfig(tol=1e-8))
    ok = ~np.isnan(risks)
    N = int(ok.sum())
    rs = risks[ok]
    up_b = C_bar * lam * math.sqrt(s)
    lo_b = C_under * lam * math.sqrt(s) * (1 - alpha) if math.isfinite(alpha) else -math.inf
    ind_up = rs <= up_b
    ind_sw = ind_up & (rs >= lo_b)
    up = _proportion(int(ind_up.sum()), N, LEVELS["sandwich_upper"], slack, conf)
    sw = _proportion(int(ind_sw.sum()), N, LEVELS["sandwich_two_sided"], slack, conf)
    up["bound"], sw["lower_bound"], sw["upper_bound"] = up_b, lo_b, up_b
    up["status"] = "PASS" if up["pass"] else "FAIL"
    sw["status"] = ("PASS" if sw["pass"] else "FAIL") if lower_ok else "ADVISORY"
    if not upper_ok:
        up["status"] = "ADVISORY"
        verdict = "SKIPPED"
        reason = "premise failed: " + ", ".join(failed) + " (advisory run)"
    else:
        bad = up["status"] == "FAIL" or sw["status"] == "FAIL" or failures
        verdict = "FAIL" if bad else "PASS"
        reason = "" if not bad else ("solver failures" if failures else "frequency below level")
        if sw["status"] == "ADVISORY":
            reason = (reason + "; " if reason else "") + "two-sided check advisory: " + \
                ", ".join(failed)
    checks = {"headline": {"frequency": up["frequency"], "cp_lower": up["cp_lower"],
                           "threshold": up["threshold"]},
              "upper": up, "two_sided": sw, "details": details, "failures": failures,
              "support": support.tolist(),
              "scaled_risk_quantiles": _quantiles(rs / (lam * math.sqrt(s)))}
    records = [{"rep": int(r), "risk": _f(risks[r])} for r in range(reps)]
    return ExperimentReport("sandwich", cfg.get("label", "sandwich"), verdict, _echo(cfg),
                            premises, {"upper": up["frequency"], "two_sided": sw["frequency"]},
                            records, checks, flags, reason)


# -- small tuning parameter --------------------------------------------------------------

def small_lambda_threshold(p, d, sigma, delta_2d):
    return (1 - delta_2d) / 8 * sigma * math.sqrt(math.log(p / (5 * d)))


def small_lambda_bound(p, d, sigma, delta_2d, delta_d):
    return (1 - delta_2d) / (8 * (1 + delta_d)) * sigma * math.sqrt(d * math.log(p / (5 * d)))


def run_small_lambda(cfg, base=None, solver_cfg=None):
    reps, sigma, conf, slack, seed = _common(cfg)
    X = make_design(cfg["design"], base)
    n, p = X.shape
    if "d" not in cfg:
        raise ConfigError("small_lambda needs 'd'")
    d = int(cfg["d"])
    # the packing behind the bound only exists for d < p/5
    pack = vg_packing(p, d, seed=seed)
    budget = int(cfg.get("rip_budget", 200_000))
    rip2 = rip_delta(X, 2 * d, budget, seed=seed)
    rip1 = rip_delta(X, d, budget, seed=seed)
    thr = small_lambda_threshold(p, d, sigma, rip2.delta_s)
    lam = _lambda(cfg, p, small_threshold=thr)
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    bound = small_lambda_bound(p, d, sigma, rip2.delta_s, rip1.delta_s)
    p_lam = Premise.le("lambda-too-small-log-p-5d", lam, thr)
    premises = [p_lam, Premise.ge("d<p/5", p / 5, d + 1e-12, tol=0.0)]
    flags = ["estimate-conditional"] + sorted(set(rip1.flags) | set(rip2.flags))
    injection = bool(cfg.get("fail_injection", False))
    if not p_lam.satisfied and not injection:
        raise ConfigError(
            f"premise lambda-too-small-log-p-5d fails: lambda={lam:.6g} > {thr:.6g}")
    beta = np.zeros(p)
    if "beta_magnitude" in cfg:
        beta[: d] = float(cfg["beta_magnitude"])
    inst = ProblemInstance(X, beta, GaussianNoise(sigma, seed), _penalty(lam, n))
    risks, failures = _risks(inst, reps, sigma, seed, solver_cfg or SolverConfig(tol=1e-8))
    rs = risks[~np.isnan(risks)]
    mean = float(rs.mean())
    se = float(rs.std(ddof=1) / math.sqrt(rs.size))
    ok = mean + 3 * se >= bound
    details = {"delta_2d": rip2.delta_s, "delta_d": rip1.delta_s, "lambda": lam,
               "lambda_threshold": thr, "bound": bound, "mean": mean, "stderr": se,
               "packing_size": int(pack.omega.shape[0]), "packing_log_bound": pack.bound}
    if not p_lam.satisfied:
        verdict, reason = "FAIL", "fail injection: premise lambda-too-small-log-p-5d violated"
        flags.append("fail_injection")
    elif failures:
        verdict, reason = "FAIL", f"{len(failures)} solver failures"
    else:
        verdict = "PASS" if ok else "FAIL"
        reason = "" if ok else f"mean+3se {mean + 3 * se:.6g} below bound {bound:.6g}"
    checks = {"headline": {"frequency": None, "cp_lower": None, "threshold": bound,
                           "mean_plus_3se": mean + 3 * se},
              "details": details, "failures": failures}
    records = [{"rep": int(r), "risk": _f(risks[r])} for r in range(reps)]
    return ExperimentReport("small_lambda", cfg.get("label", "small_lambda"), verdict,
                            _echo(cfg), premises, {"mean_risk": mean}, records, checks, flags,
                            reason)


RUNNERS = {"compat_lower": run_compat_lower, "sandwich": run_sandwich,
           "small_lambda": run_small_lambda}


def run_experiment(cfg, base=None, solver_cfg=None):
    try:
        runner = RUNNERS[cfg["name"]]
    except KeyError:
        raise ConfigError(f"unknown experiment {cfg.get('name')!r}") from None
    return runner(cfg, base, solver_cfg)


# -- bundles ------------------------------------------------------------------------------

SUMMARY_COLUMNS = ("name", "verdict", "frequency", "cp_lower", "threshold")


def load_config(path):
    path = Path(path)
    doc = rio.load_json(path)
    rio.validate(doc, "experiments.schema.json")
    return doc


def run_all(config, out_dir, *, base=None, now=None):
    """Run every experiment of a bundle; returns (exit code, reports).

    ``config`` is a path or an already loaded document. The whole bundle is
    schema-checked before anything runs. The exit code is 1 iff some verdict
    is FAIL.
    """
    if isinstance(config, (str, Path)):
        base = Path(config).parent if base is None else base
        doc = load_config(config)
    else:
        doc = config
        rio.validate(doc, "experiments.schema.json")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = (now or _dt.datetime.now(_dt.timezone.utc)).isoformat()
    reports = []
    seen = {}
    for cfg in doc["experiments"]:
        rep = run_experiment(cfg, base)
        label = rep.label
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}_{seen[label]}"
        body = rep.to_dict()
        body["generated_at"] = stamp
        rio.save_json(out / f"{label}.json", body)
        reports.append((label, rep))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for label, rep in reports:
            freq, lo, thr = rep.headline
            w.writerow([label, rep.verdict, _cell(freq), _cell(lo), _cell(thr)])
    code = 1 if any(rep.verdict == "FAIL" for _, rep in reports) else 0
    return code, [rep for _, rep in reports]


def _cell(v):
    return "" if v is None else repr(float(v))
