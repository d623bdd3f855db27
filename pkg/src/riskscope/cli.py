"""Command-line entry point ``riskscope``.

Exit codes: 0 success, 1 an experiment verdict is FAIL, 2 bad input
(parse, schema, configuration or argument error), 3 numerical failure,
4 operation not available for the penalty.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as rio
from .certificates import (
    almost_fixed_point_lower, fixed_point_upper, limit_lower, norm_dual_lower, t0_gamma_lower,
)
from .curves import CurveConfig, CurveEvaluator
from .diagnostics import (
    compatibility_constant, lasso_constants, re_constant, rip_delta, vg_packing,
)
from .errors import (
    ArgumentError, CapabilityError, ConfigError, ConvergenceError, DegenerateDesignError,
    NumericError, ParseError,
)
from .experiments import run_all
from .montecarlo import (
    McConfig, concentration_check, estimate_f_curve, sample_risks, tf_proximity_check,
)
from .solver import SolverConfig, solve

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC, EXIT_CAPABILITY = 0, 1, 2, 3, 4


def _eps(args, inst):
    if getattr(args, "eps", None):
        e = rio.load_vector(args.eps)
        if e.shape != (inst.n,):
            raise ArgumentError(f"eps has {e.size} entries, expected {inst.n}")
        return e
    return inst.eps()


def _solver_cfg(args):
    return SolverConfig(tol=args.tol, method=args.method)


def _print_json(obj):
    sys.stdout.write(rio.dumps(obj) + "\n")


def cmd_solve(args):
    inst = rio.load_instance(args.instance)
    y = rio.load_vector(args.y) if args.y else None
    res = solve(inst, y, _solver_cfg(args))
    _print_json(res.to_dict())
    return EXIT_OK


def cmd_curve(args):
    from .montecarlo import parse_grid
    inst = rio.load_instance(args.instance)
    eps = _eps(args, inst)
    cfg = CurveConfig(solver=_solver_cfg(args))
    ev = CurveEvaluator(inst, eps, cfg)
    grid = parse_grid(args.grid)
    risk = None
    if args.which.upper() == "G":
        risk = args.risk if args.risk is not None else \
            solve(inst, inst.X @ inst.beta_star + eps, cfg.solver).risk
    if args.which.upper() == "H":
        # H is defined for t > 0 only
        grid = grid[grid > 0]
    rows = ev.curve(args.which, grid, risk)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("t", "value", "active", "dual_mu"))
    for c in rows:
        t, v, a, mu = c.to_row()
        w.writerow((repr(float(t)), repr(float(v)), int(bool(a)), repr(float(mu))))
    return EXIT_OK


def cmd_certify(args):
    inst = rio.load_instance(args.instance)
    eps = _eps(args, inst)
    cfg = CurveConfig(solver=_solver_cfg(args))
    kind = args.kind
    if kind == "fixed-point":
        cert = fixed_point_upper(inst, eps, cfg)
    elif kind == "limit":
        cert = limit_lower(inst, eps, args.t_max, cfg)
    elif kind == "t0gamma":
        _need(args, "t0", "gamma")
        res = solve(inst, inst.X @ inst.beta_star + eps, cfg.solver)
        cert = t0_gamma_lower(inst, eps, args.t0, args.gamma, res, cfg)
    elif kind == "almost-fp":
        _need(args, "r", "alpha")
        cert = almost_fixed_point_lower(inst, eps, args.r, args.alpha, cfg)
    else:
        cert = norm_dual_lower(inst, eps, cfg)
    sys.stdout.write(cert.to_json() + "\n")
    return EXIT_OK


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ArgumentError("missing option(s): " + ", ".join("--" + m.replace("_", "-")
                                                               for m in missing))


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_diagnose(args):
    what = args.what
    if what == "vg":
        _need(args, "p", "d")
        pk = vg_packing(args.p, args.d, seed=args.seed)
        pair_ok, card_ok = pk.verify()
        _print_json({"p": pk.p, "d": pk.d, "size": int(pk.omega.shape[0]),
                     "log_card": pk.log_card, "log_bound": pk.bound, "method": pk.method,
                     "pairwise_ok": pair_ok, "cardinality_ok": card_ok,
                     "supports": [np.flatnonzero(w).tolist() for w in pk.omega]})
        return EXIT_OK
    if what == "constants":
        _need(args, "s", "gamma", "sigma", "lam", "kappa", "delta")
        target = rio.load_matrix(args.X) if args.X else args.p
        if target is None:
            raise ArgumentError("constants need --X or --p")
        lc = lasso_constants(target, args.s, args.gamma, args.sigma, args.lam, args.kappa,
                             args.delta)
        d = lc.to_dict()
        if args.n:
            d["beta_min"] = lc.beta_min(args.lam, args.n)
        d["alpha"] = lc.alpha()
        _print_json(d)
        return EXIT_OK
    _need(args, "X")
    X = rio.load_matrix(args.X)
    if what == "rip":
        _need(args, "s")
        _print_json(rip_delta(X, args.s, args.budget, seed=args.seed).to_dict())
    elif what == "compat":
        _need(args, "T")
        rep = compatibility_constant(X, _int_list(args.T), args.c0, seed=args.seed)
        _print_json(rep.to_dict())
    else:
        _need(args, "s")
        _print_json(re_constant(X, args.s, args.c0, restarts=args.restarts,
                                seed=args.seed).to_dict())
    return EXIT_OK


def cmd_mc(args):
    inst = rio.load_instance(args.instance)
    mc = McConfig(reps=args.reps, master_seed=args.seed, t_grid=args.grid,
                  confidence=args.confidence, bootstrap=args.bootstrap, sigma=args.sigma)
    cfg = CurveConfig(solver=_solver_cfg(args))
    fc = estimate_f_curve(inst, mc, cfg, sigma=args.sigma)
    sig = args.sigma if args.sigma is not None else inst.sigma
    sample = sample_risks(inst, mc, cfg.solver, sigma=sig)
    out = {"f_curve": fc.to_dict(),
           "risks": {k: v for k, v in sample.to_dict().items() if k != "risks"},
           "concentration": concentration_check(sample, sig, [0.5, 1.0, 2.0], mc.confidence),
           "tf_proximity": tf_proximity_check(fc, sample, sig, mc.confidence)}
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "f_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "f_hat", "stderr"))
            for t, f, s in zip(fc.grid, fc.f_hat, fc.stderr):
                w.writerow((repr(float(t)), repr(float(f)), repr(float(s))))
        rio.save_vector(d / "risks.csv", sample.risks)
        rio.save_json(d / "mc.json", out)
    _print_json(out)
    return EXIT_OK


def cmd_experiment(args):
    code, reports = run_all(args.config, args.out)
    for rep in reports:
        sys.stderr.write(f"{rep.label}: {rep.verdict}" + (f" ({rep.reason})" if rep.reason
                                                          else "") + "\n")
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="riskscope",
                                 description="Prediction-error curves and bounds for "
                                             "convex penalized least squares.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_opts(p):
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--method", default="auto",
                       choices=("auto", "fista", "coordinate_descent", "projected_gradient",
                                "closed_form"))

    p = sub.add_parser("solve", help="minimize the penalized least-squares objective")
    p.add_argument("--instance", required=True)
    p.add_argument("--y", help="response CSV (default: X beta* + instance noise)")
    solver_opts(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("curve", help="evaluate M, F, G or H on a grid")
    p.add_argument("--which", required=True, choices=("F", "G", "H", "M"))
    p.add_argument("--grid", required=True, help="t0:t1:steps or geom:t0:t1:steps")
    p.add_argument("--instance", required=True)
    p.add_argument("--eps", help="noise CSV (default: instance noise)")
    p.add_argument("--risk", type=float, help="risk used by G (default: solve)")
    solver_opts(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("certify", help="upper or lower bound on the prediction error")
    p.add_argument("--kind", required=True,
                   choices=("fixed-point", "t0gamma", "almost-fp", "norm-dual", "limit"))
    p.add_argument("--instance", required=True)
    p.add_argument("--eps")
    p.add_argument("--t0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t-max", dest="t_max", type=float, default=1.0)
    solver_opts(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("diagnose", help="design constants")
    p.add_argument("--what", required=True, choices=("rip", "compat", "re", "vg", "constants"))
    p.add_argument("--X", help="design CSV")
    p.add_argument("--s", type=int)
    p.add_argument("--T", help="comma-separated support")
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--p", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--budget", type=int, default=1_000_000)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("mc", help="Monte Carlo estimate of f and t_f")
    p.add_argument("--instance", required=True)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid")
    p.add_argument("--sigma", type=float)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--out", help="directory for f_curve.csv, risks.csv and mc.json")
    solver_opts(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("experiment", help="run an experiment bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="reports")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ConfigError, ArgumentError, DegenerateDesignError) as exc:
        sys.stderr.write(f"riskscope: error: {exc}\n")
        return EXIT_INPUT
    except (ConvergenceError, NumericError) as exc:
        sys.stderr.write(f"riskscope: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except CapabilityError as exc:
        sys.stderr.write(f"riskscope: not available: {exc}\n")
        return EXIT_CAPABILITY


if __name__ == "__main__":
    sys.exit(main())
