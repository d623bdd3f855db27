"""Curves F and H for one Lasso fit, and the bounds they give on the prediction error.

Run: python3 demos/01_curves_and_bounds.py
"""
import numpy as np

from riskscope import (
    CurveEvaluator, GaussianNoise, ProblemInstance, ScaledL1, almost_fixed_point_lower,
    fixed_point_upper, norm_dual_lower, solve,
)

rng = np.random.default_rng(0)
n, p = 40, 80
X = rng.standard_normal((n, p))
beta = np.zeros(p)
beta[:4] = [3.0, -2.0, 1.5, 1.0]

for lam in (0.5, 2.0, 8.0):
    inst = ProblemInstance(X, beta, GaussianNoise(1.0, seed=3), ScaledL1(lam, n))
    eps = inst.eps()
    risk = solve(inst).risk
    ev = CurveEvaluator(inst, eps)

    # F peaks at the prediction error
    ts = np.linspace(0, 3 * risk, 31)
    F = [ev.F(t).value for t in ts]
    t_peak = ts[int(np.argmax(F))]

    up = fixed_point_upper(inst, eps, ev)
    nd = norm_dual_lower(inst, eps, ev)
    best = 0.0
    for alpha in (0.05, 0.1, 0.2):
        c = almost_fixed_point_lower(inst, eps, up.bound, alpha, ev)
        if c.verified:
            best = max(best, c.bound)

    print(f"lambda={lam:4.1f}  risk={risk:.4f}  grid argmax of F={t_peak:.4f}")
    print(f"    upper (fixed point of H) {up.bound:.4f}")
    print(f"    lower (norm dual)        {nd.bound:.4f}")
    print(f"    lower (almost fp)        {best:.4f}")
    print(f"    H at 0.5r, r, 2r: " + ", ".join(f"{ev.H(k * risk).value:.4f}"
                                               for k in (0.5, 1.0, 2.0)))
print()
print("H is non-increasing and crosses the diagonal at or above the prediction error.")
print("The norm-dual bound shrinks to zero once lambda dominates the noise.")
