"""Design constants for the Lasso at small scale.

RIP is exact by enumeration when the number of supports is small and a
sampled lower estimate otherwise. Compatibility and restricted eigenvalue
values are attained (feasible) ratios, so they are upper estimates of the
true infima.

Run: python3 demos/02_lasso_diagnostics.py
"""
import numpy as np

from riskscope import (
    compatibility_constant, construct_compatibility_adversary, lasso_constants, re_constant,
    rip_delta, vg_packing,
)

rng = np.random.default_rng(1)
for n, p in ((60, 20), (60, 60), (60, 120)):
    X = rng.standard_normal((n, p))
    rip = rip_delta(X, 2, budget=20_000)
    phi = compatibility_constant(X, [0, 1, 2], 1.0)
    kap = re_constant(X, 2, 3.0, restarts=10)
    print(f"n={n:3d} p={p:3d}  delta_2={rip.delta_s:.3f} ({rip.method})  "
          f"phi(T,1)={phi.value:.3f}  kappa(3,2)={kap.value:.3f}")

X = rng.standard_normal((60, 120))
kap = re_constant(X, 2, 3.0, restarts=10).value
delta = rip_delta(X, 2, budget=20_000).delta_s
lc = lasso_constants(X, 2, 0.5, 1.0, 5.0, kap, delta)
print()
print("Lasso constants at lambda=5, gamma=0.5:")
for k, v in lc.to_dict().items():
    print(f"    {k:18s} {v:.4f}")

adv = construct_compatibility_adversary(X, [0, 1, 2], lam=1.0, sigma=1.0)
print()
print(f"adversarial target: t0={adv.t0:.1f}, gamma={adv.gamma:.4f}, "
      f"risk threshold {adv.threshold:.4f}")

pk = vg_packing(100, 5)
print(f"Varshamov-Gilbert packing p=100 d=5: {pk.omega.shape[0]} supports, "
      f"log size {pk.log_card:.2f} >= {pk.bound:.2f}; verified {pk.verify()}")
