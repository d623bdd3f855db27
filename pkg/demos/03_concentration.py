"""The prediction error concentrates around t_f, the maximizer of f = E F.

Run: python3 demos/03_concentration.py
"""
import math

import numpy as np

from riskscope import (
    GaussianNoise, McConfig, ProblemInstance, ScaledL1, Zero, concentration_check,
    estimate_f_curve, sample_risks, tf_proximity_check,
)

# least squares with n = 1: the risk is |eps| and t_f = sqrt(2/pi)
hn = ProblemInstance(np.eye(1), np.zeros(1), GaussianNoise(1.0, 0), Zero())
fc = estimate_f_curve(hn, McConfig(reps=3000, master_seed=1, t_grid="0:2:11"))
print(f"n=1: t_f_hat={fc.t_f_hat:.4f} (exact {math.sqrt(2 / math.pi):.4f}), "
      f"99% CI [{fc.t_f_ci[0]:.4f}, {fc.t_f_ci[1]:.4f}]")

rng = np.random.default_rng(2)
X = rng.standard_normal((30, 60))
beta = np.zeros(60)
beta[:3] = 2.0
inst = ProblemInstance(X, beta, GaussianNoise(1.0, 0), ScaledL1(1.0, 30))
fc = estimate_f_curve(inst, McConfig(reps=300, master_seed=3, t_grid="0:16:17", bootstrap=100))
s = sample_risks(inst, McConfig(reps=2000, master_seed=4))
print(f"Lasso 30x60: t_f_hat={fc.t_f_hat:.3f}, median risk={s.median_hat:.3f}, "
      f"mean risk={s.mean_hat:.3f}")
chk = tf_proximity_check(fc, s, 1.0)
print(f"    |sqrt t_f - sqrt median| = {chk['gap_median']:.3f} (limit {chk['limit_median']:.2f})")
print(f"    |sqrt t_f - sqrt mean|   = {chk['gap_mean']:.3f} (limit {chk['limit_mean']:.2f})")

rep = concentration_check(s, 1.0, [0.5, 1.0, 2.0])
print("    tails around the median vs the Gaussian tail P(N(0,1) >= x):")
for row in rep["rows"]:
    print(f"      x={row['x']:.1f}  above {row['upper_freq']:.4f}  below {row['lower_freq']:.4f}"
          f"  gaussian {row['gaussian_tail']:.4f}")
