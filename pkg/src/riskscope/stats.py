"""Small statistical helpers: exact binomial bands and Gaussian tails."""
import math

import numpy as np
from scipy.stats import beta, binom, norm

from .errors import ArgumentError


def _check(k, n, confidence):
    if not (0 <= k <= n and n >= 1):
        raise ArgumentError(f"need 0 <= k <= n, n >= 1; got k={k}, n={n}")
    if not 0 < confidence < 1:
        raise ArgumentError("confidence must lie in (0, 1)")


def cp_lower(k, n, confidence=0.99):
    """One-sided Clopper-Pearson lower confidence bound for a binomial proportion."""
    _check(k, n, confidence)
    if k == 0:
        return 0.0
    return float(beta.ppf(1 - confidence, k, n - k + 1))


def cp_upper(k, n, confidence=0.99):
    """One-sided Clopper-Pearson upper confidence bound."""
    _check(k, n, confidence)
    if k == n:
        return 1.0
    return float(beta.ppf(confidence, k + 1, n - k))


def gaussian_tail(x):
    """P(N(0,1) >= x)."""
    return float(norm.sf(x))


def z_quantile(confidence):
    return float(norm.ppf(confidence))


def median_ci(sorted_values, confidence=0.99):
    """Distribution-free two-sided interval for the median from order statistics."""
    v = np.asarray(sorted_values, dtype=float)
    n = v.size
    if n < 2:
        raise ArgumentError("need at least two values")
    a = (1 - confidence) / 2
    lo = int(binom.ppf(a, n, 0.5))
    hi = int(binom.isf(a, n, 0.5))
    lo = min(max(lo - 1, 0), n - 1)
    hi = min(max(hi, 0), n - 1)
    return float(v[lo]), float(v[hi])


def reps_for_band(p, rel_width=0.25, confidence=0.99):
    """Replications needed for a normal-approximation band of ``rel_width * p`` around ``p``."""
    if not 0 < p < 1:
        return math.inf
    z = z_quantile(confidence)
    return int(math.ceil(z * z * (1 - p) / (p * rel_width * rel_width)))
