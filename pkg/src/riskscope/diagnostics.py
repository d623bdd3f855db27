"""Sparse-design constants: RIP, compatibility, restricted eigenvalue.

Also the Lasso constants built from them, the adversarial target used for
the compatibility lower bound, and a Varshamov-Gilbert packing.

The compatibility and RE constants are infima of nonconvex programs. We
report the objective at a feasible point, i.e. an upper estimate; nothing
here certifies a lower bound on them.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb
from scipy.stats import chi

from .errors import ArgumentError, DegenerateDesignError, RiskscopeError
from .linalg import power_iteration
from .model import philox

log = logging.getLogger(__name__)

SIGN_BUDGET = 2 ** 12


def _design(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ArgumentError("X must be a nonempty 2-D array")
    if not np.all(np.isfinite(X)):
        raise ArgumentError("X has non-finite entries")
    return X


# -- RIP -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RipReport:
    s: int
    delta_s: float
    worst_support: tuple
    method: str
    inspected: int = 0
    flags: tuple = ()

    def to_dict(self):
        return {"s": self.s, "delta_s": self.delta_s, "worst_support": list(self.worst_support),
                "method": self.method, "inspected": self.inspected, "flags": list(self.flags)}


def _support_deltas(G, supports):
    """delta for each row of ``supports`` (an (m, s) index array) from the Gram/n matrix."""
    sub = G[supports[:, :, None], supports[:, None, :]]
    ev = np.linalg.eigvalsh(sub)
    ev = np.clip(ev, 0.0, None)
    lo = np.sqrt(ev[:, 0])
    hi = np.sqrt(ev[:, -1])
    return np.maximum(1.0 - lo, hi - 1.0)


def rip_delta(X, s, budget=1_000_000, *, seed=0, local_search=True, chunk=50_000,
              method="auto"):
    """RIP constant of order ``s`` of ``X``.

    Exhaustive over all supports of size ``s`` when there are at most
    ``budget`` of them; otherwise ``budget`` uniformly random supports
    followed by a swap-based hill climb from the worst one. The sampled
    value is a lower estimate of the true constant.

    ``method="sampled"`` forces sampling; when the budget covers every
    support the draws are made without replacement.
    """
    X = _design(X)
    n, p = X.shape
    s = int(s)
    if not 1 <= s <= p:
        raise ArgumentError(f"need 1 <= s <= p, got s={s}, p={p}")
    G = X.T @ X / n
    if method not in ("auto", "exhaustive", "sampled"):
        raise ArgumentError(f"unknown method {method!r}")
    total = comb(p, s, exact=True)
    best, worst = -1.0, None
    if method == "sampled" and total <= budget:
        # sampling without replacement from the full support list
        rng = philox(seed, s, p)
        allS = np.array(list(itertools.combinations(range(p), s)), dtype=np.int64)
        order = rng.permutation(total)[: int(budget)]
        d = _support_deltas(G, allS[order])
        k = int(np.argmax(d))
        return RipReport(s, max(float(d[k]), 0.0), tuple(int(j) for j in allS[order[k]]),
                         "sampled", int(order.size), ("lower_estimate",))
    if total <= budget or method == "exhaustive":
        it = itertools.combinations(range(p), s)
        inspected = 0
        while True:
            block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
            if block.size == 0:
                break
            d = _support_deltas(G, block.reshape(-1, s))
            k = int(np.argmax(d))
            inspected += block.shape[0]
            if d[k] > best:
                best, worst = float(d[k]), tuple(int(j) for j in block[k])
        return RipReport(s, max(best, 0.0), worst, "exhaustive", inspected)

    rng = philox(seed, s, p)
    inspected = 0
    remaining = int(budget)
    while remaining > 0:
        m = min(chunk, remaining)
        block = np.sort(rng.integers(0, p, size=(m, s)), axis=1)
        if s > 1:
            # rejection of supports with repeated indices
            block = block[np.all(np.diff(block, axis=1) > 0, axis=1)]
        d = _support_deltas(G, block)
        k = int(np.argmax(d))
        if d[k] > best:
            best, worst = float(d[k]), tuple(int(j) for j in block[k])
        inspected += block.shape[0]
        remaining -= m
    if local_search:
        best, worst, extra = _rip_hill_climb(G, worst, best)
        inspected += extra
    return RipReport(s, max(best, 0.0), worst, "sampled", inspected, ("lower_estimate",))


def _rip_hill_climb(G, support, value, max_rounds=50):
    p = G.shape[0]
    cur = list(support)
    inspected = 0
    for _ in range(max_rounds):
        outside = np.setdiff1d(np.arange(p), cur)
        cands = []
        for i in range(len(cur)):
            base = np.array(cur)
            trial = np.repeat(base[None, :], outside.size, axis=0)
            trial[:, i] = outside
            cands.append(trial)
        cands = np.sort(np.concatenate(cands), axis=1)
        d = _support_deltas(G, cands)
        inspected += cands.shape[0]
        k = int(np.argmax(d))
        if d[k] <= value:
            break
        value, cur = float(d[k]), [int(j) for j in cands[k]]
    return value, tuple(cur), inspected


# -- cone constants ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConeConstantReport:
    value: float
    minimizer_u: np.ndarray
    c0: float
    certificate_side: str = "upper_estimate"
    flags: tuple = ()
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "minimizer_u": [float(x) for x in self.minimizer_u],
                "c0": self.c0, "certificate_side": self.certificate_side,
                "flags": list(self.flags), "details": dict(self.details)}


def compat_ratio(X, T, c0, u):
    """The ratio inside the compatibility infimum; +inf outside the open cone."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    mask = np.zeros(p, dtype=bool)
    mask[list(T)] = True
    den = np.abs(u[mask]).sum() - np.abs(u[~mask]).sum() / c0
    if not den > 0:
        return math.inf
    return math.sqrt(mask.sum()) * float(np.linalg.norm(X @ u)) / (math.sqrt(n) * den)


def _project_halfspace_orthant(z, g):
    """Euclidean projection onto {z >= 0, g'z >= 1}."""
    x = np.maximum(z, 0.0)
    if g @ x >= 1.0:
        return x

    def phi(theta):
        return float(g @ np.maximum(z + theta * g, 0.0))

    lo, hi = 0.0, 1.0
    while phi(hi) < 1.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    x = np.maximum(z + hi * g, 0.0)
    return x


def _sign_qp(A, g, L, z0, max_iter, tol):
    """min ||A z||^2 over {z >= 0, g'z >= 1} by FISTA, then an active-set polish."""
    step = 1.0 / L
    x = _project_halfspace_orthant(z0, g)
    y = x.copy()
    tk = 1.0
    for k in range(max_iter):
        grad = 2.0 * (A.T @ (A @ y))
        x_new = _project_halfspace_orthant(y - step * grad, g)
        if float((y - x_new) @ (x_new - x)) > 0:
            tk, y = 1.0, x_new.copy()
        else:
            tk_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            y = x_new + ((tk - 1.0) / tk_new) * (x_new - x)
            tk = tk_new
        moved = np.linalg.norm(x_new - x)
        x = x_new
        if moved <= tol * max(1.0, np.linalg.norm(x)):
            break
    best = x
    best_val = float(np.sum((A @ x) ** 2))
    # polish: equality-constrained least squares on the detected support
    S = np.flatnonzero(x > 1e-12 * max(1.0, x.max()))
    if S.size:
        AS = A[:, S]
        w = np.linalg.lstsq(AS.T @ AS, g[S], rcond=None)[0]
        gw = float(g[S] @ w)
        if gw > 0 and np.all(w >= 0):
            z = np.zeros_like(x)
            z[S] = w / gw
            val = float(np.sum((A @ z) ** 2))
            if val <= best_val:
                best, best_val = z, val
    return best, best_val


def compatibility_constant(X, T, c0, restarts=1, *, sign_budget=SIGN_BUDGET, seed=0,
                           max_iter=20_000, tol=1e-13):
    """Upper estimate of phi(T, c0).

    For each sign pattern of ``u_T`` the program is convex: with
    ``u_T = sign * a``, ``u_{T^c} = v+ - v-`` and ``a, v+, v- >= 0`` it reads
    ``min ||X u||^2`` subject to ``1'a - (1/c0) 1'(v+ + v-) >= 1``. Patterns
    ``s`` and ``-s`` are equivalent, so half of them are solved.
    """
    X = _design(X)
    n, p = X.shape
    T = sorted(set(int(j) for j in T))
    if not T:
        raise ArgumentError("T must be nonempty")
    if T[0] < 0 or T[-1] >= p:
        raise ArgumentError("T has indices outside [0, p)")
    if not c0 >= 1:
        raise ArgumentError(f"c0 must be >= 1, got {c0}")
    k = len(T)
    Tc = [j for j in range(p) if j not in set(T)]
    XT, XC = X[:, T], X[:, Tc]
    g = np.concatenate([np.ones(k), -np.ones(2 * len(Tc)) / c0])
    flags = []
    npat = 2 ** (k - 1)
    rng = philox(seed, k, p)
    if npat <= sign_budget:
        patterns = [np.array([1.0] + [1.0 - 2.0 * ((m >> i) & 1) for i in range(k - 1)])
                    for m in range(npat)]
    else:
        flags.append("sampled_signs")
        patterns = [np.concatenate([[1.0], rng.choice([-1.0, 1.0], size=k - 1)])
                    for _ in range(sign_budget)]
    L = 2.0 * power_iteration(np.hstack([XT, XC, -XC]).T @ np.hstack([XT, XC, -XC])) * 1.01
    L = max(L, 1e-300)
    best_val, best_u = math.inf, None
    for sg in patterns:
        A = np.hstack([XT * sg, XC, -XC])
        for r in range(max(1, int(restarts))):
            if r == 0:
                z0 = np.concatenate([np.ones(k) / k, np.zeros(2 * len(Tc))])
            else:
                z0 = np.abs(rng.standard_normal(k + 2 * len(Tc)))
            z, _ = _sign_qp(A, g, L, z0, max_iter, tol)
            u = np.zeros(p)
            u[T] = sg * z[:k]
            u[Tc] = z[k:k + len(Tc)] - z[k + len(Tc):]
            val = compat_ratio(X, T, c0, u)
            if val < best_val:
                best_val, best_u = val, u
    return ConeConstantReport(float(best_val), best_u, float(c0), flags=tuple(flags),
                              details={"T": T, "patterns": len(patterns)})


def re_tail(alpha, s):
    """Sum of the p - s smallest absolute entries."""
    a = np.sort(np.abs(alpha))
    return float(a[: max(a.size - s, 0)].sum())


def _re_repair(alpha, s, c0):
    """Scale the tail (entries outside the top ``s``) until the cone holds, then renormalize."""
    idx = np.argsort(-np.abs(alpha))
    head, tail = idx[:s], idx[s:]
    nrm = np.linalg.norm(alpha)
    if nrm == 0:
        alpha = np.zeros_like(alpha)
        alpha[0] = 1.0
        nrm = 1.0
    a = alpha / nrm
    if re_tail(a, s) <= c0 * math.sqrt(s) * (1 - 1e-12):
        return a
    hn = np.linalg.norm(a[head])
    if hn == 0:
        a = np.zeros_like(a)
        a[head[0]] = 1.0
        return a
    tl1 = np.abs(a[tail]).sum()
    tl2 = np.linalg.norm(a[tail])
    # want theta * tl1 <= c0 sqrt(s) sqrt(hn^2 + theta^2 tl2^2); solve the quadratic
    c = c0 * math.sqrt(s) * (1 - 1e-12)
    denom = tl1 * tl1 - c * c * tl2 * tl2
    if denom <= 0:
        theta = 1.0
    else:
        theta = min(1.0, c * hn / math.sqrt(denom))
    b = a.copy()
    b[tail] *= theta
    return b / np.linalg.norm(b)


def re_constant(X, s, c0, restarts=20, *, seed=0, iters=500):
    """Upper estimate of kappa(c0, s) by projected gradient on the sphere.

    Starts: the smallest right singular vector of X, the worst vectors of a few
    sampled size-s supports, and random Gaussian directions. Each iterate is
    pushed back into the cone by shrinking its tail.
    """
    X = _design(X)
    n, p = X.shape
    s = int(s)
    if not 1 <= s <= p:
        raise ArgumentError(f"need 1 <= s <= p, got s={s}")
    if not c0 > 0:
        raise ArgumentError("c0 must be positive")
    Q = X.T @ X / n
    L = max(power_iteration(Q), 1e-300)
    rng = philox(seed, s, p)

    def ratio(a):
        return float(np.linalg.norm(X @ a)) / (math.sqrt(n) * float(np.linalg.norm(a)))

    starts = []
    _, _, Vt = np.linalg.svd(X, full_matrices=True)
    starts.append(Vt[-1])
    for _ in range(max(1, restarts // 2)):
        S = rng.choice(p, size=s, replace=False)
        w, V = np.linalg.eigh(Q[np.ix_(S, S)])
        a = np.zeros(p)
        a[S] = V[:, 0]
        starts.append(a)
    for _ in range(max(1, restarts - len(starts))):
        starts.append(rng.standard_normal(p))

    best_val, best_a = math.inf, None
    for a0 in starts:
        a = _re_repair(a0, s, c0)
        val = ratio(a)
        for _ in range(iters):
            cand = _re_repair(a - 0.5 * (Q @ a) / L, s, c0)
            cv = ratio(cand)
            if cv > val - 1e-15:
                break
            a, val = cand, cv
        if val < best_val:
            best_val, best_a = val, a
    return ConeConstantReport(float(best_val), best_a, float(c0), flags=("upper_estimate",),
                              details={"s": s, "starts": len(starts)})


# -- Lasso constants -----------------------------------------------------------

@dataclass(frozen=True)
class LassoConstants:
    gamma: float
    c0: float
    C_bar: float
    C_under: float
    lambda_threshold: float

    def beta_min(self, lam, n):
        """Smallest nonzero magnitude required of the target for the lower bound."""
        return (2 * self.C_under - self.C_bar) * self.C_under * lam / math.sqrt(n)

    def alpha(self):
        return math.sqrt(max(self.C_bar / self.C_under - 1.0, 0.0))

    def to_dict(self):
        return {"gamma": self.gamma, "c0": self.c0, "C_bar": self.C_bar,
                "C_under": self.C_under, "lambda_threshold": self.lambda_threshold}


def c0_from_gamma(gamma):
    if not gamma > 0:
        raise ArgumentError("gamma must be positive")
    return (1.0 + gamma + math.sqrt(3.0)) / gamma


def lambda_threshold(p, s, gamma, sigma, delta_s):
    return sigma * (1 + gamma) * (1 + delta_s) * (1 + math.sqrt(2 * _log9eps(p, s)))


def lambda_asymptotic(p, s, gamma, sigma):
    if not 0 < s < p:
        raise ArgumentError("need 0 < s < p")
    return sigma * (1 + 2 * gamma) * math.sqrt(2 * math.log(p / s))


def _log9eps(p, s):
    if not (1 <= s <= p):
        raise ArgumentError(f"need 1 <= s <= p, got s={s}, p={p}")
    v = math.log(9 * math.e * p / s)
    if not v > 0:
        raise ArgumentError("log(9ep/s) must be positive")
    return v


def lasso_constants(X, s, gamma, sigma, lam, kappa_est, delta_s_est):
    """c0, C_bar, C_under and the tuning threshold from estimated design constants.

    ``X`` only supplies ``p``. Pure arithmetic on the supplied estimates.
    """
    p = np.shape(X)[1] if np.ndim(X) == 2 else int(X)
    for name, v in (("gamma", gamma), ("sigma", sigma), ("lam", lam), ("kappa_est", kappa_est)):
        if not v > 0:
            raise ArgumentError(f"{name} must be positive, got {v}")
    if not delta_s_est >= 0:
        raise ArgumentError("delta_s_est must be nonnegative")
    lg = _log9eps(p, s)
    c0 = c0_from_gamma(gamma)
    C_under = sigma / (1 + delta_s_est)
    C_bar = (sigma / kappa_est) * (
        1 + sigma * kappa_est * (math.sqrt(s) + 2 * math.sqrt(math.log(3))) / (lam * math.sqrt(s))
        + math.sqrt(3) / math.sqrt(lg))
    return LassoConstants(float(gamma), c0, C_bar, C_under,
                          lambda_threshold(p, s, gamma, sigma, delta_s_est))


# -- adversarial target ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Adversary:
    beta_star: np.ndarray
    t0: float
    gamma: float
    phi: float
    u: np.ndarray
    q: float
    threshold: float

    def __iter__(self):
        return iter((self.beta_star, self.t0, self.gamma))


def chi_quantile(prob, n, sigma=1.0):
    """``sigma`` times the ``prob`` quantile of the chi distribution with ``n`` d.o.f."""
    return float(sigma * chi.ppf(prob, n))


def construct_compatibility_adversary(X, T, lam, sigma, q_prob=0.99, *, compat=None):
    """Target vector on ``T`` for which the Lasso risk is large with probability >= 0.49.

    ``u`` is the best compatibility direction found (c0 = 1), rescaled so that
    ``||X u|| = 1``; ``gamma = lam sqrt|T| / (200 phi)``,
    ``t0 = (q + lam sqrt|T| / phi)^2 / gamma`` with ``q`` the ``q_prob``
    quantile of ``||eps||``, and ``beta*_T = -t0 u_T``.
    """
    X = _design(X)
    n, p = X.shape
    if not lam > 0:
        raise ArgumentError("lam must be positive")
    if not sigma > 0:
        raise ArgumentError("sigma must be positive")
    if not 0 < q_prob < 1:
        raise ArgumentError("q_prob must lie in (0, 1)")
    rep = compat if compat is not None else compatibility_constant(X, T, 1.0)
    phi = rep.value
    if not phi > 1e-10:
        raise DegenerateDesignError(f"compatibility estimate {phi:.3e} is too small")
    u = rep.minimizer_u
    u = u / np.linalg.norm(X @ u)
    T = sorted(set(int(j) for j in T))
    k = len(T)
    # phi recomputed at the normalized direction; the construction uses it exactly
    phi = compat_ratio(X, T, 1.0, u)
    q = chi_quantile(q_prob, n, sigma)
    gamma = lam * math.sqrt(k) / (200 * phi)
    t0 = (q + lam * math.sqrt(k) / phi) ** 2 / gamma
    beta = np.zeros(p)
    beta[T] = -t0 * u[T]
    return Adversary(beta, t0, gamma, phi, u, q, 0.99 * lam * math.sqrt(k) / phi)


# -- Varshamov-Gilbert ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VgPacking:
    d: int
    p: int
    omega: np.ndarray
    log_card: float
    method: str = "enumerated"

    @property
    def bound(self):
        return vg_log_bound(self.p, self.d)

    def verify(self):
        """(pairwise condition holds, cardinality condition holds)."""
        W = self.omega.astype(np.int64)
        ok_weight = bool(np.all(W.sum(axis=1) == self.d))
        inter = W @ W.T
        np.fill_diagonal(inter, 0)
        # ||w - w'||^2 = 2 (d - |w & w'|)
        pair_ok = bool(np.all(2 * (self.d - inter[~np.eye(len(W), dtype=bool)]) > self.d))
        return ok_weight and pair_ok, self.log_card >= self.bound


def vg_log_bound(p, d):
    return 0.5 * d * math.log(p / (5.0 * d))


def vg_packing(p, d, *, seed=0, enum_budget=200_000, max_draws=10_000_000):
    """Weight-``d`` binary vectors of length ``p`` with pairwise squared distance > d.

    When there are at most ``enum_budget`` candidates they are all visited in
    a seeded random order (a maximal greedy packing). Otherwise random
    supports are drawn until the cardinality ``(p/(5d))^(d/2)`` is reached.
    """
    p, d = int(p), int(d)
    if not (d >= 1 and 5 * d < p):
        raise ArgumentError(f"need 1 <= d < p/5, got p={p}, d={d}")
    need = math.ceil(math.exp(vg_log_bound(p, d)) - 1e-12)
    rng = philox(seed, p, d)
    total = comb(p, d, exact=True)
    kept = []
    kept_mat = np.zeros((0, p), dtype=np.int64)

    def try_add(S):
        nonlocal kept_mat
        w = np.zeros(p, dtype=np.int64)
        w[list(S)] = 1
        if kept_mat.shape[0] and np.any(2 * (d - kept_mat @ w) <= d):
            return
        kept.append(w)
        kept_mat = np.vstack([kept_mat, w])

    if total <= enum_budget:
        cands = list(itertools.combinations(range(p), d))
        for i in rng.permutation(len(cands)):
            try_add(cands[i])
        method = "enumerated"
    else:
        draws = 0
        while len(kept) < need and draws < max_draws:
            try_add(np.sort(rng.choice(p, size=d, replace=False)))
            draws += 1
        method = "sampled"
    omega = np.array(kept, dtype=np.int8).reshape(-1, p)
    if len(kept) == 0 or math.log(len(kept)) < vg_log_bound(p, d):
        raise RiskscopeError(
            f"packing has {len(kept)} vectors, below the guaranteed {need}; this is a bug")
    return VgPacking(d, p, omega, math.log(len(kept)), method)
