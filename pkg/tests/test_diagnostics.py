import itertools
import math

import numpy as np
import pytest
from scipy.stats import chi

from riskscope.diagnostics import (
    c0_from_gamma, compat_ratio, compatibility_constant, construct_compatibility_adversary,
    lambda_asymptotic, lambda_threshold, lasso_constants, re_constant, re_tail, rip_delta,
    vg_log_bound, vg_packing,
)
from riskscope.errors import ArgumentError, DegenerateDesignError


def _orthonormal(n, p, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
    return math.sqrt(n) * Q


def test_rip_orthonormal_is_zero():
    X = _orthonormal(12, 6)
    for s in (1, 3, 6):
        assert rip_delta(X, s).delta_s <= 1e-12


def test_rip_two_columns():
    rho = 0.5
    n = 4
    a = np.array([1.0, 0, 0, 0])
    b = np.array([rho, math.sqrt(1 - rho ** 2), 0, 0])
    X = math.sqrt(n) * np.column_stack([a, b])
    assert rip_delta(X, 2).delta_s == pytest.approx(1 - math.sqrt(0.5), abs=1e-8)


def test_rip_exhaustive_equals_sampled_at_full_budget():
    X = np.random.default_rng(1).standard_normal((8, 10))
    ex = rip_delta(X, 2)
    sm = rip_delta(X, 2, budget=math.comb(10, 2), seed=3, method="sampled")
    assert ex.method == "exhaustive" and sm.method == "sampled"
    assert sm.delta_s == pytest.approx(ex.delta_s, abs=1e-12)
    # with replacement and a small budget the estimate can only be lower
    lo = rip_delta(X, 2, budget=20, seed=3)
    assert lo.method == "sampled" and lo.delta_s <= ex.delta_s + 1e-12


def test_rip_definition_on_supports():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((10, 7))
    rep = rip_delta(X, 3)
    d = rep.delta_s
    n = 10
    for S in itertools.combinations(range(7), 3):
        for _ in range(100 // 35 + 1):
            b = np.zeros(7)
            b[list(S)] = rng.standard_normal(3)
            r = np.linalg.norm(X @ b) / math.sqrt(n) / np.linalg.norm(b)
            assert 1 - d - 1e-12 <= r <= 1 + d + 1e-12
    # equality approached on the worst support
    S = list(rep.worst_support)
    sv = np.linalg.svd(X[:, S] / math.sqrt(n), compute_uv=False)
    assert max(1 - sv[-1], sv[0] - 1) == pytest.approx(d, abs=1e-6)


def test_rip_bad_s():
    with pytest.raises(ArgumentError):
        rip_delta(np.eye(3), 4)


def test_compatibility_identity():
    n = 8
    X = math.sqrt(n) * np.eye(n)
    for T, c0 in (([0], 1.0), ([1, 4], 1.0), ([0, 2, 5], 3.0)):
        rep = compatibility_constant(X, T, c0)
        assert rep.value == pytest.approx(1.0, abs=1e-6)
        u = rep.minimizer_u
        assert np.allclose(np.delete(u, T), 0, atol=1e-8)
        assert np.allclose(np.abs(u[T]), np.abs(u[T[0]]), rtol=1e-6)
        assert compat_ratio(X, T, c0, u) == pytest.approx(rep.value, abs=1e-8)


def test_compatibility_one_dimensional():
    X = np.array([[3.0], [4.0]])
    rep = compatibility_constant(X, [0], 1.0)
    assert rep.value == pytest.approx(5.0 / math.sqrt(2), abs=1e-8)


def test_compatibility_duplicated_column():
    # col 0 in T duplicated by col 1 outside T: the ratio along u = (1, -(1 - e))
    # is sqrt|T| ||x|| / sqrt(n) for every e, so the infimum is that value, not 0
    rng = np.random.default_rng(2)
    x = rng.standard_normal(6)
    X = np.column_stack([x, x, rng.standard_normal((6, 3))])
    rep = compatibility_constant(X, [0], 1.0)
    assert rep.value <= np.linalg.norm(x) / math.sqrt(6) + 1e-6
    u = np.array([1.0, -0.999, 0, 0, 0])
    assert compat_ratio(X, [0], 1.0, u) == pytest.approx(np.linalg.norm(x) / math.sqrt(6))


def test_re_identity_and_null_column():
    n = 6
    assert re_constant(math.sqrt(n) * np.eye(n), 2, 3.0).value == pytest.approx(1.0, abs=1e-6)
    X = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert re_constant(X, 1, 1.0).value <= 1e-10


def test_re_cone_feasibility_and_ordering():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((20, 40))
    s, c0 = 3, c0_from_gamma(0.5)
    rep = re_constant(X, s, c0, restarts=5)
    a = rep.minimizer_u
    assert re_tail(a, s) <= c0 * math.sqrt(s) * np.linalg.norm(a) + 1e-9
    val = np.linalg.norm(X @ a) / (math.sqrt(20) * np.linalg.norm(a))
    assert val == pytest.approx(rep.value, abs=1e-8)
    d = rip_delta(X, s).delta_s
    assert rep.value <= 1 + d + 1e-6


def test_lasso_constants():
    assert c0_from_gamma(1.0) == pytest.approx(2 + math.sqrt(3))
    p, s = 200, 4
    lc = lasso_constants(p, s, 0.5, 1.0, 1e12, 1.0, 0.0)
    lg = math.log(9 * math.e * p / s)
    assert lc.C_bar == pytest.approx(1 + math.sqrt(3) / math.sqrt(lg), rel=1e-9)
    assert lc.C_under == 1.0
    assert lc.lambda_threshold == pytest.approx(1.5 * (1 + math.sqrt(2 * lg)))
    assert lambda_threshold(p, s, 0.5, 2.0, 0.1) == pytest.approx(
        2 * 1.5 * 1.1 * (1 + math.sqrt(2 * lg)))
    assert lambda_asymptotic(500, 3, 0.5, 1.0) == pytest.approx(2 * math.sqrt(2 * math.log(500 / 3)))
    with pytest.raises(ArgumentError):
        lasso_constants(p, s, 0.5, 1.0, 1.0, 0.0, 0.0)
    with pytest.raises(ArgumentError):
        lasso_constants(1, 5, 0.5, 1.0, 1.0, 1.0, 0.0)


def test_adversary_identity_n1():
    adv = construct_compatibility_adversary(np.array([[1.0]]), [0], 1.0, 1.0)
    q = chi.ppf(0.99, 1)
    assert adv.phi == pytest.approx(1.0)
    assert adv.gamma == pytest.approx(1 / 200)
    assert adv.t0 == pytest.approx((q + 1) ** 2 * 200)
    assert adv.beta_star[0] == pytest.approx(-adv.t0 * abs(adv.u[0]) * np.sign(adv.u[0]))
    beta, t0, gamma = adv
    assert abs(beta[0]) == pytest.approx(t0)


def test_adversary_degenerate():
    X = np.column_stack([np.zeros(5), np.random.default_rng(0).standard_normal((5, 3))])
    with pytest.raises(DegenerateDesignError):
        construct_compatibility_adversary(X, [0], 1.0, 1.0)


@pytest.mark.parametrize("p,d", [(10, 1), (25, 2), (100, 5), (200, 10)])
def test_vg_packing(p, d):
    pk = vg_packing(p, d)
    pair_ok, card_ok = pk.verify()
    assert pair_ok and card_ok
    assert pk.log_card >= 0.5 * d * math.log(p / (5 * d))
    W = pk.omega.astype(int)
    assert np.all(W.sum(1) == d)
    for i in range(len(W)):
        dist = ((W[i + 1:] - W[i]) ** 2).sum(1)
        assert np.all(dist > d)


def test_vg_examples():
    pk = vg_packing(10, 1)
    assert pk.omega.shape[0] == 10
    assert vg_packing(25, 2).omega.shape[0] >= 3
    assert math.exp(vg_log_bound(25, 2)) == pytest.approx(2.5)
    with pytest.raises(ArgumentError):
        vg_packing(10, 2)
