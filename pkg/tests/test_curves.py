import math

import numpy as np
import pytest

from riskscope.curves import (
    CurveConfig, CurveEvaluator, critical_radius, eval_F, eval_G, eval_H, eval_M,
    eval_M_validation,
)
from riskscope.errors import ArgumentError, CapabilityError
from riskscope.model import (
    Ball, Box, FixedNoise, ProblemInstance, ScaledL1, Singleton, SquaredL2, Sum, Zero,
    eval_penalty,
)
from riskscope.solver import solve

from conftest import random_instance


def _ls(eps=(3.0, 4.0)):
    return ProblemInstance(np.eye(2), np.zeros(2), FixedNoise(eps), Zero())


def test_least_squares_curves():
    inst = _ls()
    eps = inst.eps()
    assert eval_M(inst, eps, 1.0).value == pytest.approx(5.0, abs=1e-12)
    assert eval_F(inst, eps, 5.0).value == pytest.approx(12.5, abs=1e-12)
    for t in (0.01, 0.3, 1.0, 7.0, 250.0):
        assert eval_H(inst, eps, t).value == pytest.approx(5.0, abs=1e-10)
        assert eval_G(inst, eps, t, 5.0).value == pytest.approx(0.0, abs=1e-9)


def test_t_zero_injective(rng):
    inst = random_instance(rng, 6, 3, "l1")
    eps = inst.eps()
    h = eval_penalty(inst.penalty, inst.beta_star)
    assert eval_M(inst, eps, 0.0).value == pytest.approx(-h)
    assert eval_F(inst, eps, 0.0).value == pytest.approx(-h)
    assert eval_G(inst, eps, 0.0, 1.3).value == pytest.approx(-h)


def test_attaining_beta_consistent(rng):
    inst = random_instance(rng, 5, 8, "l1")
    eps = inst.eps()
    for t in (0.2, 1.0, 3.0):
        m = eval_M(inst, eps, t)
        b = m.attaining_beta
        xu = inst.X @ (b - inst.beta_star)
        assert np.linalg.norm(xu) <= t * (1 + 1e-8)
        assert eps @ xu - eval_penalty(inst.penalty, b) == pytest.approx(m.value, abs=1e-7)


def _lasso_2x3_grid_sup(X, bs, eps, w, t, step=1e-3):
    # brute force over the disk of radius t in the image; the null direction is
    # optimized exactly since the l1 norm is piecewise linear along it
    _, _, Vt = np.linalg.svd(X)
    z = Vt[-1]
    g = np.arange(-t, t + step / 2, step)
    V1, V2 = np.meshgrid(g, g, indexing="ij")
    mask = V1 ** 2 + V2 ** 2 <= t * t
    v = np.stack([V1[mask], V2[mask]], axis=1)
    b0 = bs + np.linalg.lstsq(X, v.T, rcond=None)[0].T
    cands = -b0 / z  # breakpoints along the null line
    best = np.full(len(v), np.inf)
    for j in range(3):
        bb = b0 + cands[:, j:j + 1] * z
        best = np.minimum(best, np.abs(bb).sum(axis=1))
    return float(np.max(v @ eps - w * best))


def test_lasso_grid_oracle():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((2, 3))
    bs = np.array([0.8, 0.0, -0.4])
    eps = rng.standard_normal(2)
    inst = ProblemInstance(X, bs, FixedNoise(tuple(eps)), ScaledL1(0.3, 2))
    got = eval_M(inst, eps, 0.7).value
    want = _lasso_2x3_grid_sup(X, bs, eps, inst.penalty.weight, 0.7)
    assert abs(got - want) <= 5e-3
    assert got >= want - 1e-9


def test_H_zero_noise_null_target():
    inst = ProblemInstance(np.random.default_rng(1).standard_normal((4, 6)), np.zeros(6),
                           FixedNoise((0.0,) * 4), ScaledL1(0.5, 4))
    for t in (0.1, 1.0, 10.0):
        assert eval_H(inst, np.zeros(4), t).value == pytest.approx(0.0, abs=1e-12)


def test_H_monotone_random(rng):
    for _ in range(5):
        inst = random_instance(rng, 4, 6, "l1")
        eps = inst.eps()
        ev = CurveEvaluator(inst, eps)
        assert ev.H(1.0).value >= ev.H(2.0).value - 1e-7
        grid = np.geomspace(1e-2, 1e2, 25)
        hs = [ev.H(t).value for t in grid]
        assert all(a >= b - 1e-7 for a, b in zip(hs, hs[1:]))
        for t in (0.05, 0.5, 5.0):
            assert abs(ev.H(t).value - ev.H(t * (1 + 1e-4)).value) <= 1e-2 * (1 + ev.H(t).value)


def test_G_maximized_at_risk(rng):
    inst = random_instance(rng, 8, 12, "l1")
    eps = inst.eps()
    risk = solve(inst).risk
    ev = CurveEvaluator(inst, eps)
    step = 1e-2
    grid = np.arange(0, 3 * np.linalg.norm(eps), step)
    vals = np.array([ev.G(t, risk).value for t in grid])
    assert abs(grid[int(np.argmax(vals))] - risk) <= step
    assert ev.G(risk, risk).value >= vals.max() - 1e-7


def test_H_errors():
    inst = _ls()
    with pytest.raises(ArgumentError):
        eval_H(inst, inst.eps(), 0.0)
    bad = ProblemInstance(np.eye(2), np.array([5.0, 0.0]), FixedNoise((1.0, 1.0)), Box(-1, 1))
    with pytest.raises(CapabilityError):
        eval_H(bad, bad.eps(), 1.0)


def test_critical_radius_examples(rng):
    inst = random_instance(rng, 5, 7, "l1")
    assert critical_radius(inst).t_c == 0.0
    X = rng.standard_normal((5, 3))
    bs = np.array([1.0, -1.0, 2.0])
    sing = ProblemInstance(X, bs, FixedNoise((0.0,) * 5), Singleton(0.0))
    assert critical_radius(sing).t_c == pytest.approx(np.linalg.norm(X @ bs), rel=1e-10)
    p = 4
    box = ProblemInstance(np.eye(p), 2 * np.ones(p), FixedNoise((0.0,) * p), Box(-1, 1))
    cr = critical_radius(box)
    assert cr.t_c == pytest.approx(math.sqrt(p), abs=1e-8)
    np.testing.assert_allclose(cr.attaining_beta0, 1.0, atol=1e-8)


def test_below_critical_radius_is_minus_inf():
    box = ProblemInstance(np.eye(3), 2 * np.ones(3), FixedNoise((0.5, 0.1, 0.0)), Box(-1, 1))
    assert eval_M(box, box.eps(), 1.0).value == -math.inf
    assert eval_M(box, box.eps(), 2.0).value > -math.inf


def test_validation_mode_agrees(rng):
    for pen in ("l1", "ridge", "box", "l1box"):
        inst = random_instance(rng, 3, 5, pen)
        eps = inst.eps()
        for t in (0.3, 1.5):
            a = eval_M(inst, eps, t).value
            b = eval_M_validation(inst, eps, t)
            assert abs(a - b) <= 1e-4 * max(1.0, abs(b))


def test_M_monotone_and_strongly_concave(rng):
    inst = random_instance(rng, 6, 10, "l1")
    ev = CurveEvaluator(inst, inst.eps())
    ts = np.sort(rng.uniform(0, 5, size=(50, 3)), axis=1)
    for t1, _, t3 in ts:
        # F = M - t^2/2 is concave, i.e. M is 1-strongly concave in the sense used
        mid = 0.5 * (t1 + t3)
        lhs = ev.F(mid).value
        rhs = 0.5 * (ev.F(t1).value + ev.F(t3).value)
        assert lhs >= rhs - 1e-6
        assert ev.M(t3).value >= ev.M(t1).value - 1e-9


cvxpy = pytest.importorskip("cvxpy")


def _cvx_M(inst, eps, t):
    X, bs = inst.X, inst.beta_star
    b = cvxpy.Variable(inst.p)
    pen = inst.penalty

    def h(p):
        if isinstance(p, ScaledL1):
            return p.weight * cvxpy.norm1(b), []
        if isinstance(p, SquaredL2):
            return p.lam * cvxpy.sum_squares(b), []
        if isinstance(p, Box):
            return 0, [b >= p.lo, b <= p.hi]
        if isinstance(p, Ball):
            return 0, [cvxpy.norm2(b) <= p.radius]
        if isinstance(p, Sum):
            f, c1 = h(p.finite)
            g, c2 = h(p.indicator)
            return f + g, c1 + c2
        return 0, []

    obj, cons = h(pen)
    prob = cvxpy.Problem(cvxpy.Maximize(eps @ X @ (b - bs) - obj),
                         cons + [cvxpy.norm2(X @ (b - bs)) <= t])
    prob.solve(solver=cvxpy.CLARABEL)
    return prob.value


@pytest.mark.parametrize("pen", ["l1", "ridge", "box", "l1box"])
def test_against_conic_solver(pen):
    rng = np.random.default_rng(77)
    inst = random_instance(rng, 5, 8, pen)
    eps = inst.eps()
    for t in (0.5, 2.0):
        assert eval_M(inst, eps, t).value == pytest.approx(_cvx_M(inst, eps, t), abs=1e-6)
