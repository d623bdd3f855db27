import numpy as np
import pytest

from riskscope.errors import ArgumentError, ConvergenceError
from riskscope.model import (
    Ball, Box, FixedNoise, ProblemInstance, ScaledL1, Singleton, SquaredL2, Sum, Zero,
    eval_penalty,
)
from riskscope.solver import SolverConfig, kkt_residual, solve, solve_traced

from conftest import random_instance


def _inst(X, pen, beta=None, eps=None):
    X = np.asarray(X, float)
    n, p = X.shape
    beta = np.zeros(p) if beta is None else np.asarray(beta, float)
    eps = np.zeros(n) if eps is None else eps
    return ProblemInstance(X, beta, FixedNoise(tuple(eps)), pen)


def test_zero_identity():
    res = solve(_inst(np.eye(2), Zero()), np.array([3.0, -1.0]))
    np.testing.assert_allclose(res.beta_hat, [3, -1], atol=1e-12)
    assert res.objective == pytest.approx(0.0, abs=1e-20)


def test_soft_threshold_scalar():
    # sqrt(n) * lam = 0.5 with n = 1
    res = solve(_inst([[1.0]], ScaledL1(0.5, 1)), np.array([2.0]))
    assert res.beta_hat[0] == pytest.approx(1.5, abs=1e-10)


def test_ridge_closed_form():
    res = solve(_inst(np.eye(2), SquaredL2(0.5)), np.array([2.0, 4.0]))
    np.testing.assert_allclose(res.beta_hat, [1.0, 2.0], atol=1e-12)
    assert res.method == "closed_form"


def test_singleton_forced():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, 3))
    beta = np.array([1.0, -2.0, 0.5])
    inst = _inst(X, Singleton(0.0), beta)
    res = solve(inst, rng.standard_normal(4))
    np.testing.assert_allclose(res.beta_hat, 0.0, atol=1e-12)
    assert res.risk == pytest.approx(np.linalg.norm(X @ beta))


def test_empty_box_is_argument_error():
    with pytest.raises(ArgumentError):
        Box(1.0, 0.0)


def test_objective_invariant(rng):
    for pen in ("l1", "ridge", "box", "l1box"):
        inst = random_instance(rng, 6, 9, pen)
        res = solve(inst)
        y = inst.response()
        r = inst.X @ res.beta_hat - y
        obj = r @ r + 2 * eval_penalty(inst.penalty, res.beta_hat)
        assert res.objective == pytest.approx(obj, rel=1e-9)
        assert res.opt_residual <= SolverConfig().tol


def test_kkt_residual_examples(rng):
    inst = random_instance(rng, 8, 5, "ridge")
    y = inst.response()
    b = solve(inst, y).beta_hat
    assert kkt_residual(inst, y, b) <= 1e-10
    e1 = np.zeros(5)
    e1[0] = 0.1
    assert kkt_residual(inst, y, b + e1) > 0
    lasso = random_instance(rng, 10, 20, "l1", lam=0.2)
    y = lasso.response()
    res = solve(lasso, y, SolverConfig(tol=1e-9, method="coordinate_descent"))
    assert kkt_residual(lasso, y, res.beta_hat) <= 1e-9


def test_risk_unique_across_methods(rng):
    for _ in range(5):
        inst = random_instance(rng, 10, 25, "l1", lam=0.1)
        a = solve(inst, cfg=SolverConfig(method="coordinate_descent"))
        b = solve(inst, cfg=SolverConfig(method="fista"))
        assert abs(a.risk - b.risk) <= 1e-6


def test_objective_monotone_traces(rng):
    inst = random_instance(rng, 12, 20, "l1", lam=0.1)
    _, tr = solve_traced(inst, inst.response(), SolverConfig(method="coordinate_descent"))
    assert np.all(np.diff(tr) <= 1e-12 * np.maximum(1, np.abs(tr[:-1])))
    inst = random_instance(rng, 12, 20, "box")
    _, tr = solve_traced(inst, inst.response(), SolverConfig(method="projected_gradient"))
    assert np.all(np.diff(tr) <= 1e-12 * np.maximum(1, np.abs(tr[:-1])))


def test_random_point_oracle(rng):
    for _ in range(5):
        inst = random_instance(rng, 5, 8, "l1")
        y = inst.response()
        res = solve(inst, y)
        pts = rng.standard_normal((10_000, 8)) * 2
        r = pts @ inst.X.T - y
        objs = np.einsum("ij,ij->i", r, r) + 2 * inst.penalty.weight * np.abs(pts).sum(1)
        assert res.objective <= objs.min() + 1e-9


def test_ball_solution_feasible(rng):
    inst = random_instance(rng, 6, 4, "zero").with_penalty(Sum(SquaredL2(0.1), Ball(0.5)))
    res = solve(inst)
    assert np.linalg.norm(res.beta_hat) <= 0.5 + 1e-9


def test_convergence_error_carries_best(rng):
    inst = random_instance(rng, 10, 30, "l1", lam=0.01)
    with pytest.raises(ConvergenceError) as ei:
        solve(inst, cfg=SolverConfig(max_iter=2, method="coordinate_descent"))
    assert ei.value.best is not None and ei.value.best.shape == (30,)


def test_dimension_check(rng):
    inst = random_instance(rng, 5, 8, "l1")
    with pytest.raises(ArgumentError):
        solve(inst, np.zeros(4))
