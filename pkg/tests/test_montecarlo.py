import math

import numpy as np
import pytest
from scipy.stats import norm

from riskscope.errors import ArgumentError
from riskscope.model import GaussianNoise, ProblemInstance, ScaledL1, Singleton, Zero
from riskscope.montecarlo import (
    McConfig, concentration_check, estimate_f_curve, parse_grid, risk_sample, sample_risks,
    tf_proximity_check, tf_upper_condition,
)
from riskscope.stats import cp_lower, cp_upper, median_ci


def _ls(n, sigma=1.0):
    return ProblemInstance(np.eye(n), np.zeros(n), GaussianNoise(sigma, 0), Zero())


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0:10:11"), np.arange(11.0))
    g = parse_grid("geom:0.1:10:3")
    np.testing.assert_allclose(g, [0.1, 1.0, 10.0])
    np.testing.assert_allclose(parse_grid([3, 1, 2]), [1, 2, 3])
    for bad in ("1:0:5", "a:b:c", "1:2", "geom:0:1:4"):
        with pytest.raises(ArgumentError):
            parse_grid(bad)


def test_mc_config_guards():
    with pytest.raises(ArgumentError):
        McConfig(reps=1)
    with pytest.raises(ArgumentError):
        McConfig(confidence=1.0)


def test_chi2_mean():
    s = sample_risks(_ls(2), McConfig(reps=4000, master_seed=5))
    assert abs(s.mean_hat - math.sqrt(math.pi / 2)) <= 3 * s.stderr


def test_zero_sigma_gives_deterministic_risk():
    X = np.random.default_rng(0).standard_normal((6, 4))
    inst = ProblemInstance(X, np.ones(4), GaussianNoise(1.0, 0), ScaledL1(0.3, 6))
    s = sample_risks(inst, McConfig(reps=5, sigma=0.0))
    assert np.ptp(s.risks) == 0.0


def test_sample_determinism():
    mc = McConfig(reps=50, master_seed=9)
    a = sample_risks(_ls(3), mc)
    b = sample_risks(_ls(3), mc)
    np.testing.assert_array_equal(a.risks, b.risks)


def test_concentration_half_normal_and_permutation():
    s = sample_risks(_ls(1), McConfig(reps=3000, master_seed=1))
    rep = concentration_check(s, 1.0, [0.0, 1.0])
    assert rep["passed"]
    row0 = rep["rows"][0]
    assert row0["upper_freq"] == pytest.approx(0.5, abs=0.001)
    shuffled = risk_sample(np.sort(s.risks))
    assert concentration_check(shuffled, 1.0, [0.0, 1.0]) == rep


def test_f_curve_half_normal_small():
    fc = estimate_f_curve(_ls(1), McConfig(reps=2000, master_seed=3, t_grid="0:2:21"))
    assert abs(fc.t_f_hat - math.sqrt(2 / math.pi)) <= 3 * fc.t_f_stderr + 1e-3
    assert fc.t_f_ci[0] <= fc.t_f_hat <= fc.t_f_ci[1]
    assert fc.checks["monotone_M_violations"] == 0
    assert fc.checks["spot_check_failures"] == 0
    assert "concavity_advisory_failed" not in fc.flags


def test_f_curve_singleton_degenerate():
    inst = ProblemInstance(np.eye(3), np.zeros(3), GaussianNoise(1.0, 0), Singleton(0.0))
    fc = estimate_f_curve(inst, McConfig(reps=20, t_grid="0:1:5", bootstrap=10))
    assert fc.t_f_hat == 0.0
    assert fc.f_hat[0] == pytest.approx(0.0, abs=1e-12)


def test_f_curve_lasso_concavity_advisory():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((10, 20))
    b = np.zeros(20)
    b[:2] = 1.5
    inst = ProblemInstance(X, b, GaussianNoise(1.0, 0), ScaledL1(0.5, 10))
    fc = estimate_f_curve(inst, McConfig(reps=200, t_grid="0.2:6:15", bootstrap=50))
    assert fc.checks["concavity_violations"] == 0
    assert fc.checks["monotone_M_violations"] == 0
    s = sample_risks(inst, McConfig(reps=200))
    assert tf_proximity_check(fc, s, 1.0)["passed"]


def test_tf_upper_condition():
    inst = _ls(1)
    mc = McConfig(reps=2000, master_seed=2)
    assert tf_upper_condition(inst, 10.0, mc).verified
    # just above t_f: the band makes the statement inconclusive
    assert not tf_upper_condition(inst, 0.80, mc).verified


def test_tf_upper_rejects_counterexample_of_loose_condition():
    # f(s) + h* <= s^2 holds at s = 0.6 (f(0.6) = 0.6 E|eps| - 0.18 ~ 0.30 <= 0.36),
    # yet t_f = sqrt(2/pi) ~ 0.798 > 0.6; the certificate must not claim t_f <= 0.6
    inst = _ls(1)
    mc = McConfig(reps=4000, master_seed=4)
    f06 = 0.6 * math.sqrt(2 / math.pi) - 0.18
    assert f06 <= 0.36
    c = tf_upper_condition(inst, 0.6, mc)
    assert not c.verified


def test_tf_upper_below_critical_radius():
    inst = ProblemInstance(np.eye(2), np.array([3.0, 4.0]), GaussianNoise(1.0, 0),
                           Singleton(0.0))
    with pytest.raises(ArgumentError):
        tf_upper_condition(inst, 1.0, McConfig(reps=5))


def test_cp_and_median_ci():
    assert cp_lower(0, 10) == 0.0 and cp_upper(10, 10) == 1.0
    lo, hi = cp_lower(30, 100, 0.95), cp_upper(30, 100, 0.95)
    assert lo < 0.3 < hi
    v = np.sort(np.random.default_rng(0).standard_normal(501))
    a, b = median_ci(v, 0.99)
    assert a <= np.median(v) <= b
    assert norm.sf(1.6745) == pytest.approx(0.047, abs=1e-3)
