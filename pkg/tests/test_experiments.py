import csv
import json

import pytest

from riskscope.errors import ArgumentError, ConfigError, SchemaError
from riskscope.experiments import (
    make_design, run_all, run_compat_lower, run_sandwich, run_small_lambda,
)


def _compat(**kw):
    cfg = {"name": "compat_lower", "design": {"generator": "identity", "n": 20},
           "T": [0, 1, 2], "lambda": {"rule": "explicit", "value": 1.0}, "sigma": 1.0,
           "reps": 300}
    cfg.update(kw)
    return cfg


def test_compat_lower_identity_passes():
    rep = run_compat_lower(_compat())
    assert rep.verdict == "PASS"
    assert rep.checks["omega_implication_violations"] == 0
    assert rep.checks["certificates_sound"]
    assert all(p.satisfied for p in rep.premises)


def test_compat_lower_guards():
    with pytest.raises(ConfigError):
        run_compat_lower(_compat(reps=1))
    with pytest.raises(ConfigError):
        run_compat_lower(_compat(noise="fixed"))


def test_compat_lower_reproducible():
    a = run_compat_lower(_compat(reps=50)).to_dict()
    b = run_compat_lower(_compat(reps=50)).to_dict()
    assert json.dumps(a, sort_keys=True, default=str) == json.dumps(b, sort_keys=True, default=str)


def _small(**kw):
    cfg = {"name": "small_lambda", "design": {"generator": "gaussian_iid", "n": 50, "p": 200,
                                              "seed": 1},
           "d": 2, "lambda": {"rule": "explicit", "value": 0.0}, "sigma": 1.0, "reps": 30}
    cfg.update(kw)
    return cfg


def test_small_lambda_pass_and_guards():
    rep = run_small_lambda(_small())
    assert rep.verdict == "PASS"
    names = [p.name for p in rep.premises]
    assert "lambda-too-small-log-p-5d" in names
    with pytest.raises(ConfigError, match="lambda-too-small-log-p-5d"):
        run_small_lambda(_small(**{"lambda": {"rule": "explicit", "value": 50.0}}))
    with pytest.raises(ArgumentError):
        run_small_lambda(_small(d=40))


def test_small_lambda_fail_injection():
    rep = run_small_lambda(_small(fail_injection=True,
                                  **{"lambda": {"rule": "explicit", "value": 50.0}}))
    assert rep.verdict == "FAIL" and "fail_injection" in rep.flags


def test_sandwich_lambda_below_threshold_is_skipped():
    cfg = {"name": "sandwich", "design": {"generator": "gaussian_iid", "n": 40, "p": 60},
           "s": 2, "gamma": 0.5, "lambda": {"rule": "explicit", "value": 1.0}, "sigma": 1.0,
           "reps": 20}
    rep = run_sandwich(cfg)
    assert rep.verdict == "SKIPPED"
    assert "lambda-tuning-log-9ep-s" in rep.reason
    assert any(p.name == "lambda-tuning-log-9ep-s" and not p.satisfied for p in rep.premises)


def test_sandwich_well_conditioned_half_beta_min_is_advisory():
    # orthogonal design: delta_s = 0, kappa = 1; 3x the tuning threshold gives C_bar < 2 C_under
    base = {"name": "sandwich", "design": {"generator": "identity", "n": 60}, "s": 2,
            "gamma": 0.5, "lambda": {"rule": "threshold", "value": 3.0}, "sigma": 1.0,
            "reps": 200}
    full = run_sandwich(base)
    assert full.checks["details"]["kappa"] == pytest.approx(1.0, abs=1e-6)
    assert full.verdict == "PASS", full.reason
    assert full.checks["two_sided"]["status"] == "PASS"
    bmin = full.checks["details"]["beta_min"]
    half = run_sandwich(dict(base, beta_magnitude=0.5 * bmin))
    assert half.checks["two_sided"]["status"] == "ADVISORY"
    assert "explicit-beta-min" in half.reason
    assert half.verdict in ("PASS", "FAIL")
    assert half.checks["upper"]["status"] in ("PASS", "FAIL")


def test_design_generators(tmp_path):
    from riskscope.io import save_matrix
    import numpy as np
    X = make_design({"generator": "rademacher", "n": 5, "p": 7, "seed": 3})
    assert set(np.unique(X)) <= {-1.0, 1.0}
    save_matrix(tmp_path / "X.csv", X)
    Y = make_design({"generator": "from_file", "path": "X.csv"}, base=tmp_path)
    np.testing.assert_array_equal(X, Y)
    with pytest.raises(ConfigError):
        make_design({"generator": "identity", "n": 3, "p": 4})


def test_run_all_bundle(tmp_path):
    doc = {"experiments": [
        _compat(reps=100),
        {"name": "sandwich", "design": {"generator": "gaussian_iid", "n": 40, "p": 60},
         "s": 2, "lambda": {"rule": "explicit", "value": 1.0}, "sigma": 1.0, "reps": 10},
    ]}
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps(doc))
    code, reps = run_all(cfg, tmp_path / "out")
    assert code == 0
    assert [r.verdict for r in reps] == ["PASS", "SKIPPED"]
    rows = list(csv.reader(open(tmp_path / "out" / "summary.csv")))
    assert rows[0] == ["name", "verdict", "frequency", "cp_lower", "threshold"]
    assert len(rows) == 3
    first = json.loads((tmp_path / "out" / "compat_lower.json").read_text())
    code2, _ = run_all(cfg, tmp_path / "out2")
    second = json.loads((tmp_path / "out2" / "compat_lower.json").read_text())
    first.pop("generated_at"), second.pop("generated_at")
    assert first == second


def test_run_all_empty_and_failures(tmp_path):
    code, reps = run_all({"experiments": []}, tmp_path / "e")
    assert code == 0 and reps == []
    rows = list(csv.reader(open(tmp_path / "e" / "summary.csv")))
    assert len(rows) == 1
    code, _ = run_all({"experiments": [_small(fail_injection=True, **{
        "lambda": {"rule": "explicit", "value": 50.0}})]}, tmp_path / "f")
    assert code == 1
    with pytest.raises(SchemaError):
        run_all({"experiments": [{"name": "sandwich"}]}, tmp_path / "g")
    assert not (tmp_path / "g").exists()
