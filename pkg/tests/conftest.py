import numpy as np
import pytest

from riskscope.model import Box, FixedNoise, ProblemInstance, ScaledL1, SquaredL2, Sum, Zero


def random_instance(rng, n, p, penalty="l1", lam=None, sparsity=2):
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    k = min(sparsity, p)
    beta[:k] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 2.0, size=k)
    lam = rng.uniform(0.05, 1.0) if lam is None else lam
    if penalty == "l1":
        pen = ScaledL1(lam, n)
    elif penalty == "ridge":
        pen = SquaredL2(lam)
    elif penalty == "zero":
        pen = Zero()
    elif penalty == "box":
        # target inside the box so h(beta*) = 0
        beta = np.clip(beta, -1.5, 1.5)
        pen = Box(-1.5, 1.5)
    elif penalty == "l1box":
        beta = np.clip(beta, -1.5, 1.5)
        pen = Sum(ScaledL1(lam, n), Box(-1.5, 1.5))
    else:
        raise ValueError(penalty)
    eps = rng.standard_normal(n)
    return ProblemInstance(X, beta, FixedNoise(tuple(eps)), pen)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call" or "test_acceptance" not in rep.nodeid:
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                rows.append((props["criterion"], outcome.upper()[:4],
                             props.get("detail", "no detail recorded")))
    if rows:
        terminalreporter.section("acceptance criteria")
        for k, status, detail in sorted(rows):
            terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}")
