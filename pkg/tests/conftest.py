import numpy as np
import pytest
from hypothesis import settings

from noisy_bayes.simplex import DiscreteJoint

# fixed example sequence and no per-example deadline: reproducible and load-independent
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

CRITERIA = []


def record_criterion(label, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
    CRITERIA.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)


def random_stochastic(rng, k):
    return rng.dirichlet(np.ones(k), size=k).T


def random_binary_rates(rng):
    """(e0, e1) uniform on the feasible triangle e0 + e1 < 1."""
    while True:
        e0, e1 = rng.random(2)
        if e0 + e1 < 0.98:
            return e0, e1


def random_joint(rng, n_x, k, p=None, E=None):
    x_given_y = rng.dirichlet(np.ones(n_x), size=k).T
    p = rng.dirichlet(np.ones(k)) if p is None else np.asarray(p, dtype=float)
    E = random_stochastic(rng, k) if E is None else np.asarray(E, dtype=float)
    return DiscreteJoint.from_channel(x_given_y, p, E)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
