import numpy as np
import pytest

from adaptive_pbc.estimator import EstimatorGains
from adaptive_pbc.systems import PendulumParams, WheelParams, build_pendulum, build_wheel

T = 0.01


@pytest.fixture
def pendulum():
    return build_pendulum(PendulumParams(), EstimatorGains(c=[100.0], alpha=2.0))


@pytest.fixture
def pendulum_formula():
    return build_pendulum(PendulumParams(), EstimatorGains(c=[100.0], alpha=2.0), c_policy="formula")


@pytest.fixture
def wheel():
    return build_wheel(WheelParams(), EstimatorGains(c=[6.0, 2.0], alpha=1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_states(rng, n, count, scale=3.0):
    return rng.uniform(-scale, scale, size=(count, n))


# one line per acceptance criterion, shown at the end of every run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
