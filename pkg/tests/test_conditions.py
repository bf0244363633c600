import dataclasses

import numpy as np
import pytest

from adaptive_pbc.conditions import (
    DomainSampler,
    check_lipschitz,
    check_p_monotone,
    lyapunov_trace,
    psi,
    step_conditions,
)
from adaptive_pbc.exceptions import ContractError
from adaptive_pbc.systems import PendulumParams, build_pendulum
from adaptive_pbc.estimator import EstimatorGains

from conftest import T

PEND_BOX = DomainSampler([[-np.pi, np.pi], [-3, 3]], [[0.5, 5.0]], count=2000, seed=3)
WHEEL_BOX = DomainSampler([[-np.pi, np.pi], [-10, 10], [-3, 3], [-3, 3]], [[0.05, 0.3], [0.05, 0.3]], count=2000, seed=3)


def test_psi_value_by_chained_products(pendulum):
    x, xp = np.array([1.0, 0.5]), np.array([0.8, 0.3])
    # beta A = [-4.3382... * -0.08742..., 0], phi(2) = [2, 0.25]
    np.testing.assert_allclose(psi(pendulum, x, xp, [2.0], [1.0], T), [2 * 0.3792788412491715], rtol=1e-12)


def test_psi_trivial_cases(pendulum):
    zero = np.zeros(2)
    np.testing.assert_array_equal(psi(pendulum, zero, zero, [3.0], [1.0], T), [0.0])
    x = np.array([0.4, 0.2])
    assert np.array_equal(psi(pendulum, x, x, [3.0], [1.0], T), psi(pendulum, x, x, [3.0], [1.0], T))


def test_pendulum_monotone_reduces_to_square(pendulum):
    xs, ta, tb = PEND_BOX.draw()
    for x, a, b in list(zip(xs, ta, tb))[:200]:
        d = psi(pendulum, x, x, a, b, T) - psi(pendulum, x, x, b, b, T)
        A = -T * 9.81 * np.sin(x[0])
        eta = 2.0 * (max(A**2, (T * x[1]) ** 2) + 1.0)
        expected = 100.0 * A**2 * (a[0] - b[0]) ** 2 / eta
        assert (a - b) @ d == pytest.approx(expected, rel=1e-9, abs=1e-15)


def test_monotone_passes_pendulum_and_wheel(pendulum_formula, wheel):
    for system, box in ((pendulum_formula, PEND_BOX), (wheel, WHEEL_BOX)):
        rep = check_p_monotone(system, box, T)
        assert rep.passed and rep.violations == []
        assert rep.worst_value >= -1e-12
        assert rep.samples_checked == box.count
        assert rep.box == box.to_dict()


def test_lipschitz_formula_passes_and_scaled_gain_fails():
    gains = EstimatorGains(c=[100.0], alpha=2.0)
    ok = check_lipschitz(build_pendulum(PendulumParams(), gains, c_policy="formula"), PEND_BOX, T)
    bad = check_lipschitz(build_pendulum(PendulumParams(), gains, c_policy="formula", c_scale=10.0), PEND_BOX, T)
    assert ok.passed and ok.worst_value < 1
    assert not bad.passed and bad.worst_value >= 1
    assert all(v >= 1 for *_, v in bad.violations)


def test_lipschitz_zero_when_beta_vanishes(pendulum):
    frozen = dataclasses.replace(pendulum, gain_matrix=lambda xbar, th, A, T: np.zeros((1, 2)))
    rep = check_lipschitz(frozen, PEND_BOX, T)
    assert rep.worst_value == 0.0 and rep.passed


def test_reports_are_deterministic(wheel):
    a = check_lipschitz(wheel, WHEEL_BOX, T)
    b = check_lipschitz(wheel, WHEEL_BOX, T)
    assert a.to_dict() == b.to_dict()
    other = dataclasses.replace(WHEEL_BOX, seed=4)
    assert not np.array_equal(other.draw()[0], WHEEL_BOX.draw()[0])


def test_report_serialisation(wheel):
    box = dataclasses.replace(WHEEL_BOX, state_box=[[-1, 1], [-1, 1], [-4, 4], [-4, 4]], count=3000)
    rep = check_lipschitz(wheel, box, T)
    d = rep.to_dict(max_violations=2)
    assert d["passed"] == (d["violation_count"] == 0)
    assert len(d["violations"]) <= 2
    assert d["stall_manifold"] == "pbar_i = 0"


def test_sampler_validation():
    with pytest.raises(ContractError):
        DomainSampler([[1.0, 0.0]], [[0.5, 5.0]])
    with pytest.raises(ContractError):
        DomainSampler([[0.0, 1.0]], [[0.5, 5.0]], count=0)


def test_step_conditions_identical_parameters(pendulum):
    x = np.array([0.5, 0.1])
    assert step_conditions(pendulum, x, x, [2.0], [2.0], T) == (0.0, 0.0)


class _Traj:
    def __init__(self, z):
        self.z = np.asarray(z)


def test_lyapunov_trace():
    V, dV = lyapunov_trace(_Traj(np.zeros((5, 2))), np.eye(2))
    assert np.all(V == 0) and np.all(dV == 0) and len(dV) == 4
    rng = np.random.default_rng(0)
    V, _ = lyapunov_trace(_Traj(rng.normal(size=(50, 2))), np.array([[2.0, 0.5], [0.5, 1.0]]))
    assert np.all(V >= 0)
