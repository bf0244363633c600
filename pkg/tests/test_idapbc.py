import numpy as np
import pytest

from adaptive_pbc import idapbc
from adaptive_pbc.exceptions import ContractError, RankDeficientError
from adaptive_pbc.idapbc import (
    ControllerGains,
    adaptive_control,
    damping_injection,
    energy_shaping,
    left_annihilator,
    matching_residual,
)
from adaptive_pbc.pch import discrete_gradient, plant_step

from conftest import T, random_states


def test_left_annihilator_pendulum():
    gp = left_annihilator(np.array([[0.0], [1.0]]))
    assert gp.shape == (1, 2)
    np.testing.assert_allclose(np.abs(gp), [[1.0, 0.0]], atol=1e-15)


def test_left_annihilator_wheel():
    g = np.array([[0.0], [0.0], [-1.0], [1.0]])
    gp = left_annihilator(g)
    assert gp.shape == (3, 4)
    np.testing.assert_allclose(gp @ g, 0, atol=1e-15)
    np.testing.assert_allclose(gp @ gp.T, np.eye(3), atol=1e-12)
    # each expected direction lies in the row space
    proj = gp.T @ gp
    for v in (np.eye(4)[0], np.eye(4)[1], np.array([0, 0, 1, 1]) / np.sqrt(2)):
        np.testing.assert_allclose(proj @ v, v, atol=1e-12)


def test_left_annihilator_fully_actuated_and_rank_deficient():
    assert left_annihilator(np.eye(3)).shape == (0, 3)
    with pytest.raises(RankDeficientError):
        left_annihilator(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_matching_residual_pendulum_zero(pendulum, rng):
    worst = 0.0
    for x, xp in zip(random_states(rng, 2, 1000), random_states(rng, 2, 1000)):
        worst = max(worst, np.max(np.abs(matching_residual(pendulum.plant, pendulum.desired, x, xp, [2.0]))))
    assert worst <= 1e-12


def test_matching_residual_wheel_measured(wheel, rng):
    # the desired structure cancels exactly, so the residual is rounding only
    worst = 0.0
    for _ in range(1000):
        x = rng.normal(size=4)
        x *= rng.uniform(0, 3) / np.linalg.norm(x)
        xp = x + 0.01 * rng.normal(size=4)
        worst = max(worst, np.max(np.abs(matching_residual(wheel.plant, wheel.desired, x, xp, wheel.theta_true))))
    assert np.isfinite(worst) and worst <= 1e-10


def test_certain_pendulum_step_equals_desired_step(pendulum, rng):
    plant, desired = pendulum.plant, pendulum.desired
    energy = plant.energy([2.0])
    for x, xp in zip(random_states(rng, 2, 200), random_states(rng, 2, 200)):
        u = adaptive_control(plant, desired, pendulum.controller, x, xp, [2.0])
        closed = plant_step(plant.structure, discrete_gradient(energy, x, xp), x, u, T)
        np.testing.assert_allclose(closed, desired.step(x, xp, [2.0], T), rtol=0, atol=1e-10)


def test_energy_shaping_zero_at_wheel_equilibrium(wheel):
    u = energy_shaping(wheel.plant, wheel.desired, np.zeros(4), np.zeros(4), wheel.theta_true)
    np.testing.assert_array_equal(u, [0.0])


def test_damping_injection_values():
    g = np.array([[0.0], [1.0]])
    np.testing.assert_allclose(damping_injection(ControllerGains(5.0), g, [3.0, 0.15]), [-0.75])
    assert damping_injection(ControllerGains(5.0), g, [0.0, 0.0])[0] == 0.0
    assert damping_injection(ControllerGains(0.0), g, [4.0, 9.0])[0] == 0.0


def test_controller_gains_validation():
    with pytest.raises(ContractError):
        ControllerGains(-1.0)
    with pytest.raises(ContractError):
        ControllerGains([[1.0, 2.0], [0.0, 1.0]])


def test_adaptive_control_holds_pendulum_target(pendulum):
    x = np.array([2.0, 0.0])
    u = adaptive_control(pendulum.plant, pendulum.desired, pendulum.controller, x, x, [2.0])
    assert np.all(np.isfinite(u))
    nxt = plant_step(pendulum.plant.structure, discrete_gradient(pendulum.plant.energy([2.0]), x, x), x, u, T)
    np.testing.assert_allclose(nxt, x, atol=1e-12)


def test_adaptive_control_is_sum_of_parts(wheel, rng):
    x, xp = rng.normal(size=4), rng.normal(size=4)
    th = [0.2, 0.07]
    u = adaptive_control(wheel.plant, wheel.desired, wheel.controller, x, xp, th)
    grad_hd = wheel.desired.discrete_grad_H_d(x, xp, th)
    parts = (energy_shaping(wheel.plant, wheel.desired, x, xp, th)
             + damping_injection(wheel.controller, wheel.plant.structure.g_in(x), grad_hd))
    np.testing.assert_allclose(u, parts, atol=1e-12)


def test_control_never_uses_annihilator(pendulum, monkeypatch):
    def boom(*args):
        raise AssertionError("annihilator is diagnostic only")

    monkeypatch.setattr(idapbc, "left_annihilator", boom)
    adaptive_control(pendulum.plant, pendulum.desired, pendulum.controller, [0.3, 0.1], [0.2, 0.0], [3.0])


def test_singular_input_gram_rejected():
    with pytest.raises(RankDeficientError):
        idapbc._left_pseudo_inverse_apply(np.zeros((2, 1)), np.ones(2))
    with pytest.raises(RankDeficientError):
        idapbc._left_pseudo_inverse_apply(np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]), np.ones(3))


@pytest.mark.parametrize("name", ["pendulum", "wheel"])
def test_desired_structure_skew_and_psd(name, request, rng):
    system = request.getfixturevalue(name)
    d = system.desired
    for x in random_states(rng, system.plant.n, 100):
        Jd = d.J_d(x, system.theta_true)
        # only the wheel's Jd depends on theta; skewness holds because Md is symmetric
        assert np.max(np.abs(Jd + Jd.T)) <= 1e-12
        assert np.linalg.eigvalsh(d.R_d(x)).min() >= -1e-12


@pytest.mark.parametrize("name", ["pendulum", "wheel"])
def test_desired_energy_minimum_at_target(name, request, rng):
    system = request.getfixturevalue(name)
    d, th = system.desired, system.theta_true
    h0 = d.H_d(d.target, th)
    np.testing.assert_allclose(d.grad_H_d(d.target, th), 0, atol=1e-12)
    for dx in rng.uniform(-0.2, 0.2, size=(500, system.plant.n)):
        assert d.H_d(d.target + dx, th) >= h0 - 1e-12
