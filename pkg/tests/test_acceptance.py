"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test prints a single ``PASS``/``FAIL`` line (also collected into the
terminal summary) before asserting.
"""

import json
import time

import numpy as np
import pytest

from adaptive_pbc.cli import main
from adaptive_pbc.conditions import DomainSampler, check_lipschitz, check_p_monotone
from adaptive_pbc.config import parse_config
from adaptive_pbc.estimator import EstimatorGains, error_recursion_step
from adaptive_pbc.pch import MIDPOINT, EnergyModel, discrete_gradient
from adaptive_pbc.simulation import (
    ADAPTIVE,
    DESIRED_REFERENCE,
    LYAPUNOV_SLACK,
    NON_ADAPTIVE,
    ORACLE,
    compute_metrics,
    run_scenario,
)
from adaptive_pbc.systems import PendulumParams, build_pendulum

from conftest import ACCEPTANCE_LINES

PRESETS = ("pendulum-4.1.2", "wheel-4.2.2")


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def preset_run(name, mode):
    cfg = next(c for c in parse_config(name) if c.mode == mode)
    system = cfg.build()
    start = time.perf_counter()
    traj = run_scenario(cfg, system)
    return cfg, system, traj, time.perf_counter() - start


def test_criterion_1_discrete_gradient_consistency():
    rng = np.random.default_rng(2024)
    worst = 0.0
    elapsed = 0.0
    for name in PRESETS:
        system = parse_config(name)[0].build()
        energy = system.plant.energy(system.theta_true)
        xs = rng.uniform(-3, 3, size=(1000, system.plant.n))
        start = time.perf_counter()
        for x in xs:
            worst = max(worst, np.linalg.norm(discrete_gradient(energy, x, x) - energy.gradient(x)))
        elapsed += time.perf_counter() - start
    report(1, worst <= 1e-12 and elapsed < 1.0,
           f"max |dgrad(x,x) - grad(x)| = {worst:.2e} (<= 1e-12), {elapsed:.3f} s (< 1 s)")


def test_criterion_2_midpoint_residual_order():
    system = parse_config("pendulum-4.1.2")[0].build()
    energy = system.plant.energy(system.theta_true)
    mid = EnergyModel(energy.hamiltonian, energy.gradient, kind=MIDPOINT)
    rng = np.random.default_rng(7)

    def residual(x, d, h):
        x1 = x + h * d
        return abs(discrete_gradient(mid, x, x1) @ (x1 - x) - (mid.hamiltonian(x1) - mid.hamiltonian(x)))

    start = time.perf_counter()
    ratios = []
    while len(ratios) < 100:
        x = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-3, 3)])
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        # the cubic term is proportional to sin(q) dq^3; where it vanishes the
        # residual is of higher order and the halving ratio says nothing
        if abs(np.sin(x[0])) * abs(d[0]) ** 3 < 0.05:
            continue
        ratios.append(residual(x, d, 0.02) / residual(x, d, 0.01))
    elapsed = time.perf_counter() - start
    ok = 6 <= min(ratios) and max(ratios) <= 10 and elapsed < 1.0
    report(2, ok, f"halving ratios in [{min(ratios):.3f}, {max(ratios):.3f}] (within [6, 10]), {elapsed:.3f} s (< 1 s)")


@pytest.mark.parametrize("name", PRESETS)
def test_criterion_3_estimator_oracle_equivalence(name):
    cfg = next(c for c in parse_config(name) if c.mode == ADAPTIVE)
    system = cfg.build()
    start = time.perf_counter()
    traj = run_scenario(cfg, system)
    z = traj.z[0].copy()
    worst = 0.0
    for k in range(len(traj.x) - 1):
        x_prev = traj.x[k - 1] if k > 0 else traj.x[0]
        z = error_recursion_step(system, traj.x[k], x_prev, traj.theta_true, traj.theta_est[k], z, cfg.T)
        worst = max(worst, float(np.max(np.abs(z - traj.z[k + 1]))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0 and len(traj.x) == 2001
    report(3, ok, f"{name}: max |z_direct - z_recursion| = {worst:.2e} (<= 1e-10) over 2000 steps, {elapsed:.3f} s (< 1 s)")


def test_criterion_4_condition_certification():
    gains = EstimatorGains(c=[100.0], alpha=2.0, delta=1e-3)
    sampler = DomainSampler([[-np.pi, np.pi], [-3.0, 3.0]], [[0.5, 5.0]], count=10_000, seed=0)
    system = build_pendulum(PendulumParams(), gains, c_policy="formula")
    start = time.perf_counter()
    mono = check_p_monotone(system, sampler, 0.01)
    lip = check_lipschitz(system, sampler, 0.01)
    elapsed = time.perf_counter() - start
    adversarial = check_lipschitz(build_pendulum(PendulumParams(), gains, c_policy="formula", c_scale=10.0), sampler, 0.01)
    ok = (mono.worst_value >= -1e-12 and mono.passed and lip.worst_value < 1 and lip.passed
          and adversarial.worst_value >= 1 and elapsed < 5.0)
    report(4, ok, f"monotone min = {mono.worst_value:.3e} (>= -1e-12), L = {lip.worst_value:.4f} (< 1), "
                  f"10x gain L = {adversarial.worst_value:.3f} (>= 1), 10^4 samples, {elapsed:.3f} s (< 5 s)")


def _lyapunov_increases(traj):
    dV = np.diff(traj.V_z)
    ok = traj.condition_ok[: len(dV)]
    return int(np.sum(dV[ok] > LYAPUNOV_SLACK * traj.V_z[0])), int(ok.sum())


def test_criterion_5_pendulum_adaptive_convergence():
    cfg, system, traj, elapsed = preset_run("pendulum-4.1.2", ADAPTIVE)
    th_err = abs(traj.theta_est[-1, 0] - 2.0)
    q_err = abs(traj.x[-1, 0] - 2.0)
    bad, certified = _lyapunov_increases(traj)
    ok = th_err <= 0.04 and q_err <= 0.01 and bad == 0 and elapsed < 2.0 and traj.t[-1] == pytest.approx(20.0)
    report(5, ok, f"|theta - 2| = {th_err:.2e} (<= 0.04), |q - 2| = {q_err:.2e} (<= 0.01), "
                  f"V_z increases at {bad} of {certified} certified steps, {elapsed:.3f} s (< 2 s)")


def test_criterion_6_wheel_adaptive_convergence():
    cfg, system, traj, elapsed = preset_run("wheel-4.2.2", ADAPTIVE)
    true = np.array([0.15, 0.08])
    rel = np.abs(traj.theta_est[-1] - true) / true
    x_inf = float(np.max(np.abs(traj.x[-1])))
    ok = np.all(rel <= 0.05) and x_inf <= 0.02 and elapsed < 2.0
    report(6, ok, f"relative parameter errors {np.array2string(rel, precision=2)} (<= 5%), "
                  f"|x(end)|_inf = {x_inf:.2e} (<= 0.02), {elapsed:.3f} s (< 2 s)")


def test_criterion_7_oracle_matches_desired_reference():
    start = time.perf_counter()
    _, _, orc, _ = preset_run("pendulum-4.1.2", ORACLE)
    _, _, ref, _ = preset_run("pendulum-4.1.2", DESIRED_REFERENCE)
    elapsed = time.perf_counter() - start
    diff = float(np.max(np.abs(orc.x - ref.x)))
    report(7, diff <= 1e-10 and elapsed < 1.0, f"max stepwise |x_oracle - x_desired| = {diff:.2e} (<= 1e-10), {elapsed:.3f} s (< 1 s)")


@pytest.mark.parametrize("name", PRESETS)
def test_criterion_8_adaptive_beats_non_adaptive(name):
    _, system, ad, _ = preset_run(name, ADAPTIVE)
    _, _, na, _ = preset_run(name, NON_ADAPTIVE)
    m_ad, m_na = compute_metrics(ad, system.target), compute_metrics(na, system.target)
    ok = m_ad.tracking_rms < m_na.tracking_rms and m_na.final_state_error > m_ad.final_state_error
    report(8, ok, f"{name}: tracking_rms {m_ad.tracking_rms:.3e} < {m_na.tracking_rms:.3e}, "
                  f"final error {m_na.final_state_error:.3e} > {m_ad.final_state_error:.3e}")


def test_criterion_9_determinism(tmp_path):
    outs = [tmp_path / "first", tmp_path / "second"]
    codes = [main(["run", "pendulum-4.1.2", "--out", str(out)]) for out in outs]
    csv_names = sorted(p.name for p in outs[0].glob("*.csv"))
    same_csv = csv_names and all((outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in csv_names)
    manifests = [json.loads((out / "manifest.json").read_text()) for out in outs]
    hashes = [{f["path"]: f["sha256"] for f in m["files"]} for m in manifests]
    ok = codes == [0, 0] and bool(same_csv) and hashes[0] == hashes[1] and manifests[0] == manifests[1]
    report(9, ok, f"{len(csv_names)} CSVs byte-identical: {bool(same_csv)}, "
                  f"{len(hashes[0])} manifest hashes equal: {hashes[0] == hashes[1]}")
