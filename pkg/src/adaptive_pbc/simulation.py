"""Closed-loop scenario execution and run metrics.

Four modes share one loop:

``desired_reference``
    the desired Hamiltonian system stepped with the true parameters;
``non_adaptive``
    IDA-PBC with the parameters frozen at their nominal values;
``adaptive``
    IDA-PBC fed by the I&I estimator;
``oracle``
    IDA-PBC that knows the true parameters.

Whatever the mode, the plant is always stepped with the true parameters. Per
sample the order is: extract the estimate, compute the input, step the plant,
update the estimator.
"""

from dataclasses import dataclass, field

import numpy as np

from .conditions import MONOTONE_TOL, DomainSampler, step_conditions
from .estimator import EstimatorGains, extract_estimate, initial_state, update
from .exceptions import ContractError, NumericalBlowup
from .idapbc import adaptive_control
from .pch import SamplingConfig, discrete_gradient, plant_step
from .systems import PendulumParams, WheelParams, build_pendulum, build_wheel

DESIRED_REFERENCE = "desired_reference"
NON_ADAPTIVE = "non_adaptive"
ADAPTIVE = "adaptive"
ORACLE = "oracle"
MODES = (DESIRED_REFERENCE, NON_ADAPTIVE, ADAPTIVE, ORACLE)
SYSTEMS = ("pendulum", "wheel")

# Relative slack on V_z increments, as a fraction of V_z at k = 0.
LYAPUNOV_SLACK = 1e-9


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully resolved experiment: a system, its parameters and a run mode."""

    name: str
    system: str
    mode: str
    params: object
    nominal_theta: tuple
    estimator: EstimatorGains
    T: float = 0.01
    steps: int = 2000
    x0: tuple = ()
    theta_hat0: tuple = ()
    c_policy: str = "constant"
    c_scale: float = 1.0
    sampler: DomainSampler = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ContractError(f"unknown system {self.system!r}")
        if self.mode not in MODES:
            raise ContractError(f"unknown mode {self.mode!r}")
        SamplingConfig(self.T, self.steps)
        expected = {"pendulum": PendulumParams, "wheel": WheelParams}[self.system]
        if not isinstance(self.params, expected):
            raise ContractError(f"{self.system} needs {expected.__name__}")
        n = 2 if self.system == "pendulum" else 4
        if len(self.x0) != n:
            raise ContractError(f"x0 must have length {n} for the {self.system}")
        if len(self.theta_hat0) != self.estimator.s or len(self.nominal_theta) != self.estimator.s:
            raise ContractError("theta_hat0 and nominal_theta must match the parameter count")

    def build(self):
        if self.system == "pendulum":
            return build_pendulum(
                self.params, self.estimator, self.nominal_theta, self.c_policy, self.c_scale
            )
        if self.c_policy != "constant":
            raise ContractError("the wheel only supports constant estimator gains")
        return build_wheel(self.params, self.estimator, self.nominal_theta)


@dataclass
class Trajectory:
    """Per-sample log of a run; every array has ``steps + 1`` rows unless the
    run was cut short by a numerical failure."""

    mode: str
    system: str
    T: float
    state_names: tuple
    x: np.ndarray
    u: np.ndarray
    theta_est: np.ndarray
    z: np.ndarray
    V_z: np.ndarray
    H_d: np.ndarray
    x_ref: np.ndarray
    monotone: np.ndarray
    lipschitz: np.ndarray
    projected: np.ndarray
    theta_true: np.ndarray
    failure: dict = None

    @property
    def t(self):
        return self.T * np.arange(len(self.x))

    @property
    def condition_ok(self):
        """Per-sample flag: both stability conditions hold at this sample."""
        return (self.monotone >= -MONOTONE_TOL) & (self.lipschitz <= 1.0)


@dataclass(frozen=True)
class RunMetrics:
    final_param_error: float
    final_state_error: float
    tracking_rms: float
    V_z_monotone_fraction: float

    def to_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def run_scenario(cfg, system=None):
    """Simulate ``cfg`` and return its :class:`Trajectory`.

    A non-finite state, input or estimate stops the run; the trajectory is then
    truncated and ``failure`` records the step index and message.
    """
    # overflow surfaces through the finiteness checks, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _simulate(cfg, cfg.build() if system is None else system)


def _simulate(cfg, system):
    plant, desired = system.plant, system.desired
    theta = system.theta_true
    energy = plant.energy(theta)
    T, steps, mode = cfg.T, int(cfg.steps), cfg.mode
    P = system.estimator.P

    x = np.array(cfg.x0, dtype=float)
    x_prev = x.copy()
    ref, ref_prev = x.copy(), x.copy()
    est = initial_state(cfg.theta_hat0, x) if mode == ADAPTIVE else None

    rows = {key: [] for key in ("x", "u", "theta_est", "z", "V_z", "H_d", "x_ref",
                                "monotone", "lipschitz", "projected")}
    failure = None
    for k in range(steps + 1):
        projected = False
        if mode == ADAPTIVE:
            theta_est = extract_estimate(est, system.estimator, x)
            projected = bool(np.any(theta_est != est.theta_hat + est.beta_prev @ x))
        elif mode == NON_ADAPTIVE:
            theta_est = system.theta_nominal
        else:
            theta_est = theta

        if mode == DESIRED_REFERENCE:
            u = np.zeros(plant.m)
        else:
            u = adaptive_control(plant, desired, system.controller, x, x_prev, theta_est)
        monotone = ratio = np.nan
        failure = None
        try:
            if not np.isfinite(u).all():
                raise NumericalBlowup("control input is not finite", k)
            if k < steps:
                if mode == DESIRED_REFERENCE:
                    x_next = desired.step(x, x_prev, theta, T)
                    if not np.isfinite(x_next).all():
                        raise NumericalBlowup("desired state is not finite", k)
                else:
                    x_next = plant_step(plant.structure, discrete_gradient(energy, x, x_prev), x, u, T, step=k)
                ref_next = x_next if mode == DESIRED_REFERENCE else desired.step(ref, ref_prev, theta, T)
            if mode == ADAPTIVE:
                # the update builds beta[k] and A[k]; the checks reuse them
                est = update(est, system, x, u, T)
                monotone, ratio = step_conditions(
                    system, x, x_prev, theta, theta_est, T, beta_A=(est.beta_prev, est.regressor_prev)
                )
        except NumericalBlowup as exc:
            failure = {"step": exc.step, "message": str(exc)}

        z = theta_est - theta
        rows["x"].append(x)
        rows["u"].append(u)
        rows["theta_est"].append(np.array(theta_est, dtype=float))
        rows["z"].append(z)
        rows["V_z"].append(float(z @ P @ z))
        rows["H_d"].append(float(desired.H_d(x, theta)))
        rows["x_ref"].append(ref)
        rows["monotone"].append(monotone)
        rows["lipschitz"].append(ratio)
        rows["projected"].append(projected)
        if failure is not None or k == steps:
            break
        x_prev, x = x, x_next
        ref_prev, ref = ref, ref_next

    arrays = {key: np.array(val) for key, val in rows.items()}
    return Trajectory(
        mode=mode,
        system=cfg.system,
        T=T,
        state_names=system.state_names,
        theta_true=theta.copy(),
        failure=failure,
        **arrays,
    )


def compute_metrics(traj, target):
    """Summary numbers of one run.

    ``tracking_rms`` is the RMS distance to the desired reference over the
    second half of the run; ``V_z_monotone_fraction`` counts the steps whose
    ``V_z`` increment stays below ``1e-9 V_z(0)``.
    """
    n = len(traj.x)
    # a diverged run yields inf metrics, which is the intended answer
    with np.errstate(over="ignore", invalid="ignore"):
        half = traj.x[n // 2:] - traj.x_ref[n // 2:]
        dV = np.diff(traj.V_z)
        slack = LYAPUNOV_SLACK * traj.V_z[0]
        return RunMetrics(
            final_param_error=float(np.linalg.norm(traj.theta_est[-1] - traj.theta_true)),
            final_state_error=float(np.linalg.norm(traj.x[-1] - np.asarray(target))),
            tracking_rms=float(np.sqrt(np.mean(np.sum(half**2, axis=1)))),
            V_z_monotone_fraction=float(np.mean(dV <= slack)) if dV.size else 1.0,
        )


@dataclass
class Comparison:
    """Runs of one scenario aligned sample by sample."""

    columns: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def max_difference(self, mode_a, mode_b):
        """Largest absolute state difference between two runs."""
        names = [c.split(":", 1)[1] for c in self.columns if c.startswith(f"{mode_a}:x_")]
        return max(
            float(np.max(np.abs(self.columns[f"{mode_a}:{c}"] - self.columns[f"{mode_b}:{c}"])))
            for c in names
        )


def compare_runs(trajs, target):
    """Align trajectories of the same scenario into one table plus metrics."""
    if not trajs:
        raise ContractError("nothing to compare")
    first = trajs[0]
    for tr in trajs[1:]:
        if (tr.system != first.system or tr.T != first.T or len(tr.x) != len(first.x)
                or not np.array_equal(tr.x[0], first.x[0])):
            raise ContractError("runs differ in system, sampling period, length or x0")
    out = Comparison()
    out.columns["t"] = first.t
    for tr in trajs:
        key = tr.mode if tr.mode not in out.metrics else f"{tr.mode}#{len(out.metrics)}"
        for i, name in enumerate(tr.state_names):
            out.columns[f"{key}:x_{name}"] = tr.x[:, i]
        for i in range(tr.u.shape[1]):
            out.columns[f"{key}:u_{i + 1}"] = tr.u[:, i]
        for i in range(tr.theta_est.shape[1]):
            out.columns[f"{key}:theta_est_{i + 1}"] = tr.theta_est[:, i]
        out.metrics[key] = compute_metrics(tr, target)
    return out
