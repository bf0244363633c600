"""Numerical certification of the estimator's stability hypotheses.

The estimation error is stable when the map

    psi(x, theta) = beta(x) A(x) phi(x, theta)

is P-monotone in ``theta``,
``(a - b)^T P (psi(x, a) - psi(x, b)) >= 0``, and Lipschitz in ``theta`` with
constant at most one. Both properties are checked here by sampling boxes of
states and parameters; the boxes are configuration and every report records
the box it was computed on.
"""

from dataclasses import dataclass, field

import numpy as np

from .estimator import beta_matrix, regressor_A
from .exceptions import ContractError
from .pch import evaluation_point

MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class DomainSampler:
    """Uniform sampling over a box of evaluation points and a box of parameters."""

    state_box: np.ndarray
    theta_box: np.ndarray
    count: int = 10_000
    seed: int = 0

    def __post_init__(self):
        sb = np.atleast_2d(np.asarray(self.state_box, dtype=float))
        tb = np.atleast_2d(np.asarray(self.theta_box, dtype=float))
        for name, box in (("state_box", sb), ("theta_box", tb)):
            if box.shape[1] != 2 or np.any(box[:, 0] >= box[:, 1]):
                raise ContractError(f"{name} must be rows of [lo, hi] with lo < hi")
        if int(self.count) < 1:
            raise ContractError("sampler count must be >= 1")
        object.__setattr__(self, "state_box", sb)
        object.__setattr__(self, "theta_box", tb)

    def draw(self):
        """Samples ``(xbar, theta_a, theta_b)``, each of shape ``(count, dim)``.

        All draws come from one generator seeded with ``seed``, so the result
        does not depend on how the samples are later processed.
        """
        rng = np.random.default_rng(self.seed)
        n, s = self.state_box.shape[0], self.theta_box.shape[0]
        xs = rng.uniform(self.state_box[:, 0], self.state_box[:, 1], size=(self.count, n))
        ta = rng.uniform(self.theta_box[:, 0], self.theta_box[:, 1], size=(self.count, s))
        tb = rng.uniform(self.theta_box[:, 0], self.theta_box[:, 1], size=(self.count, s))
        return xs, ta, tb

    def to_dict(self):
        return {
            "state_box": self.state_box.tolist(),
            "theta_box": self.theta_box.tolist(),
            "count": int(self.count),
            "seed": int(self.seed),
        }


@dataclass
class ConditionReport:
    """Outcome of one sampled certification.

    ``violations`` holds ``(xbar, theta_a, theta_b, value)`` tuples; the check
    passed exactly when it is empty.
    """

    name: str
    samples_checked: int
    worst_value: float
    violations: list = field(default_factory=list)
    box: dict = field(default_factory=dict)
    nonstrict_samples: int = 0
    stall_manifold: str = ""

    @property
    def passed(self):
        return not self.violations

    def to_dict(self, max_violations=10):
        return {
            "name": self.name,
            "passed": self.passed,
            "samples_checked": self.samples_checked,
            "worst_value": self.worst_value,
            "violation_count": len(self.violations),
            "violations": [
                {"xbar": x.tolist(), "theta_a": a.tolist(), "theta_b": b.tolist(), "value": v}
                for x, a, b, v in self.violations[:max_violations]
            ],
            "nonstrict_samples": self.nonstrict_samples,
            "stall_manifold": self.stall_manifold,
            "box": self.box,
        }


def _beta_and_A(system, x_k, x_prev, theta_est, T):
    plant = system.plant
    A = regressor_A(plant, x_k, x_prev, T)
    xbar = evaluation_point(x_k, x_prev, plant.kind)
    K = system.gain_matrix(xbar, np.asarray(theta_est, dtype=float), A, T)
    return beta_matrix(K, A, system.estimator.alpha), A, xbar


def psi(system, x_k, x_prev, theta, theta_est, T):
    """``beta(x) A(x) phi(x, theta)`` with ``beta`` built from ``theta_est``."""
    b, A, xbar = _beta_and_A(system, x_k, x_prev, theta_est, T)
    return b @ A @ system.plant.decomposition.param_map(xbar, np.asarray(theta, float))


def step_conditions(system, x_k, x_prev, theta_true, theta_est, T, beta_A=None):
    """Monotonicity term and Lipschitz ratio at one sample of a run.

    Returns ``(monotone, ratio)`` where ``monotone`` is
    ``(theta - theta_est)^T P (psi(theta) - psi(theta_est))`` and ``ratio``
    is ``|psi(theta) - psi(theta_est)| / |theta - theta_est|`` (zero when the
    two parameter vectors coincide). ``beta_A`` may carry the ``(beta, A)``
    pair the estimator already built for this sample.
    """
    if beta_A is None:
        b, A, xbar = _beta_and_A(system, x_k, x_prev, theta_est, T)
    else:
        (b, A), xbar = beta_A, evaluation_point(x_k, x_prev, system.plant.kind)
    phi = system.plant.decomposition.param_map
    theta_true = np.asarray(theta_true, dtype=float)
    theta_est = np.asarray(theta_est, dtype=float)
    d_theta = theta_true - theta_est
    d_psi = b @ A @ (phi(xbar, theta_true) - phi(xbar, theta_est))
    monotone = float(d_theta @ system.estimator.P @ d_psi)
    norm = np.linalg.norm(d_theta)
    ratio = float(np.linalg.norm(d_psi) / norm) if norm > 0 else 0.0
    return monotone, ratio


def _sweep(system, sampler, T):
    xs, ta, tb = sampler.draw()
    phi = system.plant.decomposition.param_map
    P = system.estimator.P
    for x, a, b in zip(xs, ta, tb):
        # x[k] = x[k-1] = x makes the evaluation point equal to x.
        beta_, A, _ = _beta_and_A(system, x, x, b, T)
        d_psi = beta_ @ A @ (phi(x, a) - phi(x, b))
        yield x, a, b, d_psi, P


def check_p_monotone(system, sampler, T):
    """Sample ``(a - b)^T P (psi(x, a) - psi(x, b))`` and flag values below ``-1e-12``."""
    worst = np.inf
    violations = []
    nonstrict = 0
    for x, a, b, d_psi, P in _sweep(system, sampler, T):
        value = float((a - b) @ P @ d_psi)
        worst = min(worst, value)
        if value < -MONOTONE_TOL:
            violations.append((x, a, b, value))
        elif value <= MONOTONE_TOL and np.any(a != b):
            nonstrict += 1
    return ConditionReport(
        name="p_monotone",
        samples_checked=int(sampler.count),
        worst_value=float(worst),
        violations=violations,
        box=sampler.to_dict(),
        nonstrict_samples=nonstrict,
        stall_manifold=system.stall_manifold,
    )


def check_lipschitz(system, sampler, T):
    """Estimate the Lipschitz constant of ``psi`` in ``theta``; pass iff it is below one."""
    worst = 0.0
    violations = []
    for x, a, b, d_psi, _ in _sweep(system, sampler, T):
        norm = np.linalg.norm(a - b)
        if norm == 0:
            continue
        ratio = float(np.linalg.norm(d_psi) / norm)
        worst = max(worst, ratio)
        if ratio >= 1.0:
            violations.append((x, a, b, ratio))
    return ConditionReport(
        name="lipschitz",
        samples_checked=int(sampler.count),
        worst_value=worst,
        violations=violations,
        box=sampler.to_dict(),
        stall_manifold=system.stall_manifold,
    )


def lyapunov_trace(traj, P):
    """``V_z = z^T P z`` per sample and its forward difference.

    The difference array has one entry fewer than ``V_z``.
    """
    z = np.atleast_2d(np.asarray(traj.z, dtype=float))
    V = np.einsum("ki,ij,kj->k", z, np.atleast_2d(P), z)
    return V, np.diff(V)


def closed_loop_energy_trace(traj, desired, theta_true):
    """Desired energy along a run, evaluated with the true parameters."""
    return np.array([desired.H_d(x, theta_true) for x in traj.x])
