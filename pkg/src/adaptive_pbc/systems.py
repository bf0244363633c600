"""Concrete plants: the single pendulum and the inertia wheel pendulum.

Each builder wires the plant model, its uncertain-gradient decomposition, the
desired Hamiltonian system and the estimator gain matrix ``K`` into a
:class:`SystemBundle`.

Pendulum, ``x = [q, p]``, unknown ``theta = [L]``::

    H  = p^2 / (2 m L^2) - m g L cos q
    Hd = p^2 / (2 m L^2) - m g L cos q + k_p/2 (q - q* - m g L sin(q*) / k_p)^2

Inertia wheel, ``x = [q1, q2, p1, p2]``, unknown ``theta = [I1, I2]``::

    H  = p1^2 / (2 I1) + p2^2 / (2 I2) + m3 (cos q1 - 1),    m3 = m g L
    Hd = p^T Md^{-1} p / 2 + I1 m3 / (a1 + a2) (cos q1 - 1) + k1/2 (q2 + g2 q1)^2

with ``Md = [[a1, a2], [a2, a3]]`` and ``g2 = -I1 (a2 + a3) / (I2 (a1 + a2))``.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimator import EstimatorGains, beta, gain_formula_pendulum
from .exceptions import ContractError, DomainError
from .idapbc import ControllerGains, DesiredSystem
from .pch import StructureMatrices, UncertainDecomposition, UncertainPchModel

log = logging.getLogger(__name__)

GRAVITY = 9.81
C_POLICIES = ("constant", "formula")


def _positive_theta(theta):
    theta = np.asarray(theta, dtype=float)
    # NaN fails the comparison.
    for v in theta.tolist():
        if not 0 < v < np.inf:
            raise DomainError(f"parameters must be positive and finite, got {theta}")
    return theta


@dataclass(frozen=True)
class PendulumParams:
    """Physical and target-design constants of the pendulum.

    ``length`` is the true value of the uncertain parameter.
    """

    m: float = 1.0
    length: float = 2.0
    gravity: float = GRAVITY
    k_p: float = 40.0
    q_star: float = 2.0
    K_v: float = 5.0

    def __post_init__(self):
        for name in ("m", "length", "gravity", "k_p", "K_v"):
            if not getattr(self, name) > 0:
                raise ContractError(f"pendulum parameter {name} must be positive")

    def constraint_warnings(self, length=None):
        """Messages for violated soft constraints (``k_p > m g L``)."""
        L = self.length if length is None else length
        mgL = self.m * self.gravity * L
        if self.k_p > mgL:
            return []
        return [f"constraint k_p > m*g*L violated: k_p={self.k_p} <= m*g*L={mgL:.6g}"]


@dataclass(frozen=True)
class WheelParams:
    m: float = 1.0
    length: float = 1.0
    gravity: float = GRAVITY
    I1: float = 0.15
    I2: float = 0.08
    a1: float = 2.0
    a2: float = -3.0
    a3: float = 5.0
    k1: float = 0.214
    K_v: float = 10.0

    def __post_init__(self):
        for name in ("m", "length", "gravity", "I1", "I2", "k1", "K_v"):
            if not getattr(self, name) > 0:
                raise ContractError(f"wheel parameter {name} must be positive")
        for err in self.constraint_violations():
            raise ContractError(err)

    def constraint_violations(self):
        a1, a2, a3 = self.a1, self.a2, self.a3
        out = []
        if not a1 > 0:
            out.append(f"constraint a1 > 0 violated: a1={a1}")
        if not a1 * a3 > a2**2:
            out.append(f"constraint a1*a3 > a2^2 violated: {a1 * a3} <= {a2**2}")
        if not a1 + a2 < 0:
            out.append(f"constraint a1 + a2 < 0 violated: a1 + a2 = {a1 + a2}")
        return out

    @property
    def m3(self):
        return self.m * self.gravity * self.length

    @property
    def k2(self):
        return self.a1 * self.a3 - self.a2**2

    def gamma2(self, I1, I2):
        return -I1 * (self.a2 + self.a3) / (I2 * (self.a1 + self.a2))


@dataclass(frozen=True)
class SystemBundle:
    """Everything a closed-loop run needs for one plant."""

    name: str
    plant: UncertainPchModel
    desired: DesiredSystem
    controller: ControllerGains
    estimator: EstimatorGains
    gain_matrix: Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]
    theta_true: np.ndarray
    theta_nominal: np.ndarray
    params: object
    state_names: tuple
    input_names: tuple
    stall_manifold: str

    @property
    def target(self):
        return self.desired.target

    @property
    def n_positions(self):
        return self.plant.n // 2


def build_pendulum(params, estimator, nominal_theta=(4.0,), c_policy="constant", c_scale=1.0):
    """Pendulum bundle with ``theta = [L]``.

    The desired inertia equals the plant inertia, so ``Jd = J`` and only the
    potential is reshaped. ``c_policy="formula"`` replaces the constant ``c1``
    by ``c_scale`` times the state-dependent value of
    :func:`gain_formula_pendulum`; ``c_scale > 1`` deliberately breaks the
    Lipschitz bound.
    """
    if c_policy not in C_POLICIES:
        raise ContractError(f"unknown c policy {c_policy!r}")
    if not c_scale > 0:
        raise ContractError(f"c_scale must be positive, got {c_scale}")
    if estimator.s != 1:
        raise ContractError("pendulum estimator needs exactly one gain c1")
    for msg in params.constraint_warnings():
        log.warning("pendulum: %s", msg)
    m, grav, k_p, q_star = params.m, params.gravity, params.k_p, params.q_star

    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    R = np.zeros((2, 2))
    g_in = np.array([[0.0], [1.0]])
    structure = StructureMatrices(lambda x: J, lambda x: R, lambda x: g_in, n=2, m=1)

    def hamiltonian(x, theta):
        (L,) = _positive_theta(theta)
        return x[1] ** 2 / (2 * m * L**2) - m * grav * L * np.cos(x[0])

    def gradient(x, theta):
        (L,) = _positive_theta(theta)
        return np.array([m * grav * L * np.sin(x[0]), x[1] / (m * L**2)])

    def regressor_shape(xbar):
        return np.array([[m * grav * np.sin(xbar[0]), 0.0], [0.0, xbar[1] / m]])

    def param_map(xbar, theta):
        (L,) = _positive_theta(theta)
        return np.array([L, 1.0 / L**2])

    decomposition = UncertainDecomposition(
        known_gradient=lambda xbar: np.zeros(2),
        regressor_shape=regressor_shape,
        param_map=param_map,
        s=1,
        r=2,
    )
    plant = UncertainPchModel(structure, decomposition, hamiltonian, gradient)

    def potential_offset(L):
        return q_star + m * grav * L * np.sin(q_star) / k_p

    def H_d(x, theta):
        (L,) = _positive_theta(theta)
        return (
            x[1] ** 2 / (2 * m * L**2)
            - m * grav * L * np.cos(x[0])
            + 0.5 * k_p * (x[0] - potential_offset(L)) ** 2
        )

    def grad_H_d(x, theta):
        (L,) = _positive_theta(theta)
        return np.array([
            m * grav * L * np.sin(x[0]) + k_p * (x[0] - potential_offset(L)),
            x[1] / (m * L**2),
        ])

    R_d = np.diag([0.0, params.K_v])
    desired = DesiredSystem(
        J_d=lambda x, theta: J,
        R_d=lambda x: R_d,
        H_d=H_d,
        grad_H_d=grad_H_d,
        target=np.array([q_star, 0.0]),
    )

    c1 = float(estimator.c[0])

    def gain_matrix(xbar, theta_est, A, T):
        if c_policy == "formula":
            c = gain_formula_pendulum(xbar, T, m, grav, estimator.alpha, estimator.delta, A)
            return np.array([[c_scale * c, 0.0]])
        return np.array([[c1, 0.0]])

    return SystemBundle(
        name="pendulum",
        plant=plant,
        desired=desired,
        controller=ControllerGains(np.array([[params.K_v]])),
        estimator=estimator,
        gain_matrix=gain_matrix,
        theta_true=np.array([params.length]),
        theta_nominal=np.asarray(nominal_theta, dtype=float),
        params=params,
        state_names=("q", "p"),
        input_names=("u",),
        stall_manifold="sin(qbar) = 0",
    )


def build_wheel(params, estimator, nominal_theta=(0.1, 0.1)):
    """Inertia wheel pendulum bundle with ``theta = [I1, I2]``.

    ``g2`` and the inertia-dependent entries of ``Jd`` are recomputed from the
    parameter vector at every evaluation; ``a1..a3`` and ``k1`` are fixed.
    """
    if estimator.s != 2:
        raise ContractError("wheel estimator needs two gains c1, c2")
    a1, a2, a3, k1, m3, k2 = params.a1, params.a2, params.a3, params.k1, params.m3, params.k2
    Z = np.zeros((2, 2))
    J = np.block([[Z, np.eye(2)], [-np.eye(2), Z]])
    R = np.zeros((4, 4))
    G = np.array([[-1.0], [1.0]])
    g_in = np.vstack([np.zeros((2, 1)), G])
    structure = StructureMatrices(lambda x: J, lambda x: R, lambda x: g_in, n=4, m=1)

    def hamiltonian(x, theta):
        I1, I2 = _positive_theta(theta)
        return x[2] ** 2 / (2 * I1) + x[3] ** 2 / (2 * I2) + m3 * (np.cos(x[0]) - 1)

    def gradient(x, theta):
        I1, I2 = _positive_theta(theta)
        return np.array([-m3 * np.sin(x[0]), 0.0, x[2] / I1, x[3] / I2])

    def known_gradient(xbar):
        return np.array([-m3 * np.sin(xbar[0]), 0.0, 0.0, 0.0])

    def regressor_shape(xbar):
        return np.array([[0.0, 0.0], [0.0, 0.0], [xbar[2], 0.0], [0.0, xbar[3]]])

    def param_map(xbar, theta):
        return 1.0 / _positive_theta(theta)

    decomposition = UncertainDecomposition(known_gradient, regressor_shape, param_map, s=2, r=2)
    plant = UncertainPchModel(structure, decomposition, hamiltonian, gradient)

    M_d = np.array([[a1, a2], [a2, a3]])

    def J_d(x, theta):
        inv = 1.0 / _positive_theta(theta)
        out = np.zeros((4, 4))
        out[:2, 2:] = inv[:, None] * M_d
        out[2:, :2] = -M_d * inv[None, :]
        return out

    def H_d(x, theta):
        I1, I2 = _positive_theta(theta)
        q1, q2, p1, p2 = x
        s = q2 + params.gamma2(I1, I2) * q1
        return (
            (a3 * p1**2 - 2 * a2 * p1 * p2 + a1 * p2**2) / (2 * k2)
            + I1 * m3 / (a1 + a2) * (np.cos(q1) - 1)
            + 0.5 * k1 * s**2
        )

    def grad_H_d(x, theta):
        I1, I2 = _positive_theta(theta)
        q1, q2, p1, p2 = x
        g2 = params.gamma2(I1, I2)
        s = q2 + g2 * q1
        return np.array([
            -I1 * m3 / (a1 + a2) * np.sin(q1) + k1 * g2 * s,
            k1 * s,
            (a3 * p1 - a2 * p2) / k2,
            (a1 * p2 - a2 * p1) / k2,
        ])

    R_d = np.zeros((4, 4))
    R_d[2:, 2:] = params.K_v * (G @ G.T)
    desired = DesiredSystem(
        J_d=J_d, R_d=lambda x: R_d, H_d=H_d, grad_H_d=grad_H_d, target=np.zeros(4)
    )

    c1, c2 = (float(v) for v in estimator.c)

    def gain_matrix(xbar, theta_est, A, T):
        # sign(0) := +1
        t1, t2 = theta_est[0], theta_est[1]
        return np.array([[-c1 if t1 >= 0 else c1, 0.0], [0.0, -c2 if t2 >= 0 else c2]])

    return SystemBundle(
        name="wheel",
        plant=plant,
        desired=desired,
        controller=ControllerGains(np.array([[params.K_v]])),
        estimator=estimator,
        gain_matrix=gain_matrix,
        theta_true=np.array([params.I1, params.I2]),
        theta_nominal=np.asarray(nominal_theta, dtype=float),
        params=params,
        state_names=("q1", "q2", "p1", "p2"),
        input_names=("u",),
        stall_manifold="pbar_i = 0",
    )


def pendulum_beta_gain(system, x_k, x_prev, theta_est, T):
    """``beta`` of a pendulum bundle, shape (1, 2): ``[c1, 0] A^T / eta``."""
    if system.name != "pendulum":
        raise ContractError(f"expected a pendulum bundle, got {system.name!r}")
    return beta(system, x_k, x_prev, theta_est, T)


def wheel_beta_gain(system, x_k, x_prev, theta_est, T):
    """``beta`` of a wheel bundle, shape (2, 4): ``diag(-c_i sign(theta_est_i)) A^T / eta``."""
    if system.name != "wheel":
        raise ContractError(f"expected a wheel bundle, got {system.name!r}")
    return beta(system, x_k, x_prev, theta_est, T)
