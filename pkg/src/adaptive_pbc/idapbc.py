"""Discrete-time IDA-PBC: target systems, control laws and matching diagnostics.

The controller renders the closed loop equal to a desired Hamiltonian system

    x[k+1] - x[k] = T (Jd - Rd) dgrad Hd

whenever the matching condition holds. In the adaptive case every quantity
that depends on the plant parameters, including ``Jd`` and ``dgrad Hd``, is
evaluated at the current estimate.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import ContractError, RankDeficientError
from .pch import EXTRAPOLATED, as_vector, evaluation_point

# (g^T g) is rejected above this condition number.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class DesiredSystem:
    """Target Hamiltonian dynamics, parameterised by a parameter vector."""

    J_d: Callable[[np.ndarray, np.ndarray], np.ndarray]
    R_d: Callable[[np.ndarray], np.ndarray]
    H_d: Callable[[np.ndarray, np.ndarray], float]
    grad_H_d: Callable[[np.ndarray, np.ndarray], np.ndarray]
    target: np.ndarray
    kind: str = EXTRAPOLATED

    def discrete_grad_H_d(self, x_k, x_prev, theta):
        return np.asarray(
            self.grad_H_d(evaluation_point(x_k, x_prev, self.kind), theta), dtype=float
        )

    def step(self, x_k, x_prev, theta, T):
        """One step of the desired discrete-time system."""
        x_k = np.asarray(x_k, dtype=float)
        grad = self.discrete_grad_H_d(x_k, x_prev, theta)
        return x_k + T * ((self.J_d(x_k, theta) - self.R_d(x_k)) @ grad)


@dataclass(frozen=True)
class ControllerGains:
    K_v: np.ndarray

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K_v, dtype=float))
        if K.shape[0] != K.shape[1] or not np.allclose(K, K.T, atol=1e-12):
            raise ContractError("K_v must be a symmetric square matrix")
        if np.linalg.eigvalsh(K).min() < -1e-12:
            raise ContractError("K_v must be positive semidefinite")
        object.__setattr__(self, "K_v", K)


def left_annihilator(g_in):
    """Full-row-rank ``g_perp`` with ``g_perp @ g_in = 0``.

    Rows form an orthonormal basis of the left null space of ``g_in``; for a
    fully actuated system the result is an empty ``(0, n)`` matrix.
    """
    g_in = np.atleast_2d(np.asarray(g_in, dtype=float))
    n, m = g_in.shape
    if np.linalg.matrix_rank(g_in) < m:
        raise RankDeficientError(f"input matrix of shape {g_in.shape} is rank deficient")
    return scipy.linalg.null_space(g_in.T).T.reshape(n - m, n)


def _left_pseudo_inverse_apply(g_in, v):
    """``(g^T g)^{-1} g^T v`` via a linear solve."""
    gram = g_in.T @ g_in
    if gram.shape == (1, 1):
        if not gram[0, 0] > 0:
            raise RankDeficientError("g^T g is singular to working precision")
        return (g_in.T @ v) / gram[0, 0]
    if np.linalg.cond(gram) > MAX_CONDITION:
        raise RankDeficientError("g^T g is singular to working precision")
    return np.linalg.solve(gram, g_in.T @ v)


def matching_residual(plant, desired, x_k, x_prev, theta):
    """``g_perp (Jd dgrad Hd - (J - R) dgrad H)`` with everything at ``theta``.

    Zero certifies that the desired dynamics are reachable at this state.
    """
    x_k = as_vector(x_k, "x_k", plant.n)
    theta = np.asarray(theta, dtype=float)
    struct = plant.structure
    grad_H = plant.gradient(evaluation_point(x_k, x_prev, plant.kind), theta)
    grad_Hd = desired.discrete_grad_H_d(x_k, x_prev, theta)
    mismatch = desired.J_d(x_k, theta) @ grad_Hd - struct.drift_matrix(x_k) @ grad_H
    return left_annihilator(struct.g_in(x_k)) @ mismatch


def energy_shaping(plant, desired, x_k, x_prev, theta_est, grad_Hd=None):
    """Energy-shaping input computed with the parameter estimate.

    ``(g^T g)^{-1} g^T {Jd dgrad Hd - (J - R) Pi phi(theta_est) - (J - R) dgrad H_kn}``

    ``grad_Hd`` may be passed in when the caller already has it.
    """
    x_k = as_vector(x_k, "x_k", plant.n)
    theta_est = as_vector(theta_est, "theta_est", plant.s)
    struct, dec = plant.structure, plant.decomposition
    xbar = evaluation_point(x_k, x_prev, plant.kind)
    JR = struct.drift_matrix(x_k)
    if grad_Hd is None:
        grad_Hd = desired.discrete_grad_H_d(x_k, x_prev, theta_est)
    estimated_grad = dec.regressor_shape(xbar) @ dec.param_map(xbar, theta_est)
    v = (
        desired.J_d(x_k, theta_est) @ grad_Hd
        - JR @ estimated_grad
        - JR @ dec.known_gradient(xbar)
    )
    return _left_pseudo_inverse_apply(struct.g_in(x_k), v)


def damping_injection(gains, g_in, grad_H_d):
    """``-K_v g^T dgrad Hd``."""
    return -gains.K_v @ (np.atleast_2d(g_in).T @ np.asarray(grad_H_d, dtype=float))


def adaptive_control(plant, desired, gains, x_k, x_prev, theta_est):
    """Total IDA-PBC input: energy shaping plus damping injection.

    The same function produces the certain-equivalence controller (called with
    the true parameters) and the non-adaptive one (called with nominal values).
    """
    grad_Hd = desired.discrete_grad_H_d(x_k, x_prev, theta_est)
    u_es = energy_shaping(plant, desired, x_k, x_prev, theta_est, grad_Hd)
    u_di = damping_injection(gains, plant.structure.g_in(np.asarray(x_k, float)), grad_Hd)
    return u_es + u_di
