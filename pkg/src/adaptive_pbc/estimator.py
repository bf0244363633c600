"""Immersion-and-invariance parameter estimator.

The estimate is read off an internal state ``theta_hat`` and the current
sample as ``theta_est[k] = theta_hat[k] + beta[k-1] x[k]``. The update

    theta_hat[k+1] = theta_hat[k] + beta[k-1] x[k]
                     - beta[k] (T (J - R) dgrad H_kn + T g u[k] + x[k])
                     - beta[k] A[k] phi(theta_est[k])

makes the estimation error ``z = theta_est - theta`` obey

    z[k+1] - z[k] = beta[k] A[k] (phi(theta) - phi(theta_est[k]))

with ``A = T (J - R) Pi``. Here ``beta[k]`` depends on the pair
``(x[k], x[k-1])`` through the discrete gradient and on ``theta_est[k]``
through the gain, so the state keeps the matrix used at the previous step
rather than recomputing it.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, NumericalBlowup
from .pch import as_vector, evaluation_point


@dataclass(frozen=True)
class EstimatorGains:
    """Free design constants of the estimator.

    Attributes
    ----------
    c : ndarray, shape (s,)
        Positive scalars entering the gain matrix ``K``.
    alpha : float
        Normaliser in ``beta = K A^T / (alpha (sigma_max(A^T A) + 1))``, >= 1.
    P : ndarray, shape (s, s)
        Weight of the error Lyapunov function ``z^T P z``.
    theta_min, theta_max : ndarray, shape (s,)
        Box the extracted estimate is projected onto.
    delta : float
        Regulariser of the state-dependent gain formulas.
    """

    c: np.ndarray
    alpha: float = 1.0
    P: np.ndarray = None
    theta_min: np.ndarray = None
    theta_max: np.ndarray = None
    delta: float = 1e-3

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        s = c.shape[0]
        P = np.eye(s) if self.P is None else np.atleast_2d(np.asarray(self.P, dtype=float))
        lo = np.full(s, 0.01) if self.theta_min is None else as_vector(self.theta_min, "theta_min", s)
        hi = np.full(s, 100.0) if self.theta_max is None else as_vector(self.theta_max, "theta_max", s)
        if np.any(c <= 0):
            raise ContractError("estimator gains c must be positive")
        if not self.alpha >= 1:
            raise ContractError(f"alpha must be >= 1, got {self.alpha}")
        if P.shape != (s, s) or not np.allclose(P, P.T) or np.linalg.eigvalsh(P).min() <= 0:
            raise ContractError("P must be symmetric positive definite of size s x s")
        if np.any(lo >= hi):
            raise ContractError("theta_min must be below theta_max componentwise")
        if not self.delta > 0:
            raise ContractError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "theta_min", lo)
        object.__setattr__(self, "theta_max", hi)

    @property
    def s(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class EstimatorState:
    """Internal estimator state at sample ``k``.

    ``x_prev`` is the plant state one sample behind the one used for
    extraction; ``beta_prev`` is ``beta[k-1]`` (zero before the first update)
    and ``regressor_prev`` the matching ``A[k-1]``.
    """

    theta_hat: np.ndarray
    x_prev: np.ndarray
    beta_prev: np.ndarray
    k: int = 0
    projected: bool = field(default=False, compare=False)
    regressor_prev: np.ndarray = field(default=None, compare=False)


def initial_state(theta_hat0, x0):
    """Estimator state before the first sample, with ``x[-1] := x[0]``.

    No ``beta`` exists before the first update, so ``theta_est[0]`` equals
    ``theta_hat0`` (after projection onto the admissible box).
    """
    theta_hat0 = as_vector(theta_hat0, "theta_hat0")
    x0 = as_vector(x0, "x0")
    return EstimatorState(theta_hat0, x0.copy(), np.zeros((theta_hat0.size, x0.size)), 0)


def spectral_bound(A):
    """Largest eigenvalue of ``A^T A``."""
    A = np.atleast_2d(A)
    G = A.T @ A
    if G.shape == (1, 1):
        return float(G[0, 0])
    if G.shape == (2, 2):
        # closed form for a symmetric 2 x 2 matrix
        a, b, d = float(G[0, 0]), float(G[0, 1]), float(G[1, 1])
        half = 0.5 * (a + d)
        return half + float(np.hypot(0.5 * (a - d), b))
    return float(np.linalg.eigvalsh(G)[-1])


def regressor_A(plant, x_k, x_prev, T):
    """``A = T (J(x_k) - R(x_k)) Pi(xbar)`` for the pair ``(x_k, x_prev)``."""
    x_k = np.asarray(x_k, dtype=float)
    xbar = evaluation_point(x_k, x_prev, plant.kind)
    return T * plant.structure.drift_matrix(x_k) @ plant.decomposition.regressor_shape(xbar)


def beta_matrix(K, A, alpha):
    """``K A^T / (alpha [sigma_max(A^T A) + 1])``; the denominator is >= alpha."""
    K = np.atleast_2d(K)
    return K @ np.atleast_2d(A).T / (alpha * (spectral_bound(A) + 1.0))


def beta(system, x_k, x_prev, theta_est, T):
    """Design function ``beta`` of ``system`` at ``(x_k, x_prev)``.

    ``system`` supplies ``plant``, ``estimator`` (the gains) and
    ``gain_matrix(xbar, theta_est, A, T)``.
    """
    plant = system.plant
    A = regressor_A(plant, x_k, x_prev, T)
    xbar = evaluation_point(x_k, x_prev, plant.kind)
    K = system.gain_matrix(xbar, np.asarray(theta_est, dtype=float), A, T)
    return beta_matrix(K, A, system.estimator.alpha)


def clamp(theta, gains):
    return np.minimum(np.maximum(theta, gains.theta_min), gains.theta_max)


def extract_estimate(state, gains, x_k):
    """``clamp(theta_hat + beta[k-1] x[k])`` onto ``[theta_min, theta_max]``."""
    raw = state.theta_hat + state.beta_prev @ np.asarray(x_k, dtype=float)
    return clamp(raw, gains)


def update(state, system, x_k, u_k, T):
    """Advance the estimator from sample ``k`` to ``k + 1``.

    ``u_k`` must be the input actually applied at sample ``k`` (computed with
    the estimate extracted at ``x_k``). When the extracted estimate was
    clipped, ``theta_hat`` is first moved so that it reproduces the clipped
    value; otherwise this is exactly the unprojected update law.
    """
    plant = system.plant
    x_k = as_vector(x_k, "x_k", plant.n)
    u_k = np.atleast_1d(np.asarray(u_k, dtype=float))
    gains = system.estimator

    raw = state.theta_hat + state.beta_prev @ x_k
    theta_est = clamp(raw, gains)
    projected = bool(np.any(theta_est != raw))
    theta_hat = theta_est - state.beta_prev @ x_k

    struct, dec = plant.structure, plant.decomposition
    xbar = evaluation_point(x_k, state.x_prev, plant.kind)
    JR = struct.drift_matrix(x_k)
    A = T * JR @ dec.regressor_shape(xbar)
    K = system.gain_matrix(xbar, theta_est, A, T)
    b = beta_matrix(K, A, gains.alpha)

    known_motion = T * JR @ dec.known_gradient(xbar) + T * struct.g_in(x_k) @ u_k + x_k
    theta_hat_next = (
        theta_hat
        + state.beta_prev @ x_k
        - b @ known_motion
        - b @ A @ dec.param_map(xbar, theta_est)
    )
    if not np.isfinite(theta_hat_next).all():
        raise NumericalBlowup("estimator state is not finite", state.k)
    return EstimatorState(theta_hat_next, x_k.copy(), b, state.k + 1, projected, A)


def error_recursion_step(system, x_k, x_prev, theta_true, theta_est, z_k, T):
    """``z[k+1] = z[k] + beta[k] A[k] (phi(theta) - phi(theta_est))``.

    Needs the true parameters, so it is only usable on simulated data.
    """
    plant = system.plant
    xbar = evaluation_point(x_k, x_prev, plant.kind)
    A = regressor_A(plant, x_k, x_prev, T)
    K = system.gain_matrix(xbar, np.asarray(theta_est, dtype=float), A, T)
    b = beta_matrix(K, A, system.estimator.alpha)
    phi = plant.decomposition.param_map
    return np.asarray(z_k, dtype=float) + b @ A @ (phi(xbar, theta_true) - phi(xbar, theta_est))


def gain_formula_pendulum(xbar, T, m, grav, alpha, delta, A):
    """State-dependent ``c1`` that keeps the pendulum's Lipschitz factor below one.

    ``c1 = alpha (sigma_max(A^T A) + 1) / (T^2 m^2 g^2 sin^2(qbar) + delta)``
    """
    if not delta > 0:
        raise ContractError(f"delta must be positive, got {delta}")
    s2 = (T * m * grav * np.sin(xbar[0])) ** 2
    return alpha * (spectral_bound(A) + 1.0) / (s2 + delta)


def gain_formula_wheel(xbar, T, theta_lower, theta_est, alpha, delta, A, i):
    """Suggested ``c_i`` for the inertia wheel, or ``None`` where it is singular.

    The unknown true ``theta_i`` is replaced by its lower bound
    ``theta_lower[i]``. The formula divides by the squared momentum
    ``pbar_i``, so it is undefined on ``pbar_i = 0``.
    """
    half = len(xbar) // 2
    p_i = xbar[half + i]
    if p_i == 0:
        return None
    sign = 1.0 if theta_est[i] >= 0 else -1.0
    return (
        alpha * (spectral_bound(A) + 1.0) * theta_lower[i] * theta_est[i]
        / (sign * T**2 * p_i**2 * (delta + 1.0))
    )
