"""Discrete-time port-controlled Hamiltonian (PCH) plants.

A plant is described by its structure matrices ``J(x)``, ``R(x)``, ``g(x)``
and an energy function ``H``. Time is discretised by replacing the gradient
with a discrete gradient and the derivative with a forward difference::

    x[k+1] - x[k] = T (J - R) dgrad H + T g u[k]

Vectors are plain 1-D ``numpy`` arrays; matrices are dense 2-D arrays.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ContractError, NumericalBlowup

MIDPOINT = "midpoint"
EXTRAPOLATED = "extrapolated"
GRADIENT_KINDS = (MIDPOINT, EXTRAPOLATED)


def as_vector(x, name="x", size=None):
    """Return ``x`` as a finite float vector, optionally of a given length."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ContractError(f"{name} must be a vector, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise ContractError(f"{name} must have length {size}, got {v.shape[0]}")
    if not np.isfinite(v).all():
        raise ContractError(f"{name} has non-finite entries")
    return v


@dataclass(frozen=True)
class StructureMatrices:
    """Interconnection ``J``, dissipation ``R`` and input matrix ``g_in``."""

    J: Callable[[np.ndarray], np.ndarray]
    R: Callable[[np.ndarray], np.ndarray]
    g_in: Callable[[np.ndarray], np.ndarray]
    n: int
    m: int

    def drift_matrix(self, x):
        """``J(x) - R(x)``."""
        return self.J(x) - self.R(x)


@dataclass(frozen=True)
class EnergyModel:
    """Energy function with its analytic gradient.

    ``kind`` selects the discrete gradient: ``"extrapolated"`` evaluates the
    gradient at ``(3 x[k] - x[k-1]) / 2`` and is explicit; ``"midpoint"``
    evaluates it at ``(x[k] + x[k+1]) / 2``.
    """

    hamiltonian: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    kind: str = EXTRAPOLATED

    def __post_init__(self):
        if self.kind not in GRADIENT_KINDS:
            raise ContractError(f"unknown discrete gradient kind {self.kind!r}")


@dataclass(frozen=True)
class UncertainDecomposition:
    """Split of a discrete gradient into a known part and ``Pi(x) phi(x, theta)``.

    All three callables take the gradient evaluation point (``xbar``), not the
    raw sample, so that the decomposition composes with any discrete gradient.
    """

    known_gradient: Callable[[np.ndarray], np.ndarray]
    regressor_shape: Callable[[np.ndarray], np.ndarray]
    param_map: Callable[[np.ndarray, np.ndarray], np.ndarray]
    s: int
    r: int


@dataclass(frozen=True)
class SamplingConfig:
    T: float
    steps: int

    def __post_init__(self):
        if not self.T > 0:
            raise ContractError(f"sampling period must be positive, got {self.T}")
        if int(self.steps) < 1:
            raise ContractError(f"steps must be >= 1, got {self.steps}")


def evaluation_point(x_k, x_other, kind=EXTRAPOLATED):
    """Point at which the continuous gradient is sampled.

    For the extrapolated kind ``x_other`` is ``x[k-1]`` and the result is
    ``(3 x[k] - x[k-1]) / 2``, i.e. the midpoint between ``x[k]`` and the
    linear prediction ``2 x[k] - x[k-1]`` of ``x[k+1]``. For the midpoint kind
    ``x_other`` is ``x[k+1]``.
    """
    if not (type(x_k) is np.ndarray and x_k.dtype == float):
        x_k = np.asarray(x_k, dtype=float)
    if not (type(x_other) is np.ndarray and x_other.dtype == float):
        x_other = np.asarray(x_other, dtype=float)
    if x_k.shape != x_other.shape:
        raise ContractError(f"state shapes differ: {x_k.shape} vs {x_other.shape}")
    if kind == EXTRAPOLATED:
        return 1.5 * x_k - 0.5 * x_other
    if kind == MIDPOINT:
        return 0.5 * (x_k + x_other)
    raise ContractError(f"unknown discrete gradient kind {kind!r}")


def discrete_gradient(model, x_k, x_other):
    """Discrete gradient of ``model`` for the pair ``(x_k, x_other)``.

    With ``grad H(x) = Q(x) x`` the midpoint form ``Phi_k (x[k+1] + x[k])``,
    ``Phi_k = Q(xm) / 2`` at ``xm = (x[k] + x[k+1]) / 2``, collapses to
    ``grad H(xm)``, so no factorisation ``Q`` is needed.
    """
    xbar = evaluation_point(x_k, x_other, model.kind)
    return np.asarray(model.gradient(xbar), dtype=float)


def uncertain_gradient(dec, xbar, theta):
    """``known_gradient(xbar) + Pi(xbar) phi(xbar, theta)``.

    Raises :class:`~adaptive_pbc.exceptions.DomainError` (from ``param_map``)
    when ``theta`` is not admissible.
    """
    xbar = np.asarray(xbar, dtype=float)
    theta = as_vector(theta, "theta", dec.s)
    phi = np.asarray(dec.param_map(xbar, theta), dtype=float)
    return dec.known_gradient(xbar) + dec.regressor_shape(xbar) @ phi


def plant_step(struct, grad, x_k, u, T, step=None):
    """One forward step ``x + T (J - R) grad + T g u`` of the plant.

    Parameters
    ----------
    struct : StructureMatrices
    grad : ndarray, shape (n,)
        Discrete gradient of the plant energy for this step.
    x_k : ndarray, shape (n,)
    u : ndarray, shape (m,)
    T : float
        Sampling period, strictly positive.
    step : int, optional
        Step index reported if the result is not finite.
    """
    if not T > 0:
        raise ContractError(f"sampling period must be positive, got {T}")
    x_k = np.asarray(x_k, dtype=float)
    grad = np.asarray(grad, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x_k.shape != (struct.n,) or grad.shape != (struct.n,) or u.shape != (struct.m,):
        raise ContractError(
            f"expected x, grad of length {struct.n} and u of length {struct.m}, "
            f"got {x_k.shape}, {grad.shape}, {u.shape}"
        )
    # non-finite results are reported below, not warned about
    with np.errstate(all="ignore"):
        x_next = x_k + T * (struct.drift_matrix(x_k) @ grad) + T * (struct.g_in(x_k) @ u)
    if not np.isfinite(x_next).all():
        raise NumericalBlowup("plant state is not finite", -1 if step is None else step)
    return x_next


def passive_output(struct, grad, x):
    """Passive output ``g(x)^T grad``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (struct.n,):
        raise ContractError(f"gradient must have length {struct.n}, got {grad.shape}")
    return struct.g_in(np.asarray(x, dtype=float)).T @ grad


@dataclass(frozen=True)
class UncertainPchModel:
    """A plant whose energy depends on an unknown parameter vector ``theta``.

    ``hamiltonian(x, theta)`` and ``gradient(x, theta)`` give the monolithic
    energy; ``decomposition`` is the same gradient split into known and
    parameterised parts.
    """

    structure: StructureMatrices
    decomposition: UncertainDecomposition
    hamiltonian: Callable[[np.ndarray, np.ndarray], float]
    gradient: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kind: str = EXTRAPOLATED

    @property
    def n(self):
        return self.structure.n

    @property
    def m(self):
        return self.structure.m

    @property
    def s(self):
        return self.decomposition.s

    def energy(self, theta):
        """The energy model with ``theta`` frozen."""
        theta = np.array(theta, dtype=float)
        return EnergyModel(
            hamiltonian=lambda x: self.hamiltonian(x, theta),
            gradient=lambda x: self.gradient(x, theta),
            kind=self.kind,
        )
