"""Discrete-time adaptive IDA-PBC with an I&I parameter estimator.

The package models port-controlled Hamiltonian plants in discrete time
(discrete gradients plus forward-Euler stepping), builds IDA-PBC control laws
whose parameters are supplied by an immersion-and-invariance estimator, and
ships numerical verifiers for the estimator's stability conditions.
"""

__version__ = "0.1.0"
