"""Small reference generators used across the package."""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError
from .generator import LindbladGenerator, LindbladTerm, constant_rate, vectorized
from .qstate import EXCITED, PAULIS, SIGMA_MINUS, SIGMA_PLUS


@vectorized
def oscillating_rate(t):
    """``exp(-t) cos t``: negative on (pi/2, 3pi/2)."""
    if np.ndim(t) == 0:
        return math.exp(-t) * math.cos(t)
    return np.exp(-t) * np.cos(t)


def depolarizing(rate=oscillating_rate):
    """Qubit Pauli channel with the same rate on all three Paulis."""
    if not callable(rate):
        rate = constant_rate(rate)
    return LindbladGenerator(2, tuple(LindbladTerm(p, rate) for p in PAULIS))


def planck_number(omega0, beta):
    if not beta > 0:
        raise ParameterError("Planck number needs beta > 0")
    return 1.0 / math.expm1(beta * omega0)


def born_markov_qubit(gamma, omega0, beta):
    """Weak-coupling qubit in a bosonic bath.

    ``sigma_-`` at rate ``gamma (n + 1)``, ``sigma_+`` at rate ``gamma n`` with
    ``n`` the Planck number, and ``H0 = omega0 |1><1|``.
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    n = planck_number(omega0, beta)
    return LindbladGenerator(
        2,
        (
            LindbladTerm(SIGMA_MINUS, constant_rate(gamma * (n + 1))),
            LindbladTerm(SIGMA_PLUS, constant_rate(gamma * n)),
        ),
        omega0 * EXCITED,
    )


def thermal_qubit_hamiltonian(omega0):
    return omega0 * EXCITED
