"""Purity flow under unital generators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError
from .generator import check_all_normal, evolve
from .models import depolarizing, oscillating_rate
from .qstate import GROUND, asymmetry, check_density_matrix, purity

R_FLOOR = 1e-6


def purity_rate(rho, gen, t):
    """``dP/dt = -sum_a G_a(t) Q(A_a)`` with ``Q`` the asymmetry of each jump operator.

    Returns ``(total, per_term)``. Requires every jump operator to be normal.
    """
    if not check_all_normal(gen):
        raise ClassificationError("purity-rate decomposition needs normal jump operators")
    rho = check_density_matrix(rho)
    per_term = [-term.rate(t) * asymmetry(rho, term.operator) for term in gen.terms]
    return float(sum(per_term)), per_term


@dataclass
class PurityReport:
    times: np.ndarray
    purity: np.ndarray
    purity_rate: np.ndarray
    contributions: np.ndarray
    rates: np.ndarray
    bloch_length: np.ndarray

    @property
    def gamma(self):
        """Rate of the first jump operator (the common rate for the depolarizing model)."""
        return self.rates[:, 0]

    @property
    def sign_law_active(self):
        """Points where the sign comparison is meaningful (state not maximally mixed)."""
        return self.bloch_length > R_FLOOR

    @property
    def witness_flags(self):
        return np.any(self.rates < -1e-9, axis=1)


def purity_report(traj):
    gen = traj.generator
    if not check_all_normal(gen):
        raise ClassificationError("purity-rate decomposition needs normal jump operators")
    check_density_matrix(traj.states)
    rates = gen.rate_table(traj.times).T
    asym = np.stack([np.atleast_1d(asymmetry(traj.states, term.operator)) for term in gen.terms], axis=1)
    contributions = -rates * asym
    return PurityReport(
        times=traj.times,
        purity=np.atleast_1d(purity(traj.states)),
        purity_rate=contributions.sum(axis=1),
        contributions=contributions,
        rates=rates,
        bloch_length=distance_from_mixed(traj.states),
    )


def distance_from_mixed(rho):
    """``sqrt(2) ||rho - I/d||_HS``: the Bloch-vector length for a qubit."""
    rho = np.asarray(rho)
    d = rho.shape[-1]
    return np.sqrt(2) * np.linalg.norm(rho - np.eye(d) / d, axis=(-2, -1))


def depolarizing_scenario(t_max=3.0, step=1e-3, rho0=GROUND):
    """Depolarizing qubit with all three rates ``exp(-t) cos t``, from ``rho0``."""
    n = int(round(t_max / step))
    grid = np.linspace(0.0, n * step, n + 1)
    traj = evolve(depolarizing(oscillating_rate), rho0, grid, step)
    return purity_report(traj)


def depolarizing_bloch_length(t, r0=1.0):
    """Exact ``|r(t)|`` for the ``exp(-t) cos t`` depolarizing model."""
    return r0 * math.exp(-2 * (1 + math.exp(-t) * (math.sin(t) - math.cos(t))))
