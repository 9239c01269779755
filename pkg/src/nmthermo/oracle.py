"""Exact propagation of the bosonised system+bath Hamiltonian.

Independent of :mod:`nmthermo.spinbath`: builds the full Hamiltonian

    H = omega0 sz - omega (1 - b^+ b / N)
        + 2 alpha [s+ f(b^+ b) b + s- b^+ f(b^+ b)] - alpha sqrt(N) sz (1 - b^+ b / N),
    f(n) = sqrt(1 - n / 2N),

on a truncated Fock space, diagonalises it once and partial-traces the
exactly propagated global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NMThermoError
from .generator import Trajectory
from .qstate import SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, dagger


@dataclass(frozen=True)
class CompositeSystem:
    """System (qubit) tensor truncated bath oscillator.

    With ``guard_level`` the Fock space spans ``n = 0..N+1`` while the
    thermal bath state populates only ``n = 0..N``: the highest populated
    level then still has its partner state for the flip-flop exchange.
    """

    N: int
    bath_dim: int
    hamiltonian: np.ndarray
    bath_hamiltonian: np.ndarray
    bath_state: np.ndarray
    energies: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return 2 * self.bath_dim

    def propagator(self, t):
        return (self.eigenvectors * np.exp(-1j * self.energies * t)) @ dagger(self.eigenvectors)


def partial_trace_bath(state, bath_dim):
    """Trace out the second tensor factor of a ``(2*bath_dim)``-square matrix (or stack)."""
    state = np.asarray(state)
    sys_dim = state.shape[-1] // bath_dim
    if sys_dim * bath_dim != state.shape[-1]:
        raise DimensionError("state dimension is not a multiple of bath_dim")
    shaped = state.reshape(state.shape[:-2] + (sys_dim, bath_dim, sys_dim, bath_dim))
    return np.einsum("...ajbj->...ab", shaped)


def build_composite(params, guard_level=True):
    N, w0, w, a, T = params.N, params.omega0, params.omega, params.alpha, params.T
    nb = N + 2 if guard_level else N + 1
    levels = np.arange(nb, dtype=float)
    b = np.diag(np.sqrt(levels[1:]), 1).astype(complex)
    number = np.diag(levels)
    f = np.diag(np.sqrt(np.clip(1 - levels / (2 * N), 0.0, None)))
    eye_b, eye_s = np.eye(nb), np.eye(2)
    h_bath = -w * (eye_b - number / N)
    h = (
        w0 * np.kron(SIGMA_Z, eye_b)
        + np.kron(eye_s, h_bath)
        + 2 * a * (np.kron(SIGMA_PLUS, f @ b) + np.kron(SIGMA_MINUS, dagger(b) @ f))
        - a * math.sqrt(N) * np.kron(SIGMA_Z, eye_b - number / N)
    )
    herm_dev = np.max(np.abs(h - dagger(h)))
    if herm_dev > 1e-12:
        raise NMThermoError(f"composite Hamiltonian not Hermitian ({herm_dev:.2e})")
    energy = np.real(np.diag(h_bath))
    log_w = -(energy - energy[: N + 1].min()) / T
    pops = np.exp(log_w)
    pops[N + 1:] = 0.0
    bath_state = np.diag(pops / pops.sum()).astype(complex)
    try:
        energies, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NMThermoError(f"eigendecomposition failed: {exc}") from exc
    return CompositeSystem(N, nb, h, h_bath, bath_state, energies, vecs)


def exact_reduced_trajectory(cs, rho0, grid):
    """Reduced qubit states ``Tr_B[U(t) (rho0 x rho_B) U(t)^+]`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise DimensionError("system state must be a qubit")
    v = cs.eigenvectors
    # work in the eigenbasis: R(t)_jk = R0_jk exp(-i (E_j - E_k) t)
    r0 = dagger(v) @ np.kron(rho0, cs.bath_state) @ v
    states = np.empty((len(grid), 2, 2), dtype=complex)
    for k, t in enumerate(grid):
        phase = np.exp(-1j * cs.energies * t)
        global_state = (v * phase) @ r0 @ dagger(v * phase)
        states[k] = partial_trace_bath(global_state, cs.bath_dim)
    return Trajectory(grid, states)


@dataclass(frozen=True)
class DeviationReport:
    max_error: float
    rms_error: float
    t_at_max: float
    tol: float

    @property
    def passed(self):
        return bool(self.max_error <= self.tol)

    def as_dict(self):
        return {
            "max_error": self.max_error,
            "rms_error": self.rms_error,
            "t_at_max": self.t_at_max,
            "tol": self.tol,
            "pass": self.passed,
        }


def finite_difference_check(series, analytic, tol):
    """Max-abs / RMS deviation between two aligned series (ThermoSeries or ``(times, values)``)."""
    t1, v1 = _unpack(series)
    t2, v2 = _unpack(analytic)
    if t1.shape != t2.shape or not np.allclose(t1, t2, rtol=0, atol=1e-12):
        raise DimensionError("series grids do not match")
    diff = np.abs(v1 - v2)
    if diff.ndim > 1:
        diff = diff.reshape(len(t1), -1).max(axis=1)
    k = int(np.argmax(diff))
    return DeviationReport(float(diff[k]), float(np.sqrt(np.mean(diff**2))), float(t1[k]), tol)


def _unpack(series):
    if hasattr(series, "times"):
        values = series.values if hasattr(series, "values") else series.states
        return np.asarray(series.times, dtype=float), np.asarray(values)
    times, values = series
    return np.asarray(times, dtype=float), np.asarray(values)
