"""Thermodynamic observables along trajectories.

Time derivatives of scalar series are taken on the trajectory grid with
second-order central differences (second-order one-sided at the ends).
Losses are "initial minus current".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ClassificationError, DimensionError, ParameterError
from .generator import apply_generator, apply_generator_series, check_unital
from .qstate import (
    _entropy_from_eigs,
    _gibbs,
    check_density_matrix,
    matrix_log,
    matrix_power,
    relative_entropy,
    renyi_relative_entropy,
    trace_distance,
)

H_STEP = 1e-5

EPR_METHODS = ("relative-entropy-derivative", "entropy-minus-heat")


@dataclass(frozen=True)
class ThermalContext:
    """Reference Hamiltonian (constant or ``t -> H(t)``) at inverse temperature ``beta``.

    ``hamiltonian_rate`` optionally supplies ``dH/dt`` analytically; otherwise
    it is taken by central differences with step ``h_step``.
    """

    hamiltonian: Union[np.ndarray, Callable[[float], np.ndarray]]
    beta: float
    hamiltonian_rate: Optional[Callable[[float], np.ndarray]] = None
    h_step: float = H_STEP

    def __post_init__(self):
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if not callable(self.hamiltonian):
            h = np.asarray(self.hamiltonian, dtype=complex)
            if h.ndim != 2 or h.shape[0] != h.shape[1]:
                raise DimensionError("Hamiltonian must be square")
            object.__setattr__(self, "hamiltonian", h)

    @property
    def static(self):
        return not callable(self.hamiltonian)

    def hamiltonian_at(self, t):
        if self.static:
            return self.hamiltonian
        return np.asarray(self.hamiltonian(t), dtype=complex)

    def hamiltonians(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self.static:
            return np.broadcast_to(self.hamiltonian, (len(times),) + self.hamiltonian.shape)
        if getattr(self.hamiltonian, "vectorized", False):
            return np.asarray(self.hamiltonian(times), dtype=complex)
        return np.stack([self.hamiltonian_at(t) for t in times])

    def hamiltonian_derivative(self, t):
        if self.static:
            return np.zeros_like(self.hamiltonian)
        if self.hamiltonian_rate is not None:
            return np.asarray(self.hamiltonian_rate(t), dtype=complex)
        h = self.h_step
        return (self.hamiltonian_at(t + h) - self.hamiltonian_at(t - h)) / (2 * h)

    def hamiltonian_derivatives(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if getattr(self.hamiltonian_rate, "vectorized", False):
            return np.asarray(self.hamiltonian_rate(times), dtype=complex)
        return np.stack([self.hamiltonian_derivative(t) for t in times])

    def gibbs(self, t=0.0):
        return _gibbs(self.hamiltonian_at(t), self.beta)[0]

    def log_partition(self, t=0.0):
        return float(_gibbs(self.hamiltonian_at(t), self.beta)[1])

    def partition(self, t=0.0):
        return float(np.exp(self.log_partition(t)))

    def thermal_entropy(self, t=0.0):
        return float(_entropy_from_eigs(np.linalg.eigvalsh(self.gibbs(t))))

    def gibbs_series(self, times):
        """Stacked ``(tau(t_k), ln Z(t_k))`` over a grid."""
        return _gibbs(self.hamiltonians(times), self.beta)


@dataclass
class ThermoSeries:
    times: np.ndarray
    values: np.ndarray
    label: str
    divergent: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.times.shape:
            raise DimensionError(f"series '{self.label}' not aligned with its grid")

    def __len__(self):
        return len(self.times)


def derivative(values, times):
    """Second-order finite-difference derivative on a (possibly non-uniform) grid."""
    values = np.asarray(values, dtype=float)
    if len(values) < 3:
        raise ValueError("need at least 3 points to differentiate")
    return np.gradient(values, np.asarray(times, dtype=float), edge_order=2)


def _derivative_series(values, times, label, negate=False):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    filled = np.where(bad, 0.0, values)
    out = derivative(filled, times)
    if negate:
        out = -out
    divergent = None
    if bad.any():
        # a divergent sample poisons the stencils that touch it
        divergent = bad | np.roll(bad, 1) | np.roll(bad, -1)
        divergent[0] |= bad[:3].any()
        divergent[-1] |= bad[-3:].any()
        out = np.where(divergent, np.nan, out)
    return ThermoSeries(times, out, label, divergent)


def _trace_real(a, b):
    return np.real(np.einsum("...ij,...ji->...", a, b))


def _state_rates(traj):
    """``drho/dt`` at every grid time: generator action when available."""
    if traj.generator is not None:
        return apply_generator_series(traj.generator, traj.times, traj.states)
    return np.gradient(traj.states, traj.times, axis=0, edge_order=2)


def _require_points(traj):
    if len(traj) < 3:
        raise ValueError("trajectory needs at least 3 points")


def relative_entropy_series(traj, ctx):
    taus, _ = ctx.gibbs_series(traj.times)
    return np.atleast_1d(relative_entropy(traj.states, taus))


def _entropy_rate(states, rates):
    """``dS/dt = -Tr[rho' ln rho]``."""
    return -_trace_real(rates, matrix_log(states))


def _entropy_minus_heat(traj, ctx, rates=None):
    rates = _state_rates(traj) if rates is None else rates
    hams = ctx.hamiltonians(traj.times)
    return _entropy_rate(traj.states, rates) - ctx.beta * _trace_real(hams, rates)


def epr(traj, ctx, method="relative-entropy-derivative"):
    """Entropy production rate against the context's Gibbs state.

    ``relative-entropy-derivative``: ``-d/dt S(rho(t)||tau)`` by finite
    differences. ``entropy-minus-heat``: ``dS/dt - beta Tr[H rho']`` with
    ``rho'`` from the trajectory's generator (finite differences if absent);
    requires a time-independent context.
    """
    _require_points(traj)
    if method == "relative-entropy-derivative":
        return _derivative_series(relative_entropy_series(traj, ctx), traj.times, "epr", negate=True)
    if method == "entropy-minus-heat":
        if not ctx.static:
            raise ParameterError("entropy-minus-heat form needs a time-independent Hamiltonian")
        return ThermoSeries(traj.times, _entropy_minus_heat(traj, ctx), "epr")
    raise ParameterError(f"unknown EPR method {method!r}; choose from {EPR_METHODS}")


def renyi_epr(traj, ctx, gamma):
    """``-d/dt S_gamma(rho(t)||tau(t))``."""
    _require_points(traj)
    if not gamma > 0 or gamma == 1:
        raise ParameterError(f"Renyi order must be positive and != 1, got {gamma}")
    taus, _ = ctx.gibbs_series(traj.times)
    values = np.atleast_1d(renyi_relative_entropy(traj.states, taus, gamma))
    return _derivative_series(values, traj.times, f"renyi_epr_{gamma:g}", negate=True)


def renyi_chi(rho, op, gamma):
    """Per-operator weight ``chi`` in the Renyi-entropy rate of a unital generator."""
    rho = check_density_matrix(rho)
    op = np.asarray(op, dtype=complex)
    rho_g = matrix_power(rho, gamma)
    rho_gm1 = matrix_power(rho, gamma - 1)
    adag = op.conj().T
    inner = np.trace(rho_gm1 @ op @ rho @ adag - rho_g @ adag @ op).real
    return gamma / (1 - gamma) * inner / np.trace(rho_g).real


def renyi_entropy_rate_unital(rho, gen, t, gamma):
    """Analytic ``d/dt S_gamma(rho)`` for a unital generator: ``sum_a G_a(t) chi_a``.

    ``S_gamma = ln Tr[rho^gamma] / (1 - gamma)``. The Hamiltonian part does not
    contribute.
    """
    if not gamma > 0 or gamma == 1:
        raise ParameterError(f"Renyi order must be positive and != 1, got {gamma}")
    if not check_unital(gen, t):
        raise ClassificationError("Renyi entropy-rate formula needs a unital generator")
    rates = gen.rates_at(t)
    return float(sum(r * renyi_chi(rho, term.operator, gamma) for r, term in zip(rates, gen.terms)))


def renyi_entropy(rho, gamma):
    rho = check_density_matrix(rho)
    return float(np.log(np.trace(matrix_power(rho, gamma)).real) / (1 - gamma))


def heat_current(gen, rho, ctx, t):
    """``J = Tr[H(t) L_t(rho)]``."""
    return float(np.trace(ctx.hamiltonian_at(t) @ apply_generator(gen, rho, t)).real)


def heat_current_series(traj, ctx):
    """``J(t_k)`` along a trajectory, using its generator when attached."""
    return ThermoSeries(traj.times, _trace_real(ctx.hamiltonians(traj.times), _state_rates(traj)), "heat_current")


def extractable_work(rho, ctx, t=0.0):
    """``W = Tr[H(t)(rho - tau(t))]`` (sign not constrained)."""
    rho = check_density_matrix(rho)
    return float(np.trace(ctx.hamiltonian_at(t) @ (rho - ctx.gibbs(t))).real)


def _require_beta(ctx):
    if not ctx.beta > 0:
        raise ParameterError("free energy needs beta > 0; use the purity observables at beta = 0")


def free_energy(rho, ctx, t=0.0, gamma=None):
    """``<H> - S/beta``, or with ``gamma`` the Renyi form ``(S_gamma(rho||tau) - ln Z)/beta``."""
    _require_beta(ctx)
    rho = check_density_matrix(rho)
    if gamma is None:
        h = ctx.hamiltonian_at(t)
        entropy = _entropy_from_eigs(np.linalg.eigvalsh(rho))
        return float(np.trace(h @ rho).real - entropy / ctx.beta)
    div = relative_entropy(rho, ctx.gibbs(t)) if gamma == 1 else renyi_relative_entropy(rho, ctx.gibbs(t), gamma)
    return float((div - ctx.log_partition(t)) / ctx.beta)


def free_energy_series(traj, ctx, gamma=None):
    _require_beta(ctx)
    if gamma is None:
        hams = ctx.hamiltonians(traj.times)
        entropy = _entropy_from_eigs(np.linalg.eigvalsh(check_density_matrix(traj.states)))
        values = _trace_real(hams, traj.states) - entropy / ctx.beta
    else:
        taus, log_z = ctx.gibbs_series(traj.times)
        if gamma == 1:
            div = relative_entropy(traj.states, taus)
        else:
            div = renyi_relative_entropy(traj.states, taus, gamma)
        values = (np.atleast_1d(div) - log_z) / ctx.beta
    label = "free_energy" if gamma is None else f"renyi_free_energy_{gamma:g}"
    return ThermoSeries(traj.times, values, label)


def athermality(rho, ctx, t=0.0):
    """Trace distance from the (instantaneous) Gibbs state."""
    return trace_distance(rho, ctx.gibbs(t))


def athermality_series(traj, ctx):
    taus, _ = ctx.gibbs_series(traj.times)
    return ThermoSeries(traj.times, np.atleast_1d(trace_distance(traj.states, taus)), "athermality")


def complementarity_residual(traj, ctx, gamma=1.0):
    """Slack in ``dF_gamma(t) + 2 gamma A(t)^2 <= S_gamma(rho(0)||tau(0))``.

    ``dF_gamma(t) = S_gamma(rho(0)||tau(0)) - S_gamma(rho(t)||tau(t))`` is the
    loss of (beta-scaled) generalised free energy and ``A(t)`` the
    athermality against the instantaneous Gibbs state; for a static context
    both reference states coincide. Non-negative by the Renyi-Pinsker bound.
    """
    if not 0 < gamma <= 1:
        raise ParameterError(f"complementarity needs gamma in (0, 1], got {gamma}")
    taus, _ = ctx.gibbs_series(traj.times)
    if gamma == 1:
        div = np.atleast_1d(relative_entropy(traj.states, taus))
    else:
        div = np.atleast_1d(renyi_relative_entropy(traj.states, taus, gamma))
    loss = div[0] - div
    ath = np.atleast_1d(trace_distance(traj.states, taus))
    residual = div[0] - loss - 2 * gamma * ath**2
    return ThermoSeries(traj.times, residual, f"complementarity_residual_{gamma:g}")


def gepr(traj, ctx):
    """Generalised EPR ``-d/dt S(rho(t)||tau(t))``."""
    _require_points(traj)
    return _derivative_series(relative_entropy_series(traj, ctx), traj.times, "gepr", negate=True)


def work_rates(traj, ctx):
    """``(<W>, <W>_th) = (Tr[H'(t) rho(t)], Tr[H'(t) tau(t)])``."""
    taus, _ = ctx.gibbs_series(traj.times)
    hdots = ctx.hamiltonian_derivatives(traj.times)
    return _trace_real(hdots, traj.states), _trace_real(hdots, taus)


def gepr_decompositions(traj, ctx):
    """Three routes to the generalised EPR.

    1. ``-d/dt S(rho||tau(t))``;
    2. ``sigma - beta (<W> - <W>_th)`` with ``sigma = dS/dt - beta Tr[H(t) rho']``
       evaluated pointwise from ``rho'`` (no grid derivative);
    3. ``d/dt [(S - S_th) - beta W]`` with ``W = Tr[H(t)(rho - tau(t))]``.
    """
    _require_points(traj)
    first = gepr(traj, ctx)
    sigma = _entropy_minus_heat(traj, ctx)
    work, work_th = work_rates(traj, ctx)
    second = ThermoSeries(traj.times, sigma - ctx.beta * (work - work_th), "gepr_work")
    taus, _ = ctx.gibbs_series(traj.times)
    hams = ctx.hamiltonians(traj.times)
    entropy = _entropy_from_eigs(np.linalg.eigvalsh(check_density_matrix(traj.states)))
    thermal_entropy = _entropy_from_eigs(np.linalg.eigvalsh(taus))
    potential = entropy - thermal_entropy - ctx.beta * _trace_real(hams, traj.states - taus)
    third = _derivative_series(potential, traj.times, "gepr_potential")
    return first, second, third


def free_energy_gap_rate(traj, ctx):
    """``beta d/dt (F(t) - F_th(t))`` with ``F_th(t) = -ln Z(t)/beta``."""
    _require_points(traj)
    _require_beta(ctx)
    _, log_z = ctx.gibbs_series(traj.times)
    free = free_energy_series(traj, ctx).values
    gap = ctx.beta * (free + log_z / ctx.beta)
    return _derivative_series(gap, traj.times, "beta_dF_gap_dt")
