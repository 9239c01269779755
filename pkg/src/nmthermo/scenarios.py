"""Named scenarios: build a model, run it, and collect observable columns plus identity checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import thermo
from .generator import (
    check_detailed_balance,
    check_gibbs_fixed_point,
    divisibility_witness,
    evolve,
    witness_mask,
)
from .models import born_markov_qubit, depolarizing, oscillating_rate, thermal_qubit_hamiltonian
from .purity import depolarizing_bloch_length, purity_report
from .qstate import EXCITED, GROUND, bloch_state, gibbs_state, trace_distance
from .spinbath import DEFAULT_INITIAL_STATE, SpinBath, SpinBathParams, closed_form

INITIAL_STATES = {
    "ground": GROUND,
    "excited": EXCITED,
    "plus": bloch_state([1.0, 0.0, 0.0]),
    "mixed": DEFAULT_INITIAL_STATE,
}

OBSERVABLES = {
    "depolarize": ("P", "dPdt", "gamma", "dPdt_x", "dPdt_y", "dPdt_z", "bloch_length"),
    "thermal-qubit": (
        "p_excited", "sigma", "sigma_heat", "beta_dFdt", "free_energy_residual",
        "free_energy", "heat_current", "athermality",
    ),
    "spinbath": (
        "A", "B", "ReC", "ImC", "Gamma_dis", "Gamma_abs", "Gamma_deph", "U",
        "gepr", "beta_dFgap_dt", "athermality",
    ),
}


@dataclass
class CheckResult:
    """One measured residual against its tolerance.

    ``kind`` is ``"max"`` (pass when value <= tol) or ``"min"`` (pass when
    value >= tol). Non-gating checks are reported but never fail a run.
    """

    name: str
    value: float
    tol: float
    kind: str = "max"
    gating: bool = True
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        if not np.isfinite(self.value):
            return False
        return bool(self.value <= self.tol if self.kind == "max" else self.value >= self.tol)

    def as_dict(self):
        out = {
            "name": self.name,
            "value": float(self.value) if np.isfinite(self.value) else None,
            "tol": float(self.tol),
            "kind": self.kind,
            "pass": self.passed,
            "gating": self.gating,
        }
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class ScenarioResult:
    model: str
    columns: dict
    witness: np.ndarray
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.gating)


def uniform_grid(t_max, step):
    if not step > 0 or not t_max > 0:
        raise ValueError("t_max and step must be positive")
    n = int(round(t_max / step))
    return np.linspace(0.0, n * step, n + 1)


def depolarize(t_max=3.0, step=1e-3, rho0="ground"):
    grid = uniform_grid(t_max, step)
    traj = evolve(depolarizing(oscillating_rate), INITIAL_STATES[rho0], grid, step)
    rep = purity_report(traj)
    r0 = float(rep.bloch_length[0])
    exact_r = np.array([depolarizing_bloch_length(t, r0) for t in grid])
    exact_rate = -4 * rep.gamma * exact_r**2
    active = rep.sign_law_active & (np.abs(rep.gamma) > 1e-9)
    violations = int(np.sum(np.sign(rep.purity_rate[active]) != -np.sign(rep.gamma[active])))
    fd = thermo.derivative(rep.purity, grid)
    columns = {
        "t": grid,
        "P": rep.purity,
        "dPdt": rep.purity_rate,
        "gamma": rep.gamma,
        "dPdt_x": rep.contributions[:, 0],
        "dPdt_y": rep.contributions[:, 1],
        "dPdt_z": rep.contributions[:, 2],
        "bloch_length": rep.bloch_length,
    }
    checks = [
        CheckResult("purity_rate_closed_form", np.max(np.abs(rep.purity_rate - exact_rate)), 1e-6),
        CheckResult("purity_sign_law_violations", violations, 0),
        CheckResult(
            "purity_rate_vs_finite_difference", np.max(np.abs(rep.purity_rate - fd)), 150 * step**2,
            detail={"note": "second-order stencil; tolerance scales as step^2"},
        ),
    ]
    return ScenarioResult("depolarize", columns, rep.witness_flags, checks)


def thermal_qubit(gamma=1.0, omega0=1.0, beta=1.0, t_max=10.0, step=1e-3, rho0="excited"):
    grid = uniform_grid(t_max, step)
    gen = born_markov_qubit(gamma, omega0, beta)
    h0 = thermal_qubit_hamiltonian(omega0)
    ctx = thermo.ThermalContext(h0, beta)
    traj = evolve(gen, INITIAL_STATES[rho0], grid, step)
    sigma = thermo.epr(traj, ctx)
    sigma_heat = thermo.epr(traj, ctx, "entropy-minus-heat")
    free = thermo.free_energy_series(traj, ctx)
    beta_dfdt = beta * thermo.derivative(free.values, grid)
    residual = beta_dfdt + sigma.values
    smallest = np.linalg.eigvalsh(traj.states)[:, 0]
    mixed = smallest > 1e-2
    tau, _ = gibbs_state(h0, beta)
    columns = {
        "t": grid,
        "p_excited": traj.states[:, 0, 0].real,
        "sigma": sigma.values,
        "sigma_heat": sigma_heat.values,
        "beta_dFdt": beta_dfdt,
        "free_energy_residual": residual,
        "free_energy": free.values,
        "heat_current": thermo.heat_current_series(traj, ctx).values,
        "athermality": thermo.athermality_series(traj, ctx).values,
    }
    checks = [
        CheckResult("free_energy_identity", np.max(np.abs(residual)), 1e-4),
        CheckResult("epr_min", np.min(sigma.values), -1e-6, kind="min"),
        CheckResult("detailed_balance", float(check_detailed_balance(gen, h0, beta)), 1.0, kind="min"),
        CheckResult("gibbs_fixed_point", float(check_gibbs_fixed_point(gen, h0, beta)), 1.0, kind="min"),
        CheckResult(
            "epr_method_agreement",
            np.max(np.abs(sigma.values - sigma_heat.values)[mixed]) if mixed.any() else 0.0,
            1e-4,
            gating=False,
            detail={"note": "compared where the smallest eigenvalue exceeds 1e-2"},
        ),
        CheckResult(
            "final_trace_distance_to_gibbs", trace_distance(traj.states[-1], tau), 1e-4,
            gating=t_max * gamma >= 10,
        ),
    ]
    return ScenarioResult("thermal-qubit", columns, witness_mask(divisibility_witness(gen, grid)), checks)


def negative_gepr_counts(gepr_values, witness, threshold=-1e-6):
    """Counts for the claim "negative GEPR only where some rate is negative"."""
    negative = gepr_values < threshold
    return {
        "negative_points": int(np.sum(negative)),
        "negative_unflagged": int(np.sum(negative & ~witness)),
        "flagged_positive": int(np.sum(witness & (gepr_values > 0))),
    }


def spinbath(
    N=20, omega0=1.0, omega=1.0, alpha=0.1, T=1.0, beta=1.0,
    t_max=10.0, step=1e-3, rho0="mixed", phase_form="arg", printed=False,
):
    params = SpinBathParams(N=N, omega0=omega0, omega=omega, alpha=alpha, T=T, beta_ref=beta)
    model = SpinBath(params, printed=printed, phase_form=phase_form)
    grid = uniform_grid(t_max, step)
    traj = model.trajectory(INITIAL_STATES[rho0], grid)
    ctx = model.context()
    cf = closed_form(params, grid, printed)
    rates = model.rates(grid)
    first, second, third = thermo.gepr_decompositions(traj, ctx)
    gap = thermo.free_energy_gap_rate(traj, ctx)
    witness = witness_mask(divisibility_witness(traj.generator, grid))
    columns = {
        "t": grid,
        "A": cf.A,
        "B": cf.B,
        "ReC": cf.C.real,
        "ImC": cf.C.imag,
        "Gamma_dis": rates[0],
        "Gamma_abs": rates[1],
        "Gamma_deph": rates[2],
        "U": rates[3],
        "gepr": first.values,
        "beta_dFgap_dt": gap.values,
        "athermality": thermo.athermality_series(traj, ctx).values,
    }
    decomposition = max(
        np.nanmax(np.abs(first.values - second.values)),
        np.nanmax(np.abs(first.values - third.values)),
        np.nanmax(np.abs(second.values - third.values)),
    )
    counts = negative_gepr_counts(first.values, witness)
    checks = [
        CheckResult("gepr_free_energy_identity", np.nanmax(np.abs(gap.values + first.values)), 1e-4),
        CheckResult(
            "gepr_decomposition_agreement", decomposition, 1e-4, gating=step <= 1e-4,
            detail={"note": "finite-difference limited; gating only for step <= 1e-4"},
        ),
        CheckResult(
            "negative_gepr_unflagged", counts["negative_unflagged"], 0, gating=False, detail=counts,
        ),
    ]
    for g in (0.3, 0.5, 1.0):
        res = thermo.complementarity_residual(traj, ctx, g).values
        checks.append(CheckResult(f"complementarity_min_{g:g}", np.min(res), -1e-6, kind="min"))
    return ScenarioResult("spinbath", columns, witness, checks)


RUNNERS = {"depolarize": depolarize, "thermal-qubit": thermal_qubit, "spinbath": spinbath}

