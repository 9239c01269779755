"""Verification suite: oracle equivalence, identity residuals and randomized ensemble checks."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import scenarios, thermo
from .errors import NMThermoError
from .generator import (
    LindbladGenerator,
    LindbladTerm,
    check_all_normal,
    check_detailed_balance,
    check_gibbs_fixed_point,
    check_unital,
    evolve,
    evolve_many,
)
from .models import born_markov_qubit, depolarizing, oscillating_rate, planck_number, thermal_qubit_hamiltonian
from .oracle import build_composite, exact_reduced_trajectory
from .qstate import (
    EXCITED,
    PAULIS,
    SIGMA_MINUS,
    SIGMA_PLUS,
    bloch_state,
    dagger,
    is_normal,
    random_density_matrix,
    random_unitary,
    relative_entropy,
    renyi_relative_entropy,
    trace_distance,
)
from .scenarios import CheckResult
from .spinbath import DEFAULT_INITIAL_STATE, SpinBath, SpinBathParams, reduced_state

PINSKER_GAMMAS = (0.1, 0.3, 0.5, 0.9, 1.0)
COMPLEMENTARITY_GAMMAS = (0.3, 0.5, 1.0)


def thread_count():
    """Worker cap from ``NM_THERMO_THREADS`` (default: CPU count)."""
    raw = os.environ.get("NM_THERMO_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


# random operator ensembles

def random_hermitian(dim, rng):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + dagger(g)) / 2


def random_normal_operator(dim, rng):
    u = random_unitary(dim, rng)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return (u * z) @ dagger(u)


def random_nonnormal_operator(dim, rng):
    while True:
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        if not is_normal(g, 1e-6):
            return g


def random_normal_generator(rng, dim=None):
    """Hermitian and unitary-conjugated normal jump operators with generic positive rates."""
    dim = dim or int(rng.integers(2, 5))
    terms = []
    for _ in range(int(rng.integers(1, 5))):
        op = random_hermitian(dim, rng) if rng.random() < 0.5 else random_normal_operator(dim, rng)
        terms.append(LindbladTerm(op, float(rng.uniform(0.1, 2.0))))
    return LindbladGenerator(dim, tuple(terms), random_hermitian(dim, rng))


def random_nonnormal_generator(rng, dim=None):
    """At least one non-normal jump operator, generic positive rates."""
    dim = dim or int(rng.integers(2, 5))
    terms = [LindbladTerm(random_nonnormal_operator(dim, rng), float(rng.uniform(0.1, 2.0)))]
    for _ in range(int(rng.integers(0, 3))):
        op = random_nonnormal_operator(dim, rng) if rng.random() < 0.5 else random_normal_operator(dim, rng)
        terms.append(LindbladTerm(op, float(rng.uniform(0.1, 2.0))))
    order = rng.permutation(len(terms))
    return LindbladGenerator(dim, tuple(terms[i] for i in order), random_hermitian(dim, rng))


def perturbed_born_markov(gamma, omega0, beta, factor):
    """Born-Markov qubit with the absorption rate scaled by ``factor``."""
    n = planck_number(omega0, beta)
    return LindbladGenerator(
        2,
        (LindbladTerm(SIGMA_MINUS, gamma * (n + 1)), LindbladTerm(SIGMA_PLUS, gamma * n * factor)),
        omega0 * EXCITED,
    )


# individual checks

def oracle_equivalence(N, tol=1e-6, t_max=10.0, step=0.05, rho0=DEFAULT_INITIAL_STATE):
    params = SpinBathParams(N=N)
    grid = scenarios.uniform_grid(t_max, step)
    exact = exact_reduced_trajectory(build_composite(params), rho0, grid).states
    closed = reduced_state(params, rho0, grid)
    err = np.abs(exact - closed)
    k = int(np.argmax(err.reshape(len(grid), -1).max(axis=1)))
    return CheckResult(
        f"oracle_equivalence_N{N}", float(err.max()), tol,
        detail={"rms_error": float(np.sqrt(np.mean(err**2))), "t_at_max": float(grid[k]), "N": N},
    )


def rate_reconstruction(n_states=10, seed=0, tol=1e-5, params=None, t_max=10.0, step=1e-3):
    params = params or SpinBathParams()
    rng = np.random.default_rng(seed)
    states = np.stack([random_density_matrix(2, rng) for _ in range(n_states)])
    grid = scenarios.uniform_grid(t_max, 0.05)
    gen = SpinBath(params).generator()
    detail = {"states": n_states, "N": params.N}
    try:
        trajs = evolve_many(gen, states, grid, step)
    except NMThermoError as exc:
        detail.update(error=str(exc), t=exc.t)
        return CheckResult("rate_reconstruction", np.inf, tol, detail=detail)
    err = max(float(np.max(np.abs(tr.states - reduced_state(params, r0, grid)))) for tr, r0 in zip(trajs, states))
    return CheckResult("rate_reconstruction", err, tol, detail=detail)


def unitality_ensembles(n=500, seed=0):
    rng = np.random.default_rng(seed)
    normal_fail = sum(1 for _ in range(n) if not check_unital(random_normal_generator(rng)))
    nonnormal_pass = 0
    for _ in range(n):
        gen = random_nonnormal_generator(rng)
        if check_all_normal(gen) or check_unital(gen):
            nonnormal_pass += 1
    return CheckResult(
        "unitality_ensembles", normal_fail + nonnormal_pass, 0,
        detail={"normal_not_unital": normal_fail, "nonnormal_unital": nonnormal_pass, "size": n},
    )


def detailed_balance_ensemble(n=20, seed=0):
    rng = np.random.default_rng(seed)
    wrong = 0
    for _ in range(n):
        gamma, omega0, beta = rng.uniform(0.1, 3.0), rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)
        h0 = thermal_qubit_hamiltonian(omega0)
        good = born_markov_qubit(gamma, omega0, beta)
        bad = perturbed_born_markov(gamma, omega0, beta, 1.01)
        wrong += not check_detailed_balance(good, h0, beta)
        wrong += not check_gibbs_fixed_point(good, h0, beta)
        wrong += check_detailed_balance(bad, h0, beta)
        wrong += check_gibbs_fixed_point(bad, h0, beta)
    return CheckResult("detailed_balance_ensemble", wrong, 0, detail={"triples": n})


def pinsker_sweep(n_pairs=10_000, seed=0, gammas=PINSKER_GAMMAS):
    rng = np.random.default_rng(seed)
    worst = np.inf
    for dim in (2, 3):
        rho = np.stack([random_density_matrix(dim, rng) for _ in range(n_pairs)])
        sigma = np.stack([random_density_matrix(dim, rng) for _ in range(n_pairs)])
        dist2 = trace_distance(rho, sigma) ** 2
        for g in gammas:
            div = relative_entropy(rho, sigma) if g == 1 else renyi_relative_entropy(rho, sigma, g)
            worst = min(worst, float(np.min(div - 2 * g * dist2)))
    return CheckResult("pinsker_sweep", worst, -1e-10, kind="min", detail={"pairs_per_dim": n_pairs})


def model_zoo(step=1e-3):
    """``(name, trajectory, context)`` for each reference model."""
    grid3 = scenarios.uniform_grid(3.0, step)
    dep = evolve(depolarizing(oscillating_rate), bloch_state([0.3, 0.4, 0.5]), grid3, step)
    flat = thermo.ThermalContext(np.zeros((2, 2)), 1.0)
    grid10 = scenarios.uniform_grid(10.0, step)
    bm = evolve(born_markov_qubit(1.0, 1.0, 1.0), EXCITED, grid10, step)
    bm_ctx = thermo.ThermalContext(thermal_qubit_hamiltonian(1.0), 1.0)
    model = SpinBath(SpinBathParams())
    sb = model.trajectory(DEFAULT_INITIAL_STATE, grid10)
    return [("depolarize", dep, flat), ("thermal-qubit", bm, bm_ctx), ("spinbath", sb, model.context())]


def complementarity_zoo(gammas=COMPLEMENTARITY_GAMMAS):
    worst, where = np.inf, None
    for name, traj, ctx in model_zoo():
        for g in gammas:
            low = float(np.min(thermo.complementarity_residual(traj, ctx, g).values))
            if low < worst:
                worst, where = low, f"{name}@{g:g}"
    return CheckResult("complementarity_zoo", worst, -1e-6, kind="min", detail={"worst": where})


def renyi_rate(gammas=(0.5, 2.0), tol=1e-5, step=2e-4):
    gen = depolarizing(oscillating_rate)
    grid = scenarios.uniform_grid(3.0, step)
    traj = evolve(gen, bloch_state([0.3, 0.4, 0.5]), grid, step)
    worst = 0.0
    for g in gammas:
        entropy = np.array([thermo.renyi_entropy(r, g) for r in traj.states])
        fd = thermo.derivative(entropy, grid)
        analytic = np.array([thermo.renyi_entropy_rate_unital(r, gen, t, g) for t, r in zip(grid, traj.states)])
        worst = max(worst, float(np.max(np.abs(fd - analytic))))
    rng = np.random.default_rng(1)
    chis = [thermo.renyi_chi(random_density_matrix(2, rng), p, g) for _ in range(200) for p in PAULIS for g in gammas]
    return [
        CheckResult("renyi_rate_vs_finite_difference", worst, tol),
        CheckResult("renyi_chi_positive", float(min(chis)), 0.0, kind="min"),
    ]


def gepr_static(tol=1e-10):
    grid = scenarios.uniform_grid(10.0, 1e-3)
    traj = evolve(born_markov_qubit(1.0, 1.0, 1.0), EXCITED, grid)
    ctx = thermo.ThermalContext(thermal_qubit_hamiltonian(1.0), 1.0)
    diff = np.max(np.abs(thermo.gepr(traj, ctx).values - thermo.epr(traj, ctx).values))
    return CheckResult("gepr_equals_epr_static", float(diff), tol)


def run_suite(level="fast", seed=0):
    if level not in ("fast", "full"):
        raise ValueError(f"unknown level {level!r}")
    full = level == "full"
    sizes = (4, 6, 8, 10, 12) if full else (4, 6)
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        checks = list(pool.map(oracle_equivalence, sizes))
    checks.append(rate_reconstruction(10 if full else 3, seed))
    checks += scenarios.depolarize().checks
    checks += scenarios.thermal_qubit().checks
    spin = scenarios.spinbath(step=1e-4) if full else scenarios.spinbath()
    checks += spin.checks
    checks.append(gepr_static())
    checks.append(pinsker_sweep(10_000 if full else 1_000, seed))
    checks.append(complementarity_zoo())
    if full:
        checks.append(unitality_ensembles(500, seed))
        checks.append(detailed_balance_ensemble(20, seed))
        checks += renyi_rate()
    return checks
