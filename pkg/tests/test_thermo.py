import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from nmthermo import thermo
from nmthermo.errors import ClassificationError, DimensionError, ParameterError
from nmthermo.generator import LindbladGenerator, LindbladTerm, Trajectory, evolve
from nmthermo.models import born_markov_qubit, depolarizing, oscillating_rate, thermal_qubit_hamiltonian
from nmthermo.qstate import (
    EXCITED,
    PAULIS,
    SIGMA_MINUS,
    bloch_state,
    gibbs_state,
    random_density_matrix,
)
from nmthermo.scenarios import uniform_grid
from nmthermo.thermo import ThermalContext

seeds = st.integers(0, 2**32 - 1)
H0 = thermal_qubit_hamiltonian(1.0)
CTX = ThermalContext(H0, 1.0)
FLAT = ThermalContext(np.zeros((2, 2)), 0.0)


def rel_entropy_oracle(rho, sigma):
    return float(np.trace(rho @ (sla.logm(rho) - sla.logm(sigma))).real)


def gibbs_oracle(h, beta):
    m = sla.expm(-beta * h)
    return m / np.trace(m)


def stationary(state, grid, gen=None):
    return Trajectory(grid, np.broadcast_to(state, (len(grid), 2, 2)).copy(), gen)


@pytest.fixture(scope="module")
def bm_traj():
    grid = uniform_grid(10.0, 1e-3)
    return evolve(born_markov_qubit(1.0, 1.0, 1.0), EXCITED, grid)


@pytest.fixture(scope="module")
def depol_traj():
    grid = uniform_grid(3.0, 1e-3)
    return evolve(depolarizing(oscillating_rate), bloch_state([0.3, 0.4, 0.5]), grid)


# context


def test_context_gibbs_matches_expm():
    h = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, -0.7]])
    ctx = ThermalContext(h, 1.7)
    np.testing.assert_allclose(ctx.gibbs(), gibbs_oracle(h, 1.7), atol=1e-13)
    assert ctx.partition() == pytest.approx(np.trace(sla.expm(-1.7 * h)).real, rel=1e-12)


def test_context_time_dependent_derivative():
    ctx = ThermalContext(lambda t: math.sin(t) * PAULIS[2], 1.0)
    assert not ctx.static
    np.testing.assert_allclose(ctx.hamiltonian_derivative(0.4), math.cos(0.4) * PAULIS[2], atol=1e-9)


@pytest.mark.parametrize(
    "args, error",
    [((np.eye(2), -1.0), ParameterError), ((np.ones(3), 1.0), DimensionError)],
)
def test_context_rejects_bad_input(args, error):
    with pytest.raises(error):
        ThermalContext(*args)


# derivative helper


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_derivative_exact_on_quadratics(a, b, c):
    t = np.sort(np.random.default_rng(0).uniform(0, 2, 40))
    np.testing.assert_allclose(thermo.derivative(a * t**2 + b * t + c, t), 2 * a * t + b, atol=1e-8)


# entropy production


@pytest.mark.parametrize("method", thermo.EPR_METHODS)
def test_epr_vanishes_at_gibbs_fixed_point(method):
    grid = uniform_grid(1.0, 0.01)
    gen = born_markov_qubit(1.0, 1.0, 1.0)
    traj = stationary(CTX.gibbs(), grid, gen)
    assert np.max(np.abs(thermo.epr(traj, CTX, method).values)) < 1e-12


def test_epr_nonnegative_born_markov(bm_traj):
    assert np.min(thermo.epr(bm_traj, CTX).values) >= -1e-6


def test_epr_matches_relative_entropy_oracle(bm_traj):
    tau = gibbs_oracle(H0, 1.0)
    sub = slice(2000, 2010)
    series = thermo.relative_entropy_series(bm_traj, CTX)[sub]
    oracle = [rel_entropy_oracle(r, tau) for r in bm_traj.states[sub]]
    np.testing.assert_allclose(series, oracle, atol=1e-10)


def test_epr_depolarizing_is_entropy_rate(depol_traj):
    # infinite temperature: sigma = dS/dt = 2 Gamma r ln((1+r)/(1-r)) from the Bloch solution
    grid = depol_traj.times
    r0 = math.sqrt(0.5)
    r = r0 * np.exp(-2 * (1 + np.exp(-grid) * (np.sin(grid) - np.cos(grid))))
    gamma = np.exp(-grid) * np.cos(grid)
    expected = 2 * gamma * r * np.log((1 + r) / (1 - r))
    pointwise = thermo.epr(depol_traj, FLAT, "entropy-minus-heat").values
    np.testing.assert_allclose(pointwise, expected, atol=1e-8)
    sigma = thermo.epr(depol_traj, FLAT).values
    # second-order stencil on a grid of 1e-3
    np.testing.assert_allclose(sigma, expected, atol=200 * 1e-3**2)
    strong = np.abs(expected) > 1e-4
    assert np.all(np.sign(sigma[strong]) == np.sign(gamma[strong]))


def test_epr_methods_agree_from_mixed_state():
    grid = uniform_grid(5.0, 1e-3)
    traj = evolve(born_markov_qubit(1.0, 1.0, 1.0), bloch_state([0.2, 0.0, 0.6]), grid)
    a = thermo.epr(traj, CTX).values
    b = thermo.epr(traj, CTX, "entropy-minus-heat").values
    # one-sided second-order stencil at t = 0 dominates
    assert np.max(np.abs(a - b)) < 100 * 1e-3**2


def test_epr_errors(bm_traj):
    with pytest.raises(ParameterError):
        thermo.epr(bm_traj, CTX, "bogus")
    moving = ThermalContext(lambda t: t * H0, 1.0)
    with pytest.raises(ParameterError):
        thermo.epr(bm_traj, moving, "entropy-minus-heat")
    with pytest.raises(ValueError):
        thermo.epr(Trajectory([0.0, 1.0], np.stack([EXCITED, EXCITED])), CTX)


# Renyi


def test_renyi_epr_zero_at_fixed_point():
    grid = uniform_grid(1.0, 0.01)
    traj = stationary(CTX.gibbs(), grid)
    assert np.max(np.abs(thermo.renyi_epr(traj, CTX, 0.5).values)) < 1e-12


def test_renyi_epr_tends_to_epr():
    grid = uniform_grid(5.0, 1e-3)
    traj = evolve(born_markov_qubit(1.0, 1.0, 1.0), bloch_state([0.2, 0.1, 0.6]), grid)
    a = thermo.renyi_epr(traj, CTX, 1 - 1e-5).values
    b = thermo.epr(traj, CTX).values
    assert np.max(np.abs(a - b)) < 1e-4


@pytest.mark.parametrize("gamma", [0.3, 0.5, 2.0])
def test_renyi_epr_nonnegative_divisible_unital(gamma):
    grid = uniform_grid(3.0, 1e-3)
    traj = evolve(depolarizing(0.7), bloch_state([0.3, 0.4, 0.5]), grid)
    assert np.min(thermo.renyi_epr(traj, FLAT, gamma).values) >= -1e-8


@pytest.mark.parametrize("gamma", [0.0, 1.0, -2.0])
def test_renyi_epr_rejects_order(bm_traj, gamma):
    with pytest.raises(ParameterError):
        thermo.renyi_epr(bm_traj, CTX, gamma)


@pytest.mark.parametrize("gamma", [0.5, 2.0])
def test_renyi_rate_zero_at_maximally_mixed(gamma):
    assert thermo.renyi_entropy_rate_unital(np.eye(2) / 2, depolarizing(1.0), 0.0, gamma) == pytest.approx(0, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from([0.3, 0.5, 2.0, 3.0]))
def test_renyi_chi_positive_full_rank(seed, gamma):
    rho = random_density_matrix(2, np.random.default_rng(seed))
    if np.linalg.eigvalsh(rho)[0] < 1e-6 or np.linalg.norm(rho - np.eye(2) / 2) < 1e-6:
        return
    for op in PAULIS:
        assert thermo.renyi_chi(rho, op, gamma) > 0


@pytest.mark.parametrize("gamma", [0.5, 2.0])
def test_renyi_rate_matches_finite_difference(gamma):
    gen = depolarizing(oscillating_rate)
    step = 2e-4
    grid = uniform_grid(1.5, step)
    traj = evolve(gen, bloch_state([0.3, 0.4, 0.5]), grid, step)
    entropy = np.array([thermo.renyi_entropy(r, gamma) for r in traj.states])
    fd = thermo.derivative(entropy, grid)
    analytic = np.array([thermo.renyi_entropy_rate_unital(r, gen, t, gamma) for t, r in zip(grid, traj.states)])
    assert np.max(np.abs(fd - analytic)) < 1e-5


def test_renyi_entropy_oracle():
    rho = bloch_state([0.1, 0.5, -0.3])
    p = np.linalg.eigvalsh(rho)
    assert thermo.renyi_entropy(rho, 2.0) == pytest.approx(-np.log(np.sum(p**2)), abs=1e-13)


def test_renyi_rate_needs_unital():
    with pytest.raises(ClassificationError):
        thermo.renyi_entropy_rate_unital(np.eye(2) / 2, born_markov_qubit(1, 1, 1), 0.0, 0.5)


# work, heat, free energy


def test_work_zero_at_gibbs():
    assert thermo.extractable_work(CTX.gibbs(), CTX) == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("omega0, beta", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.3)])
def test_work_of_excited_state(omega0, beta):
    ctx = ThermalContext(thermal_qubit_hamiltonian(omega0), beta)
    boltz = math.exp(-beta * omega0)
    assert thermo.extractable_work(EXCITED, ctx) == pytest.approx(omega0 * (1 - boltz / (1 + boltz)), abs=1e-13)


def test_heat_current_zero_generator():
    assert thermo.heat_current(LindbladGenerator(2), bloch_state([0.1, 0.2, 0.3]), CTX, 0.0) == 0.0


def test_heat_current_oracle():
    gen = born_markov_qubit(1.0, 1.0, 1.0)
    rho = bloch_state([0.1, 0.2, 0.3])
    # d rho_ee/dt = -G_dis rho_ee + G_abs rho_gg; J = omega0 * that
    n = 1 / (math.e - 1)
    expected = -(n + 1) * rho[0, 0].real + n * rho[1, 1].real
    assert thermo.heat_current(gen, rho, CTX, 0.0) == pytest.approx(expected, abs=1e-13)


def test_free_energy_at_gibbs():
    assert thermo.free_energy(CTX.gibbs(), CTX) == pytest.approx(-CTX.log_partition() / CTX.beta, abs=1e-13)


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from([0.4, 1.0, 2.5]))
def test_free_energy_relative_entropy_form(seed, beta):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(2, rng)
    ctx = ThermalContext(H0, beta)
    expected = (rel_entropy_oracle(rho, gibbs_oracle(H0, beta)) - math.log(1 + math.exp(-beta))) / beta
    assert thermo.free_energy(rho, ctx) == pytest.approx(expected, abs=1e-10)
    assert thermo.free_energy(rho, ctx, gamma=1) == pytest.approx(expected, abs=1e-10)


def test_free_energy_needs_positive_beta():
    with pytest.raises(ParameterError):
        thermo.free_energy(EXCITED, FLAT)


def test_free_energy_rate_is_minus_epr(bm_traj):
    beta_dfdt = CTX.beta * thermo.derivative(thermo.free_energy_series(bm_traj, CTX).values, bm_traj.times)
    assert np.max(np.abs(beta_dfdt + thermo.epr(bm_traj, CTX).values)) < 1e-4


# athermality and complementarity


def test_athermality_values():
    assert thermo.athermality(CTX.gibbs(), CTX) == pytest.approx(0, abs=1e-14)
    assert thermo.athermality(EXCITED, FLAT) == pytest.approx(0.5, abs=1e-14)


def test_athermality_monotone_under_thermal_evolution():
    grid = uniform_grid(10.0, 1e-2)
    for r in ([0, 0, 1], [0.5, 0.5, 0.1], [0, 0, -1]):
        traj = evolve(born_markov_qubit(1.0, 1.0, 1.0), bloch_state(r), grid)
        assert np.all(np.diff(thermo.athermality_series(traj, CTX).values) <= 1e-10)


@pytest.mark.parametrize("gamma", [0.3, 0.5, 1.0])
def test_complementarity_initial_value(bm_traj, gamma):
    # pure excited start commuting with tau: every order gives -ln p_e, and A = 1 - p_e
    p_e = 1 / (1 + math.e)
    res = thermo.complementarity_residual(bm_traj, CTX, gamma).values
    assert res[0] == pytest.approx(-math.log(p_e) - 2 * gamma * (1 - p_e) ** 2, abs=1e-9)
    assert np.min(res) >= -1e-6


def test_complementarity_vanishes_at_fixed_point():
    grid = uniform_grid(1.0, 0.01)
    res = thermo.complementarity_residual(stationary(CTX.gibbs(), grid), CTX, 0.5).values
    assert np.max(np.abs(res)) < 1e-12


@pytest.mark.parametrize("gamma", [0.0, 1.5])
def test_complementarity_rejects_order(bm_traj, gamma):
    with pytest.raises(ParameterError):
        thermo.complementarity_residual(bm_traj, CTX, gamma)


# generalised EPR


def test_gepr_equals_epr_for_static_context(bm_traj):
    assert np.max(np.abs(thermo.gepr(bm_traj, CTX).values - thermo.epr(bm_traj, CTX).values)) <= 1e-10


def test_gepr_work_terms_vanish_for_static_context(bm_traj):
    work, work_th = thermo.work_rates(bm_traj, CTX)
    assert np.max(np.abs(work)) == 0 and np.max(np.abs(work_th)) == 0
    _, second, _ = thermo.gepr_decompositions(bm_traj, CTX)
    heat_form = thermo.epr(bm_traj, CTX, "entropy-minus-heat").values
    np.testing.assert_allclose(second.values, heat_form, atol=1e-14)


def test_gepr_decompositions_agree_for_driven_context():
    # rotating Hamiltonian with analytic derivative; smooth full-rank trajectory
    omega = 0.7

    def ham(t):
        return 0.5 * (math.cos(omega * t) * PAULIS[2] + math.sin(omega * t) * PAULIS[0])

    def ham_rate(t):
        return 0.5 * omega * (-math.sin(omega * t) * PAULIS[2] + math.cos(omega * t) * PAULIS[0])

    ctx = ThermalContext(ham, 1.3, ham_rate)
    gen = LindbladGenerator(2, (LindbladTerm(SIGMA_MINUS, 0.4), LindbladTerm(PAULIS[2], 0.2)), PAULIS[0])
    grid = uniform_grid(4.0, 1e-3)
    traj = evolve(gen, bloch_state([0.2, -0.3, 0.4]), grid)
    first, second, third = thermo.gepr_decompositions(traj, ctx)
    assert np.max(np.abs(first.values - second.values)) < 1e-4
    assert np.max(np.abs(first.values - third.values)) < 1e-4
    gap = thermo.free_energy_gap_rate(traj, ctx).values
    assert np.max(np.abs(gap + first.values)) < 1e-4


def test_free_energy_gap_rate_zero_at_equilibrium():
    grid = uniform_grid(1.0, 0.01)
    assert np.max(np.abs(thermo.free_energy_gap_rate(stationary(CTX.gibbs(), grid), CTX).values)) < 1e-12


def test_gibbs_series_matches_scalar():
    ctx = ThermalContext(lambda t: t * H0, 0.8)
    taus, log_z = ctx.gibbs_series([0.0, 0.5, 2.0])
    for k, t in enumerate([0.0, 0.5, 2.0]):
        np.testing.assert_allclose(taus[k], gibbs_state(t * H0, 0.8)[0], atol=1e-14)
        assert log_z[k] == pytest.approx(math.log(1 + math.exp(-0.8 * t)), abs=1e-13)
