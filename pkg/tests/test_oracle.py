import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from nmthermo.errors import DimensionError
from nmthermo.oracle import (
    build_composite,
    exact_reduced_trajectory,
    finite_difference_check,
    partial_trace_bath,
)
from nmthermo.qstate import random_density_matrix
from nmthermo.scenarios import uniform_grid
from nmthermo.spinbath import DEFAULT_INITIAL_STATE, SpinBathParams, closed_form, closed_form_derivatives, reduced_state
from nmthermo.thermo import ThermoSeries

seeds = st.integers(0, 2**32 - 1)


def partial_trace_loop(state, bath_dim):
    sys_dim = state.shape[0] // bath_dim
    out = np.zeros((sys_dim, sys_dim), dtype=complex)
    for a in range(sys_dim):
        for b in range(sys_dim):
            out[a, b] = sum(state[a * bath_dim + j, b * bath_dim + j] for j in range(bath_dim))
    return out


def test_single_spin_bath_layout():
    cs = build_composite(SpinBathParams(N=1, omega=1.3), guard_level=False)
    assert cs.dim == 4
    np.testing.assert_allclose(np.diag(cs.bath_hamiltonian).real, [-1.3, 0.0], atol=1e-15)


def test_guard_level_adds_unpopulated_level():
    cs = build_composite(SpinBathParams(N=3))
    assert cs.bath_dim == 5
    assert cs.bath_state[-1, -1] == 0
    assert np.trace(cs.bath_state).real == pytest.approx(1, abs=1e-15)


@pytest.mark.parametrize("N", [1, 4, 9])
def test_hamiltonian_hermitian(N):
    h = build_composite(SpinBathParams(N=N)).hamiltonian
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12


def test_bath_state_thermal():
    params = SpinBathParams(N=5, omega=0.8, T=0.6)
    cs = build_composite(params, guard_level=False)
    expected = sla.expm(-cs.bath_hamiltonian / params.T)
    np.testing.assert_allclose(cs.bath_state, expected / np.trace(expected), atol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.7, 3.1, 9.9])
def test_propagator_unitary_and_exact(t):
    cs = build_composite(SpinBathParams(N=6))
    u = cs.propagator(t)
    assert np.max(np.abs(u @ u.conj().T - np.eye(cs.dim))) <= 1e-10
    np.testing.assert_allclose(u, sla.expm(-1j * cs.hamiltonian * t), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 5))
def test_partial_trace_matches_loop(seed, bath_dim):
    rng = np.random.default_rng(seed)
    state = random_density_matrix(2 * bath_dim, rng)
    np.testing.assert_allclose(partial_trace_bath(state, bath_dim), partial_trace_loop(state, bath_dim), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(-2, 2))
def test_partial_trace_linear_and_trace_preserving(seed, c):
    rng = np.random.default_rng(seed)
    x, y = random_density_matrix(6, rng), random_density_matrix(6, rng)
    lhs = partial_trace_bath(x + c * y, 3)
    np.testing.assert_allclose(lhs, partial_trace_bath(x, 3) + c * partial_trace_bath(y, 3), atol=1e-13)
    assert np.trace(partial_trace_bath(x, 3)) == pytest.approx(1, abs=1e-14)


def test_partial_trace_bad_dimension():
    with pytest.raises(DimensionError):
        partial_trace_bath(np.eye(5), 2)


def test_trajectory_starts_at_initial_state(rng):
    rho0 = random_density_matrix(2, rng)
    traj = exact_reduced_trajectory(build_composite(SpinBathParams(N=4)), rho0, [0.0, 1.0])
    np.testing.assert_allclose(traj.states[0], rho0, atol=1e-13)
    np.testing.assert_allclose(np.trace(traj.states, axis1=1, axis2=2), 1, atol=1e-12)


def test_uncoupled_evolution_factorises():
    params = SpinBathParams(N=4, alpha=0.0, omega0=0.9)
    grid = np.linspace(0, 5, 11)
    states = exact_reduced_trajectory(build_composite(params), DEFAULT_INITIAL_STATE, grid).states
    np.testing.assert_allclose(states[:, 0, 0], DEFAULT_INITIAL_STATE[0, 0], atol=1e-13)
    np.testing.assert_allclose(states[:, 0, 1], DEFAULT_INITIAL_STATE[0, 1] * np.exp(-2j * 0.9 * grid), atol=1e-13)


def test_global_purity_preserved_for_pure_inputs():
    params = SpinBathParams(N=4, T=1e-3)
    cs = build_composite(params)
    psi = np.array([0.6, 0.8j])
    glob0 = np.kron(np.outer(psi, psi.conj()), cs.bath_state)
    assert np.trace(glob0 @ glob0).real == pytest.approx(1, abs=1e-12)
    for t in (0.5, 4.0):
        u = cs.propagator(t)
        g = u @ glob0 @ u.conj().T
        assert np.trace(g @ g).real == pytest.approx(1, abs=1e-10)


@pytest.mark.parametrize("N", [4, 8])
def test_closed_form_equivalence(N):
    params = SpinBathParams(N=N)
    grid = uniform_grid(10.0, 0.05)
    exact = exact_reduced_trajectory(build_composite(params), DEFAULT_INITIAL_STATE, grid).states
    assert np.max(np.abs(exact - reduced_state(params, DEFAULT_INITIAL_STATE, grid))) <= 1e-6


def test_truncation_without_guard_level_is_visible():
    params = SpinBathParams(N=4)
    grid = uniform_grid(10.0, 0.05)
    exact = exact_reduced_trajectory(build_composite(params, guard_level=False), DEFAULT_INITIAL_STATE, grid).states
    assert np.max(np.abs(exact - reduced_state(params, DEFAULT_INITIAL_STATE, grid))) > 1e-6


# finite_difference_check


def test_identical_series_zero_deviation():
    t = np.linspace(0, 1, 11)
    rep = finite_difference_check(ThermoSeries(t, t**2, "a"), ThermoSeries(t, t**2, "b"), 1e-12)
    assert rep.max_error == 0 and rep.passed


def test_analytic_rate_against_central_difference():
    params = SpinBathParams()
    grid = uniform_grid(10.0, 1e-3)
    A = closed_form(params, grid).A
    dA = closed_form_derivatives(params, grid)[0]
    central = (A[2:] - A[:-2]) / 2e-3
    rep = finite_difference_check((grid[1:-1], central), (grid[1:-1], dA[1:-1]), 1e-5)
    assert rep.passed, rep.as_dict()


def test_offset_series_fails_with_location():
    t = np.linspace(0, 1, 11)
    shifted = np.where(np.isclose(t, 0.3), 1.0, 0.0)
    rep = finite_difference_check((t, shifted), (t, np.zeros_like(t)), 0.5)
    assert not rep.passed
    assert rep.t_at_max == pytest.approx(0.3)
    assert set(rep.as_dict()) == {"max_error", "rms_error", "t_at_max", "tol", "pass"}


def test_grid_mismatch():
    with pytest.raises(DimensionError):
        finite_difference_check((np.arange(3.0), np.zeros(3)), (np.arange(4.0), np.zeros(4)), 1.0)
