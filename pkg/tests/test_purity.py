import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmthermo import purity as pur
from nmthermo.errors import ClassificationError
from nmthermo.generator import LindbladGenerator, LindbladTerm, evolve
from nmthermo.models import depolarizing, oscillating_rate
from nmthermo.qstate import GROUND, PAULIS, SIGMA_MINUS, bloch_state, random_density_matrix
from nmthermo.checks import random_hermitian, random_normal_generator
from nmthermo.scenarios import uniform_grid
from nmthermo.thermo import derivative

seeds = st.integers(0, 2**32 - 1)


def gksl_oracle(gen, rho, t):
    out = np.zeros_like(rho)
    if gen.hamiltonian is not None:
        h = gen.hamiltonian_at(t)
        out += -1j * (h @ rho - rho @ h)
    for term in gen.terms:
        a = term.operator
        ad = a.conj().T
        out += term.rate(t) * (a @ rho @ ad - 0.5 * (ad @ a @ rho + rho @ ad @ a))
    return out


@pytest.fixture(scope="module")
def scenario():
    return pur.depolarizing_scenario()


@pytest.mark.parametrize("d", [2, 3, 4])
def test_maximally_mixed_has_zero_rate(d):
    rng = np.random.default_rng(d)
    gen = random_normal_generator(rng, dim=d)
    total, per_term = pur.purity_rate(np.eye(d) / d, gen, 0.0)
    assert total == pytest.approx(0, abs=1e-14)
    assert np.allclose(per_term, 0, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_proof_identity(seed):
    rng = np.random.default_rng(seed)
    gen = random_normal_generator(rng)
    rho = random_density_matrix(gen.dim, rng)
    total, per_term = pur.purity_rate(rho, gen, 0.3)
    expected = 2 * np.trace(rho @ gksl_oracle(gen, rho, 0.3)).real
    assert total == pytest.approx(expected, abs=1e-10)
    assert total == pytest.approx(sum(per_term), abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_positive_rates_never_increase_purity(seed):
    rng = np.random.default_rng(seed)
    gen = random_normal_generator(rng)
    rho = random_density_matrix(gen.dim, rng)
    assert pur.purity_rate(rho, gen, 0.0)[0] <= 1e-12


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_sign_law_random_unital(seed):
    # positive purity rate requires a negative rate somewhere
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    terms = tuple(LindbladTerm(random_hermitian(d, rng), float(rng.uniform(-1, 1))) for _ in range(3))
    gen = LindbladGenerator(d, terms)
    rho = random_density_matrix(d, rng)
    if pur.purity_rate(rho, gen, 0.0)[0] > 1e-12:
        assert any(term.rate(0.0) < 0 for term in terms)


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(0, 3))
def test_depolarizing_closed_form(seed, t):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(2, rng)
    r = np.array([np.trace(rho @ p).real for p in PAULIS])
    total, _ = pur.purity_rate(rho, depolarizing(oscillating_rate), t)
    assert total == pytest.approx(-4 * oscillating_rate(t) * r @ r, abs=1e-12)


def test_non_normal_rejected():
    gen = LindbladGenerator(2, (LindbladTerm(SIGMA_MINUS, 1.0),))
    with pytest.raises(ClassificationError):
        pur.purity_rate(GROUND, gen, 0.0)
    traj = evolve(gen, GROUND, uniform_grid(0.1, 0.01))
    with pytest.raises(ClassificationError):
        pur.purity_report(traj)


# depolarizing scenario


def test_scenario_sign_law(scenario):
    active = scenario.sign_law_active & (np.abs(scenario.gamma) > 1e-9)
    assert active.sum() > 2900
    assert np.all(np.sign(scenario.purity_rate[active]) == -np.sign(scenario.gamma[active]))


def test_scenario_windows(scenario):
    t = scenario.times
    early = (t > 0.01) & (t < math.pi / 2 - 0.01)
    late = (t > math.pi / 2 + 0.01) & (t <= 3.0)
    assert np.all(scenario.gamma[early] > 0) and np.all(scenario.purity_rate[early] < 0)
    assert np.all(scenario.gamma[late] < 0) and np.all(scenario.purity_rate[late] > 0)


def test_scenario_zero_crossing():
    gen = depolarizing(oscillating_rate)
    assert pur.purity_rate(bloch_state([0, 0, -0.3]), gen, math.pi / 2)[0] == pytest.approx(0, abs=1e-16)


def test_scenario_matches_closed_form(scenario):
    exact_r = np.array([pur.depolarizing_bloch_length(t) for t in scenario.times])
    np.testing.assert_allclose(scenario.bloch_length, exact_r, atol=1e-9)
    assert np.max(np.abs(scenario.purity_rate + 4 * scenario.gamma * exact_r**2)) <= 1e-6


def test_report_invariants(scenario):
    assert np.all(scenario.purity <= 1 + 1e-12) and np.all(scenario.purity >= 0.5 - 1e-12)
    np.testing.assert_allclose(scenario.purity_rate, scenario.contributions.sum(axis=1), atol=1e-15)
    np.testing.assert_array_equal(scenario.witness_flags, scenario.gamma < -1e-9)


def test_rate_matches_finite_difference(scenario):
    fd = derivative(scenario.purity, scenario.times)
    assert np.max(np.abs(scenario.purity_rate - fd)) <= 150 * 1e-3**2


def test_rate_finite_difference_converges_second_order(rng):
    gen = random_normal_generator(rng, dim=3)
    rho0 = random_density_matrix(3, rng)
    errors = []
    for h in (1e-3, 5e-4):
        grid = uniform_grid(1.0, h)
        rep = pur.purity_report(evolve(gen, rho0, grid, h))
        errors.append(np.max(np.abs(rep.purity_rate - derivative(rep.purity, grid))))
    assert 3.5 < errors[0] / errors[1] < 4.5


def test_distance_from_mixed_is_bloch_length():
    assert pur.distance_from_mixed(bloch_state([0.3, -0.4, 0.5])) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert pur.distance_from_mixed(np.eye(3) / 3) == 0
