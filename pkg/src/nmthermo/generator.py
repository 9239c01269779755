"""Time-local GKSL generators: action, integration and classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    ClassificationError,
    DimensionError,
    IntegrationError,
    NotApplicableError,
    StateValidityError,
)
from .qstate import check_density_matrix, dagger, gibbs_state, hs_norm, is_normal

RateFunction = Callable[[float], float]
HamiltonianLike = Union[None, np.ndarray, Callable[[float], np.ndarray]]

TOL_RATE = 1e-9
DEFAULT_STEP = 1e-3
EVOLVE_TOL = 1e-8


def vectorized(func):
    """Mark a rate (or Hamiltonian) callable as accepting an array of times."""
    func.vectorized = True
    return func


def constant_rate(value):
    value = float(value)

    @vectorized
    def rate(t):
        return value if np.ndim(t) == 0 else np.full(np.shape(t), value)

    rate.constant = value
    return rate


def _evaluate(func, times):
    if getattr(func, "vectorized", False):
        return np.asarray(func(times))
    return np.array([func(t) for t in times])


@dataclass(frozen=True)
class LindbladTerm:
    """One jump operator ``A`` with its (possibly negative) rate ``Gamma(t)``."""

    operator: np.ndarray
    rate: RateFunction

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionError(f"jump operator must be square, got {op.shape}")
        object.__setattr__(self, "operator", op)
        if not callable(self.rate):
            object.__setattr__(self, "rate", constant_rate(self.rate))


@dataclass(frozen=True)
class LindbladGenerator:
    """``L_t(rho) = -i[H(t), rho] + sum_a G_a(t) (A rho A^+ - {A^+ A, rho}/2)``.

    ``hamiltonian`` may be ``None``, a constant matrix, or a callable of time.
    """

    dim: int
    terms: tuple = ()
    hamiltonian: HamiltonianLike = None

    def __post_init__(self):
        terms = tuple(t if isinstance(t, LindbladTerm) else LindbladTerm(*t) for t in self.terms)
        for term in terms:
            if term.operator.shape != (self.dim, self.dim):
                raise DimensionError(
                    f"jump operator shape {term.operator.shape} does not match dim {self.dim}"
                )
        object.__setattr__(self, "terms", terms)
        h = self.hamiltonian
        if h is not None and not callable(h):
            h = np.asarray(h, dtype=complex)
            if h.shape != (self.dim, self.dim):
                raise DimensionError(f"Hamiltonian shape {h.shape} does not match dim {self.dim}")
            object.__setattr__(self, "hamiltonian", h)

    @property
    def static_hamiltonian(self):
        return not callable(self.hamiltonian)

    def hamiltonian_at(self, t):
        if self.hamiltonian is None:
            return np.zeros((self.dim, self.dim), dtype=complex)
        if callable(self.hamiltonian):
            return np.asarray(self.hamiltonian(t), dtype=complex)
        return self.hamiltonian

    def rates_at(self, t):
        return np.array([term.rate(t) for term in self.terms], dtype=float)

    def rate_table(self, times):
        """Rates as an ``(n_terms, len(times))`` array."""
        times = np.asarray(times, dtype=float)
        if not self.terms:
            return np.zeros((0, len(times)))
        return np.stack([np.broadcast_to(_evaluate(t.rate, times), times.shape) for t in self.terms]).astype(float)

    def hamiltonian_stack(self, times):
        times = np.asarray(times, dtype=float)
        if not callable(self.hamiltonian):
            return np.broadcast_to(self.hamiltonian_at(0.0), (len(times), self.dim, self.dim))
        return np.asarray(_evaluate(self.hamiltonian, times), dtype=complex)


@dataclass
class Trajectory:
    """States ``rho(t_k)`` on an increasing time grid."""

    times: np.ndarray
    states: np.ndarray
    generator: Optional[LindbladGenerator] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.ndim != 3 or len(self.states) != len(self.times):
            raise DimensionError("states must be a (K, d, d) stack aligned with times")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def dim(self):
        return self.states.shape[-1]


def _check_dims(gen, rho):
    if rho.shape[-2:] != (gen.dim, gen.dim):
        raise DimensionError(f"state shape {rho.shape} does not match generator dim {gen.dim}")


def apply_generator(gen, rho, t):
    """Evaluate ``L_t(rho)`` as a matrix."""
    rho = np.asarray(rho, dtype=complex)
    _check_dims(gen, rho)
    h = gen.hamiltonian_at(t)
    out = -1j * (h @ rho - rho @ h)
    for term in gen.terms:
        a = term.operator
        ada = dagger(a) @ a
        out = out + term.rate(t) * (a @ rho @ dagger(a) - 0.5 * (ada @ rho + rho @ ada))
    return out


def hamiltonian_superoperator(h):
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def dissipator_superoperator(a):
    """Row-major vectorised ``A X A^+ - {A^+ A, X}/2``."""
    eye = np.eye(a.shape[0])
    ada = dagger(a) @ a
    return np.kron(a, a.conj()) - 0.5 * (np.kron(ada, eye) + np.kron(eye, ada.T))


def liouvillian(gen, t):
    """Superoperator matrix of ``L_t`` acting on row-major ``vec(rho)``."""
    out = hamiltonian_superoperator(gen.hamiltonian_at(t))
    for term in gen.terms:
        out = out + term.rate(t) * dissipator_superoperator(term.operator)
    return out


def apply_generator_series(gen, times, states):
    """``L_{t_k}(rho_k)`` for a whole trajectory at once."""
    states = np.asarray(states, dtype=complex)
    _check_dims(gen, states)
    hams = gen.hamiltonian_stack(times)
    out = -1j * (hams @ states - states @ hams)
    for term, rates in zip(gen.terms, gen.rate_table(times)):
        a = term.operator
        ada = dagger(a) @ a
        out = out + rates[:, None, None] * (a @ states @ dagger(a) - 0.5 * (ada @ states + states @ ada))
    return out


def _liouvillian_stack(gen, times, dissipators):
    if callable(gen.hamiltonian):
        hams = gen.hamiltonian_stack(times)
        eye = np.eye(gen.dim)
        stack = -1j * (
            np.einsum("kij,ab->kiajb", hams, eye) - np.einsum("ij,kab->kiajb", eye, np.swapaxes(hams, -1, -2))
        ).reshape(len(times), gen.dim**2, gen.dim**2)
    else:
        stack = np.broadcast_to(hamiltonian_superoperator(gen.hamiltonian_at(0.0)), (len(times), gen.dim**2, gen.dim**2))
    if dissipators:
        stack = stack + np.einsum("kt,kij->tij", gen.rate_table(times), np.stack(dissipators))
    return stack


def _substeps(span, step):
    n = span / step
    return max(1, int(round(n)) if abs(n - round(n)) < 1e-9 * max(1.0, n) else math.ceil(n))


_CHUNK = 256
_BLOCK = 4096


def _validate_chunk(states, times):
    try:
        check_density_matrix(states, tol=EVOLVE_TOL, trace_tol=EVOLVE_TOL, eig_floor=EVOLVE_TOL)
    except StateValidityError:
        for rho, t in zip(states, times):
            try:
                check_density_matrix(rho, tol=EVOLVE_TOL, trace_tol=EVOLVE_TOL, eig_floor=EVOLVE_TOL)
            except StateValidityError as exc:
                raise IntegrationError(f"integration left the state space: {exc}", t) from exc


def _step_schedule(grid, step):
    counts = np.array([_substeps(b - a, step) for a, b in zip(grid[:-1], grid[1:])], dtype=int)
    h = np.repeat(np.diff(grid) / counts, counts)
    offsets = np.concatenate([np.arange(n) for n in counts]) if len(counts) else np.zeros(0, dtype=int)
    starts = np.repeat(grid[:-1], counts) + offsets * h
    ends = np.cumsum(counts) - 1
    return starts, h, ends


def _rk4_matrices(gen, starts, h, dissipators):
    """One-step RK4 update matrices; ``v -> M v`` is exactly a classical RK4 step."""
    l1 = _liouvillian_stack(gen, starts, dissipators)
    l2 = _liouvillian_stack(gen, starts + h / 2, dissipators)
    l3 = _liouvillian_stack(gen, starts + h, dissipators)
    hh = h[:, None, None]
    eye = np.eye(l1.shape[-1])
    k1 = l1
    k2 = l2 @ (eye + hh / 2 * k1)
    k3 = l2 @ (eye + hh / 2 * k2)
    k4 = l3 @ (eye + hh * k3)
    return eye + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(gen, rho0s, grid, step):
    m, d = len(rho0s), gen.dim
    for rho in rho0s:
        try:
            check_density_matrix(rho, tol=EVOLVE_TOL, trace_tol=EVOLVE_TOL, eig_floor=EVOLVE_TOL)
        except StateValidityError as exc:
            raise IntegrationError(f"invalid initial state: {exc}", grid[0]) from exc
    dissipators = [dissipator_superoperator(term.operator) for term in gen.terms]
    diag = np.arange(d) * (d + 1)
    starts, h, ends = _step_schedule(grid, step)
    v = rho0s.reshape(m, d * d).T.copy()
    states = np.empty((len(grid), d * d, m), dtype=complex)
    states[0] = v
    k, checked = 1, 1
    for b in range(0, len(starts), _BLOCK):
        mats = _rk4_matrices(gen, starts[b:b + _BLOCK], h[b:b + _BLOCK], dissipators)
        for i, mat in enumerate(mats, start=b):
            v = mat @ v
            tr = v[diag].sum(axis=0)
            if np.any(np.abs(tr - 1) > 1e-12):
                v = v / tr
            if i == ends[k - 1]:
                states[k] = v
                if k - checked + 1 >= _CHUNK or k == len(grid) - 1:
                    chunk = states[checked:k + 1].transpose(2, 0, 1).reshape(-1, d, d)
                    _validate_chunk(chunk, np.tile(grid[checked:k + 1], m))
                    checked = k + 1
                k += 1
    return states.transpose(2, 0, 1).reshape(m, len(grid), d, d)


def _prepare(gen, grid, step):
    if not step > 0:
        raise ValueError("step must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty increasing sequence")
    return grid


def evolve(gen, rho0, grid, step=DEFAULT_STEP):
    """Integrate ``drho/dt = L_t(rho)`` with fixed-step classical RK4.

    ``grid`` lists the output times (``grid[0]`` is the initial time); each
    interval is split into equal sub-steps no longer than ``step``. Rates of
    any sign are accepted. The trace is renormalised whenever it drifts by
    more than 1e-12. Raises :class:`IntegrationError` carrying the first
    output time whose state fails validation at 1e-8.
    """
    grid = _prepare(gen, grid, step)
    rho0 = np.asarray(rho0, dtype=complex)
    _check_dims(gen, rho0)
    if rho0.ndim != 2:
        raise DimensionError("evolve takes a single state; use evolve_many for stacks")
    return Trajectory(grid.copy(), _integrate(gen, rho0[None], grid, step)[0], gen)


def evolve_many(gen, rho0s, grid, step=DEFAULT_STEP):
    """:func:`evolve` for a stack of initial states sharing one step schedule."""
    grid = _prepare(gen, grid, step)
    rho0s = np.asarray(rho0s, dtype=complex)
    _check_dims(gen, rho0s)
    if rho0s.ndim != 3:
        raise DimensionError("evolve_many takes a (m, d, d) stack")
    return [Trajectory(grid.copy(), states, gen) for states in _integrate(gen, rho0s, grid, step)]


def check_unital(gen, t=0.0, tol=1e-9):
    """True iff ``d * ||L_t(I/d)||_HS <= tol``."""
    d = gen.dim
    return hs_norm(apply_generator(gen, np.eye(d) / d, t)) * d <= tol


def check_all_normal(gen, tol=1e-9):
    return all(is_normal(term.operator, tol) for term in gen.terms)


def hermitian_basis(dim):
    """Orthonormal traceless Hermitian basis (normalised generalised Gell-Mann)."""
    basis = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
            anti = np.zeros((dim, dim), dtype=complex)
            anti[j, k], anti[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis += [sym, anti]
    for l in range(1, dim):
        diag = np.zeros(dim)
        diag[:l] = 1
        diag[l] = -l
        basis.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return basis


def _commutator_fit(anti, basis):
    """Real ``h`` minimising ``||anti - sum_k h_k S(F_k)||`` with ``S(F) = -i[F, .]``."""
    cols = np.stack([hamiltonian_superoperator(f).reshape(-1) for f in basis], axis=1)
    target = anti.reshape(-1)
    system = np.concatenate([cols.real, cols.imag])
    rhs = np.concatenate([target.real, target.imag])
    h, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return h, float(np.linalg.norm(system @ h - rhs))


def hermitian_unital_form(gen, t=0.0, tol=1e-9):
    """Rewrite a unital generator, frozen at time ``t``, with Hermitian jump operators.

    The traceless part of every jump operator is expanded in a Hermitian
    operator basis; the real part of the resulting coefficient matrix is
    diagonalised into Hermitian jumps with constant rates. Whatever remains
    of the generator is anti-self-adjoint and must be a commutator
    ``-i[H', .]``, which becomes the new Hamiltonian.

    Raises :class:`ClassificationError` if ``gen`` is not unital at ``t`` or
    if the anti-self-adjoint remainder is not a commutator (possible for
    ``dim >= 3``): then no Hermitian-jump representation exists.
    """
    if not check_unital(gen, t, tol):
        raise ClassificationError("generator is not unital; no Hermitian-jump form")
    d = gen.dim
    basis = hermitian_basis(d)
    if not basis:
        return LindbladGenerator(d)
    kmat = np.zeros((len(basis), len(basis)), dtype=complex)
    for term, rate in zip(gen.terms, gen.rates_at(t)):
        a = term.operator
        traceless = a - np.trace(a) / d * np.eye(d)
        coeffs = np.array([np.trace(f @ traceless) for f in basis])
        kmat += rate * np.outer(coeffs, coeffs.conj())
    terms = []
    lam, vecs = np.linalg.eigh(kmat.real)
    scale = max(1.0, np.max(np.abs(lam)))
    for k in range(len(lam)):
        if abs(lam[k]) <= 1e-13 * scale:
            continue
        op = sum(c * f for c, f in zip(vecs[:, k], basis))
        terms.append(LindbladTerm(op, constant_rate(lam[k])))
    full = liouvillian(gen, t)
    anti = (full - dagger(full)) / 2
    h, residual = _commutator_fit(anti, basis)
    if residual > tol * max(1.0, np.linalg.norm(anti)):
        raise ClassificationError(
            f"anti-self-adjoint part is not a commutator (residual {residual:.2e}); "
            "the unital generator has no Hermitian-jump representation"
        )
    ham = sum(c * f for c, f in zip(h, basis))
    return LindbladGenerator(d, tuple(terms), ham if np.any(np.abs(ham) > 0) else None)


def generators_equal(gen_a, gen_b, t=0.0, tol=1e-9):
    """Compare two generators by their action on all matrix units at time ``t``."""
    if gen_a.dim != gen_b.dim:
        return False
    d = gen_a.dim
    for j in range(d):
        for k in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[j, k] = 1
            if hs_norm(apply_generator(gen_a, unit, t) - apply_generator(gen_b, unit, t)) > tol:
                return False
    return True


def check_gibbs_fixed_point(gen, hamiltonian, beta, t=0.0, tol=1e-9):
    tau, _ = gibbs_state(hamiltonian, beta)
    return hs_norm(apply_generator(gen, tau, t)) <= tol


def _energy_basis(h):
    h = np.asarray(h, dtype=complex)
    off = h - np.diag(np.diag(h))
    if np.max(np.abs(off), initial=0.0) <= 1e-12:
        return np.real(np.diag(h)), np.eye(h.shape[0], dtype=complex)
    w, v = np.linalg.eigh(h)
    return w, v


def _matrix_unit(op, vecs, tol):
    """Locate ``op`` as ``c |j><i|`` in the energy basis; return ``(i, j, |c|^2)``."""
    m = dagger(vecs) @ op @ vecs
    flat = np.abs(m).ravel()
    # first maximal entry wins, which is the index-order tie-break
    idx = int(np.argmax(flat))
    j, i = divmod(idx, m.shape[0])
    c = m[j, i]
    rest = m.copy()
    rest[j, i] = 0
    if abs(c) == 0 or np.max(np.abs(rest)) > tol * max(1.0, abs(c)):
        raise NotApplicableError("jump operator is not a rank-1 matrix unit in the energy basis")
    return i, j, abs(c) ** 2


def check_detailed_balance(gen, hamiltonian, beta, tol=1e-9, times=(0.0,)):
    """Detailed balance ``G(j->i) = G(i->j) exp(-beta (E_i - E_j))`` for matrix-unit generators.

    ``G(i->j)`` is the total rate carried by operators proportional to
    ``|j><i|`` in the eigenbasis of ``hamiltonian``; missing partners count
    as rate zero. Checked with relative tolerance ``tol`` at every sampled
    time. Raises :class:`NotApplicableError` for other operator forms.
    """
    energies, vecs = _energy_basis(hamiltonian)
    units = [_matrix_unit(term.operator, vecs, tol) for term in gen.terms]
    for t in times:
        rates = {}
        for (i, j, weight), term in zip(units, gen.terms):
            rates[(i, j)] = rates.get((i, j), 0.0) + weight * term.rate(t)
        for (i, j), forward in rates.items():
            if i == j:
                continue
            backward = rates.get((j, i), 0.0)
            expected = forward * math.exp(-beta * (energies[i] - energies[j]))
            scale = max(abs(backward), abs(expected), 1e-300)
            if abs(backward - expected) > tol * scale:
                return False
    return True


@dataclass(frozen=True)
class WitnessPoint:
    t: float
    rates: tuple
    signs: tuple
    all_nonnegative: bool

    @property
    def flagged(self):
        return not self.all_nonnegative


def divisibility_witness(gen, grid, tol_rate=TOL_RATE):
    """Per-time rate signs; a time is flagged when any rate is below ``-tol_rate``."""
    grid = np.asarray(grid, dtype=float)
    table = gen.rate_table(grid).T
    signs = np.where(np.abs(table) <= tol_rate, 0, np.sign(table)).astype(int)
    ok = np.all(table >= -tol_rate, axis=1)
    return [
        WitnessPoint(float(t), tuple(float(r) for r in rates), tuple(int(s) for s in sg), bool(flag))
        for t, rates, sg, flag in zip(grid, table, signs, ok)
    ]


def witness_mask(points):
    return np.array([p.flagged for p in points], dtype=bool)
