"""Dense density-matrix primitives.

Every function accepts a single ``(d, d)`` matrix or a stack ``(..., d, d)``
and broadcasts over the leading axes; scalar results come back as Python
floats for single matrices and as arrays for stacks. Entropies are in nats.

Qubit convention: the excited level (written ``|1>`` in the physics
notation used throughout the package) is basis index 0, so that
``sigma_+ = (sigma_x + i sigma_y)/2`` raises into it and ``sigma_z`` has
eigenvalue +1 there.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DimensionError, ParameterError, StateValidityError

EIG_FLOOR = 1e-12
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = (SIGMA_X + 1j * SIGMA_Y) / 2
SIGMA_MINUS = (SIGMA_X - 1j * SIGMA_Y) / 2
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)
EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)
GROUND = np.array([[0, 0], [0, 1]], dtype=complex)


class Spectrum(NamedTuple):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _square(m, name="matrix"):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def _same_dims(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def hs_norm(m):
    """Hilbert-Schmidt (Frobenius) norm over the last two axes."""
    return _scalar(np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1))))


def commutator(a, b):
    return a @ b - b @ a


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = _square(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_normal(m, tol=1e-9):
    """True iff ``||M M^dag - M^dag M||_HS <= tol``."""
    m = _square(m)
    if m.ndim != 2:
        raise DimensionError("is_normal takes a single matrix")
    return hs_norm(m @ dagger(m) - dagger(m) @ m) <= tol


def spectrum(m):
    """Eigenvalues (descending) and unitary eigenvector columns of a Hermitian matrix."""
    m = _square(m)
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    return Spectrum(w[..., ::-1], v[..., ::-1])


def check_density_matrix(rho, tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, eig_floor=EIG_FLOOR):
    """Validate a (stack of) density matrices and return it as a complex array.

    Raises :class:`StateValidityError` on non-Hermiticity, wrong trace or an
    eigenvalue below ``-eig_floor``.
    """
    rho = np.asarray(_square(rho, "density matrix"), dtype=complex)
    if not np.all(np.isfinite(rho)):
        raise StateValidityError("density matrix has non-finite entries")
    herm_dev = np.max(np.abs(rho - dagger(rho)))
    if herm_dev > tol:
        raise StateValidityError(f"not Hermitian: max deviation {herm_dev:.3e}")
    tr = np.real(np.trace(rho, axis1=-2, axis2=-1))
    tr_dev = np.max(np.abs(tr - 1.0))
    if tr_dev > trace_tol:
        raise StateValidityError(f"trace deviates from 1 by {tr_dev:.3e}")
    lowest = np.min(np.linalg.eigvalsh((rho + dagger(rho)) / 2))
    if lowest < -eig_floor:
        raise StateValidityError(f"negative eigenvalue {lowest:.3e}")
    return rho


def _eig(rho):
    w, v = np.linalg.eigh((rho + dagger(rho)) / 2)
    return w, v


def _from_eig(fw, v):
    return (v * fw[..., None, :]) @ dagger(v)


def matrix_function(m, func):
    """Apply ``func`` to the eigenvalues of Hermitian ``m``."""
    w, v = _eig(_square(m))
    return _from_eig(func(w), v)


def matrix_log(rho, floor=EIG_FLOOR):
    """Natural log of a PSD matrix with eigenvalues clamped at ``floor``."""
    w, v = _eig(rho)
    if np.min(w) < -floor:
        raise StateValidityError(f"negative eigenvalue {np.min(w):.3e} in matrix log")
    return _from_eig(np.log(np.maximum(w, floor)), v)


def matrix_power(rho, p, floor=EIG_FLOOR):
    """``rho**p`` for PSD ``rho``; negative powers clamp small eigenvalues at ``floor``."""
    w, v = _eig(rho)
    if np.min(w) < -floor:
        raise StateValidityError(f"negative eigenvalue {np.min(w):.3e} in matrix power")
    w = np.maximum(w, floor) if p < 0 else np.maximum(w, 0.0)
    return _from_eig(w**p, v)


def _entropy_from_eigs(w):
    w = np.where(w > EIG_FLOOR, w, 0.0)
    safe = np.where(w > 0, w, 1.0)
    return -np.sum(w * np.log(safe), axis=-1)


def von_neumann_entropy(rho):
    rho = check_density_matrix(rho)
    return _scalar(_entropy_from_eigs(np.linalg.eigvalsh(rho)))


def _support_violated(rho, sigma_w, sigma_v):
    # weight of rho on eigen-directions of sigma that are numerically null
    weights = np.real(np.einsum("...ki,...kl,...li->...i", np.conj(sigma_v), rho, sigma_v))
    return np.any((sigma_w <= EIG_FLOOR) & (weights > EIG_FLOOR), axis=-1)


def relative_entropy(rho, sigma):
    """``S(rho||sigma) = Tr[rho (ln rho - ln sigma)]`` in nats.

    Returns ``inf`` where the support of ``rho`` is not contained in that of
    ``sigma`` (eigenvalues at or below the floor count as null).
    """
    rho = check_density_matrix(rho)
    sigma = check_density_matrix(sigma)
    _same_dims(rho, sigma)
    rho, sigma = np.broadcast_arrays(rho, sigma)
    sw, sv = _eig(sigma)
    log_sigma = _from_eig(np.log(np.maximum(sw, EIG_FLOOR)), sv)
    value = -_entropy_from_eigs(np.linalg.eigvalsh(rho)) - np.real(
        np.trace(rho @ log_sigma, axis1=-2, axis2=-1)
    )
    value = np.where(_support_violated(rho, sw, sv), np.inf, value)
    return _scalar(value)


def renyi_relative_entropy(rho, sigma, gamma):
    """Petz-Renyi divergence ``ln Tr[rho^g sigma^(1-g)] / (g-1)`` in nats."""
    if not gamma > 0:
        raise ParameterError(f"Renyi order must be positive, got {gamma}")
    if gamma == 1:
        raise ParameterError("Renyi order 1 is the relative entropy; use relative_entropy")
    rho = check_density_matrix(rho)
    sigma = check_density_matrix(sigma)
    _same_dims(rho, sigma)
    rho, sigma = np.broadcast_arrays(rho, sigma)
    sw, sv = _eig(sigma)
    overlap = np.real(
        np.trace(
            matrix_power(rho, gamma) @ _from_eig(
                np.maximum(sw, EIG_FLOOR if gamma > 1 else 0.0) ** (1 - gamma), sv
            ),
            axis1=-2,
            axis2=-1,
        )
    )
    with np.errstate(divide="ignore"):
        value = np.log(overlap) / (gamma - 1)
    if gamma > 1:
        value = np.where(_support_violated(rho, sw, sv), np.inf, value)
    return _scalar(value)


def trace_distance(rho, sigma):
    """Half the trace norm of ``rho - sigma``."""
    rho, sigma = _square(rho), _square(sigma)
    _same_dims(rho, sigma)
    mu = np.linalg.eigvalsh(((rho - sigma) + dagger(rho - sigma)) / 2)
    return _scalar(0.5 * np.sum(np.abs(mu), axis=-1))


def purity(rho):
    rho = check_density_matrix(rho)
    return _scalar(np.real(np.einsum("...ij,...ji->...", rho, rho)))


def asymmetry(rho, op):
    """Squared Hilbert-Schmidt norm of ``[rho, op]``."""
    rho, op = _square(rho), _square(op)
    _same_dims(rho, op)
    return _scalar(hs_norm(commutator(rho, op)) ** 2)


def gibbs_state(hamiltonian, beta):
    """Return ``(exp(-beta H)/Z, Z)`` for Hermitian ``H`` and ``beta >= 0``."""
    h = _square(hamiltonian, "Hamiltonian")
    if not is_hermitian(h):
        raise StateValidityError("Hamiltonian is not Hermitian")
    if beta < 0:
        raise ParameterError(f"inverse temperature must be >= 0, got {beta}")
    tau, log_z = _gibbs(h, beta)
    return tau, _scalar(np.exp(log_z))


def _gibbs(h, beta):
    """Gibbs state and ``ln Z`` for a (stack of) Hermitian matrices."""
    w, v = _eig(h)
    e0 = np.min(w, axis=-1, keepdims=True)
    weights = np.exp(-beta * (w - e0))
    total = np.sum(weights, axis=-1, keepdims=True)
    tau = _from_eig(weights / total, v)
    log_z = np.log(total[..., 0]) - beta * e0[..., 0]
    return tau, log_z


def random_density_matrix(dim, rng, rank=None):
    """Haar-induced random state of the given rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_unitary(dim, rng):
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def bloch_state(r):
    """Qubit density matrix ``(I + r.sigma)/2``."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (np.eye(2) + sum(ri * s for ri, s in zip(r, PAULIS)))


def bloch_vector(rho):
    rho = np.asarray(rho)
    return np.stack([np.real(np.trace(rho @ s, axis1=-2, axis2=-1)) for s in PAULIS], axis=-1)
