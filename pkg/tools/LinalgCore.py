"""
🧮 Linalg Core
==============
Small-matrix complex linear algebra for two-qubit states! ⚛️

Everything here works on plain numpy arrays of shape (2, 2) or (4, 4):
Kronecker products, partial traces, Hermitian spectra and von Neumann
entropy (base 2, so a Bell pair carries exactly one bit of discord).

A cyclic Jacobi eigensolver is kept alongside numpy's LAPACK path as an
independent cross-check for the 4×4 case.

Part of: Discord Certifier tools
"""

import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION
# ============================================================================

HERMITIAN_TOL = 1e-10      # max|M - M†| allowed for Hermitian inputs
EIGEN_CLIP_TOL = 1e-9      # eigenvalues in [-tol, 0) are round-off, clipped to 0
TRACE_TOL = 1e-9           # |tr(rho) - 1| allowed for density matrices
JACOBI_OFFDIAG_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class LinalgError(Exception):
    """Rejected matrix input (wrong shape, not Hermitian)."""
    pass


class InvalidStateError(LinalgError):
    """Matrix is not a valid density matrix (negative eigenvalue, bad trace)."""
    pass


# ============================================================================
# VALIDATION HELPERS
# ============================================================================

def as_matrix(m, dim: int = None) -> np.ndarray:
    """
    Coerce input to a square complex matrix, optionally of a fixed size.

    Raises:
        LinalgError: If the input is not square, or not dim×dim when dim is given
    """
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise LinalgError(f"Expected a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise LinalgError(f"Expected a {dim}x{dim} matrix, got {arr.shape[0]}x{arr.shape[1]}")
    if arr.shape[0] not in (2, 4):
        raise LinalgError(f"Only 2x2 and 4x4 matrices are supported, got {arr.shape[0]}x{arr.shape[0]}")
    return arr


def hermiticity_residual(m: np.ndarray) -> float:
    """max|M - M†|"""
    return float(np.max(np.abs(m - m.conj().T)))


def require_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and return m as a Hermitian complex matrix."""
    arr = as_matrix(m)
    residual = hermiticity_residual(arr)
    if residual > tol:
        raise LinalgError(f"Matrix is not Hermitian (residual {residual:.3e} > {tol:.0e})")
    return arr


# ============================================================================
# PRODUCTS & PARTIAL TRACES
# ============================================================================

def kron(a, b) -> np.ndarray:
    """
    Kronecker product of two 2×2 matrices.

    (a ⊗ b)[2i+k][2j+l] = a[i][j] · b[k][l]
    """
    return np.kron(as_matrix(a, 2), as_matrix(b, 2))


def partial_trace_B(rho) -> np.ndarray:
    """Trace out the second qubit: ρ^A[i][j] = Σ_k ρ[2i+k][2j+k]."""
    r = as_matrix(rho, 4).reshape(2, 2, 2, 2)
    return np.einsum('ikjk->ij', r)


def partial_trace_A(rho) -> np.ndarray:
    """Trace out the first qubit: ρ^B[k][l] = Σ_i ρ[2i+k][2i+l]."""
    r = as_matrix(rho, 4).reshape(2, 2, 2, 2)
    return np.einsum('ikil->kl', r)


# ============================================================================
# SPECTRA
# ============================================================================

def hermitian_eigenvalues(m) -> np.ndarray:
    """
    Real eigenvalues of a Hermitian matrix, sorted descending.

    Raises:
        LinalgError: If the input is not Hermitian within HERMITIAN_TOL
    """
    arr = require_hermitian(m)
    return np.linalg.eigvalsh(arr)[::-1]


def jacobi_eigenvalues(m, tol: float = JACOBI_OFFDIAG_TOL,
                       max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, int]:
    """
    Cyclic complex Jacobi eigenvalue iteration.

    Each rotation zeroes one off-diagonal pair (p, q) with a unitary plane
    rotation; sweeps repeat until the off-diagonal Frobenius norm is ≤ tol.

    Returns:
        (eigenvalues sorted descending, sweeps used)
    """
    a = require_hermitian(m).copy()
    n = a.shape[0]

    for sweep in range(1, max_sweeps + 1):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol:
            return np.sort(np.real(np.diag(a)))[::-1], sweep - 1

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                angle = 0.5 * np.arctan2(2 * mag, aqq - app)
                c, s = np.cos(angle), np.sin(angle)

                rot = np.eye(n, dtype=complex)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s * phase
                rot[q, p] = -s * np.conj(phase)
                a = rot.conj().T @ a @ rot

    logger.warning(f"⚠️ Jacobi did not converge after {max_sweeps} sweeps")
    return np.sort(np.real(np.diag(a)))[::-1], max_sweeps


def clipped_spectrum(rho, trace_tol: float = TRACE_TOL) -> np.ndarray:
    """
    Eigenvalues of a density matrix with round-off negatives clipped to 0.

    Raises:
        InvalidStateError: Eigenvalue below -EIGEN_CLIP_TOL or trace off by > trace_tol
    """
    eigs = hermitian_eigenvalues(rho)
    trace = float(np.sum(eigs))
    if abs(trace - 1.0) > trace_tol:
        raise InvalidStateError(f"Density matrix trace is {trace:.12f}, expected 1")
    if eigs[-1] < -EIGEN_CLIP_TOL:
        raise InvalidStateError(f"Density matrix has negative eigenvalue {eigs[-1]:.3e}")
    return np.clip(eigs, 0.0, None)


def entropy_of_spectrum(eigs: np.ndarray) -> float:
    """-Σ λ log2 λ with 0·log 0 = 0."""
    positive = eigs[eigs > 0]
    return float(-np.sum(positive * np.log2(positive)))


def von_neumann_entropy(rho) -> float:
    """
    Von Neumann entropy S(ρ) in bits.

    Raises:
        InvalidStateError: If rho is not a valid density matrix
    """
    return entropy_of_spectrum(clipped_spectrum(rho))


# ============================================================================
# RANDOM HELPERS (used by tests and the see-saw)
# ============================================================================

def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (z + z.conj().T) / 2


def random_density_matrix(rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    """Random two-qubit state of the given rank (Hilbert-Schmidt style)."""
    g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def pure_state(vec) -> np.ndarray:
    """|ψ⟩⟨ψ| for a (not necessarily normalized) state vector."""
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())
