"""
🧠 Discord Engine
=================
Quantum discord of two-qubit states, measured on subsystem B! 🔬

    I(ρ)      = S(ρ^A) + S(ρ^B) - S(ρ)
    S(A|Π)    = Σ_i p_i S(ρ_i^A)          (rank-1 projective measurement on B)
    J(ρ; Π)   = S(ρ^A) - S(A|Π)
    D(ρ)      = I(ρ) - max_Π J(ρ; Π)

The measurement Π = {|u⟩⟨u|, |v⟩⟨v|} is parametrized by (θ_d, φ_d).
discord_certified maximizes J on a grid and refines the best cells by
pattern-search coordinate steps; joint_objective evaluates I - J at the
angles carried inside the optimizer vector.

Part of: Discord Certifier tools
"""

import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

# Add tools directory to path for imports
current_dir = Path(__file__).resolve().parent
if str(current_dir) not in sys.path:
    sys.path.insert(0, str(current_dir))

try:
    from LinalgCore import (
        InvalidStateError, LinalgError, clipped_spectrum, entropy_of_spectrum,
        partial_trace_A, partial_trace_B, von_neumann_entropy,
    )
    from StateModel import StateModelError, assemble_state, decode_vector
    from BellExpressions import BellExpression
except ImportError:
    from tools.LinalgCore import (
        InvalidStateError, LinalgError, clipped_spectrum, entropy_of_spectrum,
        partial_trace_A, partial_trace_B, von_neumann_entropy,
    )
    from tools.StateModel import StateModelError, assemble_state, decode_vector
    from tools.BellExpressions import BellExpression

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION
# ============================================================================

DEFAULT_GRID_N = 32
DEFAULT_REFINE_STEPS = 200
MIN_GRID_N = 8
REFINE_STARTS = 4
REFINE_MIN_STEP = 1e-9
ZERO_PROBABILITY = 1e-12
INVALID_STATE_PENALTY = 1e3


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass
class DiscordResult:
    """Certified discord with the measurement that achieved it."""
    discord: float
    mutual_information: float
    best_measurement: Tuple[float, float]
    inner_iterations: int
    classical_correlation: float = 0.0

    def to_dict(self) -> dict:
        return {
            "discord": self.discord,
            "mutual_information": self.mutual_information,
            "classical_correlation": self.classical_correlation,
            "best_measurement": {"theta_d": self.best_measurement[0],
                                 "phi_d": self.best_measurement[1]},
            "inner_iterations": self.inner_iterations,
        }


# ============================================================================
# ENTROPIC QUANTITIES
# ============================================================================

def _entropies_2x2(blocks: np.ndarray) -> np.ndarray:
    """Entropy (bits) of a stack of unit-trace 2×2 Hermitian blocks."""
    eigs = np.clip(np.linalg.eigvalsh(blocks), 0.0, None)
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(eigs > 0, -eigs * np.log2(np.where(eigs > 0, eigs, 1.0)), 0.0)
    return terms.sum(axis=-1)


def measurement_vectors(theta_d, phi_d) -> Tuple[np.ndarray, np.ndarray]:
    """
    |u⟩ = (cos(θ/2), e^{iφ}sin(θ/2)), |v⟩ = (sin(θ/2), -e^{iφ}cos(θ/2)).

    Broadcasts over array-valued angles; the last axis holds the components.
    """
    theta_d = np.asarray(theta_d, dtype=float)
    phase = np.exp(1j * np.asarray(phi_d, dtype=float))
    c, s = np.cos(theta_d / 2), np.sin(theta_d / 2)
    u = np.stack([c + 0j, phase * s], axis=-1)
    v = np.stack([s + 0j, -phase * c], axis=-1)
    return u, v


def _conditional_entropy_batch(rho: np.ndarray, theta_d: np.ndarray, phi_d: np.ndarray) -> np.ndarray:
    """S(A|Π) for many measurement directions at once."""
    r = rho.reshape(2, 2, 2, 2)
    total = np.zeros(np.shape(theta_d))
    for vec in measurement_vectors(theta_d, phi_d):
        # Unnormalized conditional state of A: ⟨w|_B ρ |w⟩_B
        block = np.einsum('...b,abcd,...d->...ac', vec.conj(), r, vec)
        block = (block + np.swapaxes(block, -1, -2).conj()) / 2
        prob = np.trace(block, axis1=-2, axis2=-1).real
        safe = np.where(prob > ZERO_PROBABILITY, prob, 1.0)
        entropies = _entropies_2x2(block / safe[..., None, None])
        total += np.where(prob > ZERO_PROBABILITY, prob * entropies, 0.0)
    return total


def mutual_information(rho: np.ndarray) -> float:
    """
    I(ρ) = S(ρ^A) + S(ρ^B) - S(ρ)

    Raises:
        InvalidStateError: If rho is not a valid density matrix
    """
    s_ab = von_neumann_entropy(rho)
    return von_neumann_entropy(partial_trace_B(rho)) + von_neumann_entropy(partial_trace_A(rho)) - s_ab


def conditional_entropy(rho: np.ndarray, theta_d: float, phi_d: float) -> float:
    """
    S(A|{Π_0, Π_1}) for the projective measurement (θ_d, φ_d) on B.

    Raises:
        InvalidStateError: If rho is not a valid density matrix
    """
    clipped_spectrum(rho)
    return float(_conditional_entropy_batch(np.asarray(rho, dtype=complex),
                                            np.array(theta_d), np.array(phi_d)))


def classical_correlation_J(rho: np.ndarray, theta_d: float, phi_d: float) -> float:
    """J(ρ; Π) = S(ρ^A) - S(A|Π)"""
    return von_neumann_entropy(partial_trace_B(rho)) - conditional_entropy(rho, theta_d, phi_d)


# ============================================================================
# JOINT OBJECTIVE
# ============================================================================

def discord_gap(rho: np.ndarray, theta_d: float, phi_d: float) -> float:
    """
    I(ρ) - J(ρ; Π) at one measurement, i.e. S(ρ^B) - S(ρ) + S(A|Π).

    Minimizing over (θ_d, φ_d) gives the discord.
    """
    spectrum = clipped_spectrum(rho)
    s_b = von_neumann_entropy(partial_trace_A(rho))
    cond = float(_conditional_entropy_batch(rho, np.array(theta_d), np.array(phi_d)))
    return s_b - entropy_of_spectrum(spectrum) + cond


def joint_objective(x, expr: BellExpression) -> float:
    """
    I - J for the state and discord angles encoded in x.

    Invalid intermediate states return INVALID_STATE_PENALTY + violation
    magnitude instead of raising, so surrogate models stay finite.

    Raises:
        StateModelError: If x has the wrong length for expr
    """
    params, cfg = decode_vector(x, expr.n_alice, expr.n_bob)
    violation = max(0.0, -params.mu3)
    if violation > 0:
        return INVALID_STATE_PENALTY + violation
    try:
        rho = assemble_state(params)
        return discord_gap(rho, *cfg.discord_angles)
    except (StateModelError, LinalgError) as e:
        logger.debug(f"Invalid state during search: {e}")
        return INVALID_STATE_PENALTY + violation + 1.0


# ============================================================================
# CERTIFIED DISCORD
# ============================================================================

def measurement_grid(grid_n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    θ_d on grid_n + 1 points of [0, π] (inclusive), φ_d on grid_n points of [0, 2π).

    With grid_n divisible by 4 the grid contains the x, y and z axes.
    """
    thetas = np.linspace(0.0, np.pi, grid_n + 1)
    phis = 2 * np.pi * np.arange(grid_n) / grid_n
    return np.meshgrid(thetas, phis, indexing='ij')


def _refine(rho: np.ndarray, start: Tuple[float, float], step: float,
            refine_steps: int) -> Tuple[float, Tuple[float, float], int]:
    """
    Pattern-search coordinate descent on S(A|Π) starting at a grid point.

    Each step tries ±step along θ then φ; the step halves when neither
    coordinate improves.
    """
    point = np.array(start, dtype=float)
    best = float(_conditional_entropy_batch(rho, np.array(point[0]), np.array(point[1])))
    iterations = 0
    for iterations in range(1, refine_steps + 1):
        improved = False
        for axis in (0, 1):
            trials = np.repeat(point[None, :], 2, axis=0)
            trials[0, axis] += step
            trials[1, axis] -= step
            trials[:, 0] = np.clip(trials[:, 0], 0.0, np.pi)
            values = _conditional_entropy_batch(rho, trials[:, 0], trials[:, 1])
            k = int(np.argmin(values))
            if values[k] < best:
                best = float(values[k])
                point = trials[k]
                improved = True
        if not improved:
            step /= 2
            if step < REFINE_MIN_STEP:
                break
    return best, (float(point[0]), float(point[1] % (2 * np.pi))), iterations


def discord_certified(rho, grid_n: int = DEFAULT_GRID_N,
                      refine_steps: int = DEFAULT_REFINE_STEPS) -> DiscordResult:
    """
    Discord with the inner maximization of J done on a grid plus local refinement.

    The result upper-bounds the true discord and converges as grid_n grows.

    Raises:
        ValueError: If grid_n < MIN_GRID_N
        InvalidStateError: If rho is not a valid density matrix
    """
    if grid_n < MIN_GRID_N:
        raise ValueError(f"grid_n must be ≥ {MIN_GRID_N}, got {grid_n}")
    rho = np.asarray(rho, dtype=complex)
    spectrum = clipped_spectrum(rho)
    s_a = von_neumann_entropy(partial_trace_B(rho))
    s_b = von_neumann_entropy(partial_trace_A(rho))
    info = s_a + s_b - entropy_of_spectrum(spectrum)

    thetas, phis = measurement_grid(grid_n)
    cond = _conditional_entropy_batch(rho, thetas, phis)
    flat_order = np.argsort(cond, axis=None, kind='stable')

    best_cond = float(cond.flat[flat_order[0]])
    best_angles = (float(thetas.flat[flat_order[0]]), float(phis.flat[flat_order[0]]))
    total_iterations = 0
    if refine_steps > 0:
        step = np.pi / grid_n
        for idx in flat_order[:REFINE_STARTS]:
            value, angles, used = _refine(rho, (thetas.flat[idx], phis.flat[idx]), step, refine_steps)
            total_iterations += used
            if value < best_cond:
                best_cond, best_angles = value, angles

    j_max = s_a - best_cond
    discord = max(0.0, info - j_max)
    return DiscordResult(
        discord=discord,
        mutual_information=info,
        best_measurement=best_angles,
        inner_iterations=total_iterations,
        classical_correlation=j_max,
    )


def brute_force_discord(rho, grid_n: int = 256) -> float:
    """Dense-grid discord without refinement (verification oracle)."""
    return discord_certified(rho, grid_n=grid_n, refine_steps=0).discord


# ============================================================================
# REFERENCE STATES
# ============================================================================

BELL_BASIS = np.array([
    [1, 0, 0, 1],
    [1, 0, 0, -1],
    [0, 1, 1, 0],
    [0, 1, -1, 0],
], dtype=complex) / np.sqrt(2)


def bell_diagonal_state(weights) -> np.ndarray:
    """Σ w_k |β_k⟩⟨β_k| over Φ+, Φ-, Ψ+, Ψ-."""
    w = np.asarray(weights, dtype=float)
    return (BELL_BASIS.T * w) @ BELL_BASIS.conj()


def werner_state(z: float) -> np.ndarray:
    """z|Φ+⟩⟨Φ+| + (1 - z) I/4"""
    return bell_diagonal_state([z + (1 - z) / 4, (1 - z) / 4, (1 - z) / 4, (1 - z) / 4])


def binary_entropy(p: float) -> float:
    terms = [q * np.log2(q) for q in (p, 1 - p) if q > 0]
    return float(-sum(terms))
