"""
🔔 Bell Expressions
===================
Registry of the six Bell expressions plus everything needed to evaluate them! 📐

- Bloch-sphere observables O(θ, φ) with Alice's setting 0 fixed to σ_z
- Correlators ⟨M^{0,x} ⊗ M^{1,y}⟩ and Bell values
- Local bounds by enumerating deterministic ±1 strategies
- Quantum bounds by see-saw maximization (heuristic lower bound on the
  Tsirelson value; literature values are kept when the see-saw reproduces them)

Expressions: chsh, modchsh, bc3, bc5, i1, i2

Part of: Discord Certifier tools
"""

import functools
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

# Add tools directory to path for imports
current_dir = Path(__file__).resolve().parent
if str(current_dir) not in sys.path:
    sys.path.insert(0, str(current_dir))

try:
    from LinalgCore import SIGMA_X, SIGMA_Y, SIGMA_Z
    from StateModel import MeasurementConfig
except ImportError:
    from tools.LinalgCore import SIGMA_X, SIGMA_Y, SIGMA_Z
    from tools.StateModel import MeasurementConfig

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION
# ============================================================================

MAX_ENUMERATION_SETTINGS = 24
LITERATURE_AGREEMENT_TOL = 1e-3
SEESAW_MAX_ITER = 500
SEESAW_TOL = 1e-12
REGISTRY_SEESAW_RESTARTS = 40
REGISTRY_SEESAW_SEED = 20240613

PAULIS = np.array([SIGMA_X, SIGMA_Y, SIGMA_Z])

Term = Tuple[int, int, int]


class BellExpressionError(Exception):
    """Rejected Bell-expression input (bad terms, wrong config size, bad index)."""
    pass


class UnknownExpressionError(BellExpressionError):
    """Expression name not in the registry."""
    pass


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class BellExpression:
    """
    Signed correlator terms (x, y, ±1) with 0-based setting indices.

    quantum_bound is the value the optimizer targets; quantum_bound_source
    says whether it came from the literature value or the see-saw.
    """
    name: str
    n_alice: int
    n_bob: int
    terms: Tuple[Term, ...]
    local_bound: float = float("nan")
    quantum_bound: float = float("nan")
    literature_quantum_bound: Optional[float] = None
    seesaw_quantum_bound: Optional[float] = None
    quantum_bound_source: str = "unresolved"
    label: str = ""

    def __post_init__(self):
        if self.n_alice < 1 or self.n_bob < 1:
            raise BellExpressionError(f"❌ {self.name}: setting counts must be ≥ 1")
        for x, y, coeff in self.terms:
            if not (0 <= x < self.n_alice and 0 <= y < self.n_bob):
                raise BellExpressionError(f"❌ {self.name}: term ({x}, {y}) out of range")
            if coeff not in (-1, 1):
                raise BellExpressionError(f"❌ {self.name}: coefficient {coeff} is not ±1")

    @property
    def coefficients(self) -> np.ndarray:
        """(nA, nB) coefficient matrix."""
        c = np.zeros((self.n_alice, self.n_bob))
        for x, y, coeff in self.terms:
            c[x, y] += coeff
        return c

    @property
    def p_local(self) -> float:
        """Fraction of the quantum bound at which the classical limit sits."""
        return self.local_bound / self.quantum_bound

    def target_value(self, p: float) -> float:
        return p * self.quantum_bound


# ============================================================================
# OBSERVABLES & CORRELATORS
# ============================================================================

def observable(theta: float, phi: float) -> np.ndarray:
    """O(θ, φ) = [[cosθ, e^{-iφ}sinθ], [e^{iφ}sinθ, -cosθ]]"""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([
        [c, np.exp(-1j * phi) * s],
        [np.exp(1j * phi) * s, -c],
    ])


def bloch_observable(n: np.ndarray) -> np.ndarray:
    """n·σ for a unit Bloch vector."""
    return np.einsum('i,ijk->jk', n, PAULIS)


def bloch_angles(n: np.ndarray) -> Tuple[float, float]:
    """(θ, φ) with O(θ, φ) = n·σ; θ ∈ [0, π], φ ∈ [0, 2π)."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    theta = float(np.arccos(np.clip(n[2], -1.0, 1.0)))
    phi = float(np.arctan2(n[1], n[0]) % (2 * np.pi))
    return theta, phi


def measurement_observables(cfg: MeasurementConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stacked observables for a configuration.

    Returns:
        (alice (nA, 2, 2) with σ_z first, bob (nB, 2, 2))
    """
    alice = [SIGMA_Z] + [observable(t, f) for t, f in cfg.alice]
    bob = [observable(t, f) for t, f in cfg.bob]
    return np.array(alice), np.array(bob)


def correlation_matrix(rho: np.ndarray, alice_obs: np.ndarray, bob_obs: np.ndarray) -> np.ndarray:
    """E[x, y] = tr[ρ (A_x ⊗ B_y)] for every setting pair."""
    r = np.asarray(rho).reshape(2, 2, 2, 2)
    return np.einsum('abcd,xca,ydb->xy', r, alice_obs, bob_obs).real


def correlator(rho: np.ndarray, x: int, y: int, cfg: MeasurementConfig) -> float:
    """
    ⟨C(x, y)⟩ = tr[ρ (M^{0,x} ⊗ M^{1,y})]

    Raises:
        BellExpressionError: If x or y is out of range for cfg
    """
    if not (0 <= x < cfg.n_alice and 0 <= y < cfg.n_bob):
        raise BellExpressionError(
            f"❌ Setting ({x}, {y}) out of range for nA={cfg.n_alice}, nB={cfg.n_bob}"
        )
    alice_obs, bob_obs = measurement_observables(cfg)
    return float(correlation_matrix(rho, alice_obs[x:x + 1], bob_obs[y:y + 1])[0, 0])


def check_config(expr: BellExpression, cfg: MeasurementConfig) -> None:
    if cfg.n_alice != expr.n_alice or cfg.n_bob != expr.n_bob:
        raise BellExpressionError(
            f"❌ Config sized nA={cfg.n_alice}, nB={cfg.n_bob} but {expr.name} "
            f"needs nA={expr.n_alice}, nB={expr.n_bob}"
        )


def bell_value(rho: np.ndarray, expr: BellExpression, cfg: MeasurementConfig) -> float:
    """Σ coeff · ⟨C(x, y)⟩ over the expression's terms."""
    check_config(expr, cfg)
    alice_obs, bob_obs = measurement_observables(cfg)
    return float(np.sum(expr.coefficients * correlation_matrix(rho, alice_obs, bob_obs)))


def bell_operator(expr: BellExpression, alice_obs: np.ndarray, bob_obs: np.ndarray) -> np.ndarray:
    """W = Σ coeff · A_x ⊗ B_y"""
    w = np.zeros((4, 4), dtype=complex)
    for x, y, coeff in expr.terms:
        w += coeff * np.kron(alice_obs[x], bob_obs[y])
    return w


# ============================================================================
# LOCAL BOUND
# ============================================================================

def _sign_table(n: int) -> np.ndarray:
    """All 2^n assignments of ±1 to n settings, one per row."""
    idx = np.arange(2 ** n)[:, None]
    bits = (idx >> np.arange(n)) & 1
    return 1 - 2 * bits


def local_bound_enumerate(expr: BellExpression) -> float:
    """
    Max of Σ coeff·a_x·b_y over deterministic ±1 strategies.

    The smaller party is enumerated explicitly; for each of its assignments
    the other party's best response is Σ |row sum|, which equals the max
    over all of its 2^n assignments.

    Raises:
        BellExpressionError: If nA + nB exceeds MAX_ENUMERATION_SETTINGS
    """
    if expr.n_alice + expr.n_bob > MAX_ENUMERATION_SETTINGS:
        raise BellExpressionError(
            f"❌ {expr.name}: nA + nB = {expr.n_alice + expr.n_bob} exceeds {MAX_ENUMERATION_SETTINGS}"
        )
    c = expr.coefficients
    if expr.n_alice > expr.n_bob:
        c = c.T
    signs = _sign_table(c.shape[0])
    return float(np.max(np.sum(np.abs(signs @ c), axis=1)))


# ============================================================================
# QUANTUM BOUND (SEE-SAW)
# ============================================================================

@dataclass
class SeesawResult:
    """Best see-saw point: value, optimal pure state and observable angles."""
    value: float
    state: np.ndarray
    alice_angles: Tuple[Tuple[float, float], ...]
    bob_angles: Tuple[Tuple[float, float], ...]
    converged: bool
    iterations: int
    restarts: int

    def config(self, discord_angles: Tuple[float, float] = (0.0, 0.0)) -> MeasurementConfig:
        return MeasurementConfig(alice=self.alice_angles, bob=self.bob_angles,
                                 discord_angles=discord_angles)


def _best_response(k: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Bloch vector maximizing tr(K n·σ); keeps current when K has no traceless part."""
    vec = np.einsum('ij,kji->k', k, PAULIS).real
    norm = np.linalg.norm(vec)
    return current if norm < 1e-14 else vec / norm


def _random_bloch(rng: np.random.Generator, count: int) -> np.ndarray:
    v = rng.standard_normal((count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _seesaw_single(expr: BellExpression, rng: np.random.Generator,
                   max_iter: int, tol: float) -> SeesawResult:
    """One see-saw chain: state ← top eigenvector, then Bob, then Alice (x ≥ 1)."""
    c = expr.coefficients
    alice_vecs = np.vstack([[0.0, 0.0, 1.0], _random_bloch(rng, expr.n_alice - 1)])
    bob_vecs = _random_bloch(rng, expr.n_bob)

    value = -np.inf
    converged = False
    iteration = 0
    state = None
    for iteration in range(1, max_iter + 1):
        alice_obs = np.array([bloch_observable(n) for n in alice_vecs])
        bob_obs = np.array([bloch_observable(n) for n in bob_vecs])
        evals, evecs = np.linalg.eigh(bell_operator(expr, alice_obs, bob_obs))
        state = evecs[:, -1]
        new_value = float(evals[-1])

        r = np.outer(state, state.conj()).reshape(2, 2, 2, 2)
        # Bob's best responses to the current state and Alice's observables
        reduced_a = np.einsum('xac,cbad->xbd', alice_obs, r)
        for y in range(expr.n_bob):
            k = np.einsum('x,xbd->bd', c[:, y], reduced_a)
            bob_vecs[y] = _best_response(k, bob_vecs[y])
        bob_obs = np.array([bloch_observable(n) for n in bob_vecs])
        # Alice's best responses (setting 0 stays σ_z)
        reduced_b = np.einsum('ybc,acdb->yad', bob_obs, r)
        for x in range(1, expr.n_alice):
            k = np.einsum('y,yad->ad', c[x, :], reduced_b)
            alice_vecs[x] = _best_response(k, alice_vecs[x])

        if new_value - value < tol and iteration > 1:
            value = max(value, new_value)
            converged = True
            break
        value = max(value, new_value)

    alice_obs = np.array([bloch_observable(n) for n in alice_vecs])
    bob_obs = np.array([bloch_observable(n) for n in bob_vecs])
    evals, evecs = np.linalg.eigh(bell_operator(expr, alice_obs, bob_obs))
    return SeesawResult(
        value=float(evals[-1]),
        state=evecs[:, -1],
        alice_angles=tuple(bloch_angles(n) for n in alice_vecs[1:]),
        bob_angles=tuple(bloch_angles(n) for n in bob_vecs),
        converged=converged,
        iterations=iteration,
        restarts=1,
    )


def seesaw_maximize(expr: BellExpression, restarts: int = REGISTRY_SEESAW_RESTARTS,
                    rng_seed: int = REGISTRY_SEESAW_SEED, max_iter: int = SEESAW_MAX_ITER,
                    tol: float = SEESAW_TOL, show_progress: bool = False) -> SeesawResult:
    """
    Heuristic maximum of the Bell value over pure states and observables.

    Deterministic given rng_seed. The result is a lower bound on the true
    quantum maximum; non-convergence is reported in SeesawResult.converged.

    Raises:
        BellExpressionError: If restarts < 1
    """
    if restarts < 1:
        raise BellExpressionError("❌ See-saw needs at least one restart")
    rng = np.random.default_rng(rng_seed)
    best: Optional[SeesawResult] = None
    chains = tqdm(range(restarts), desc=f"   🔁 See-saw {expr.name}", disable=not show_progress)
    for _ in chains:
        result = _seesaw_single(expr, rng, max_iter, tol)
        if best is None or result.value > best.value:
            best = result
    best.restarts = restarts
    if not best.converged:
        logger.warning(f"⚠️ See-saw for {expr.name} hit {max_iter} iterations without converging")
    return best


def quantum_bound_seesaw(expr: BellExpression, restarts: int = REGISTRY_SEESAW_RESTARTS,
                         rng_seed: int = REGISTRY_SEESAW_SEED) -> float:
    """Best see-saw Bell value (lower bound on the Tsirelson value)."""
    return seesaw_maximize(expr, restarts=restarts, rng_seed=rng_seed).value


# ============================================================================
# REGISTRY
# ============================================================================

def _chained_terms(n: int) -> Tuple[Term, ...]:
    """Braunstein-Caves BC_n: Σ C(k,k) + Σ C(k,k+1) - C(n-1, 0), 0-based."""
    terms = [(k, k, 1) for k in range(n)]
    terms += [(k, k + 1, 1) for k in range(n - 1)]
    terms.append((n - 1, 0, -1))
    return tuple(sorted(terms))


# name → (label, nA, nB, terms, literature quantum bound)
EXPRESSION_SPECS: Dict[str, Tuple[str, int, int, Tuple[Term, ...], Optional[float]]] = {
    "chsh": ("CHSH", 2, 2,
             ((0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 1, -1)),
             2 * np.sqrt(2)),
    "modchsh": ("Modified CHSH", 2, 3,
                ((0, 1, 1), (0, 2, 1), (1, 0, 1), (1, 1, 1), (1, 2, -1)),
                1 + 2 * np.sqrt(2)),
    "bc3": ("Braunstein-Caves BC3", 3, 3, _chained_terms(3), 6 * np.cos(np.pi / 6)),
    "bc5": ("Braunstein-Caves BC5", 5, 5, _chained_terms(5), 10 * np.cos(np.pi / 10)),
    # Literature value 1 + 6cos(π/2) = 1 lies below the local bound; the see-saw value is used
    "i1": ("I1", 4, 3,
           ((0, 1, 1), (0, 2, -1), (1, 0, -1), (1, 1, -1), (2, 0, 1), (2, 2, 1), (3, 0, 1)),
           1 + 6 * np.cos(np.pi / 2)),
    "i2": ("I2", 4, 3,
           ((0, 1, -1), (0, 2, 1), (1, 0, 1), (1, 1, 1), (1, 2, 1),
            (2, 1, 1), (2, 2, -1), (3, 0, 1), (3, 1, 1), (3, 2, 1)),
           2 + 4 * np.sqrt(2)),
}
EXPRESSION_NAMES = tuple(EXPRESSION_SPECS)


def raw_expression(name: str) -> BellExpression:
    """Expression terms only, bounds unresolved."""
    if name not in EXPRESSION_SPECS:
        raise UnknownExpressionError(
            f"❌ Unknown expression '{name}'. Valid names: {', '.join(EXPRESSION_NAMES)}"
        )
    label, n_alice, n_bob, terms, _ = EXPRESSION_SPECS[name]
    return BellExpression(name=name, n_alice=n_alice, n_bob=n_bob, terms=terms, label=label)


def resolve_bounds(expr: BellExpression, literature_bound: Optional[float],
                   restarts: int = REGISTRY_SEESAW_RESTARTS,
                   rng_seed: int = REGISTRY_SEESAW_SEED) -> BellExpression:
    """
    Fill in local and quantum bounds.

    The literature quantum bound is kept when the see-saw reproduces it within
    LITERATURE_AGREEMENT_TOL; otherwise the see-saw value is used and flagged.
    """
    local = local_bound_enumerate(expr)
    seesaw = quantum_bound_seesaw(expr, restarts=restarts, rng_seed=rng_seed)

    if literature_bound is not None and abs(seesaw - literature_bound) <= LITERATURE_AGREEMENT_TOL:
        quantum, source = float(literature_bound), "literature"
    else:
        quantum, source = seesaw, "seesaw"
        logger.warning(
            f"⚠️ {expr.name}: literature quantum bound {literature_bound} disagrees with "
            f"see-saw {seesaw:.6f}; using the see-saw value"
        )
    if quantum <= local:
        raise BellExpressionError(f"❌ {expr.name}: quantum bound {quantum} ≤ local bound {local}")

    return replace(expr, local_bound=local, quantum_bound=quantum,
                   literature_quantum_bound=literature_bound, seesaw_quantum_bound=seesaw,
                   quantum_bound_source=source)


@functools.lru_cache(maxsize=None)
def _resolved(name: str) -> BellExpression:
    return resolve_bounds(raw_expression(name), EXPRESSION_SPECS[name][4])


def get_expression(name: str) -> BellExpression:
    """
    Registry lookup with bounds resolved (see-saw runs once per process).

    Raises:
        UnknownExpressionError: Listing the valid names
    """
    raw_expression(name)
    return _resolved(name)


def registry() -> List[BellExpression]:
    """All six expressions with resolved bounds, in canonical order."""
    return [get_expression(name) for name in EXPRESSION_NAMES]


def deterministic_value(expr: BellExpression, alice_signs: Sequence[int], bob_signs: Sequence[int]) -> float:
    """Bell value of one deterministic local strategy."""
    return float(np.asarray(alice_signs) @ expr.coefficients @ np.asarray(bob_signs))
