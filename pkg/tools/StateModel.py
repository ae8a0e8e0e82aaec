"""
🧬 State Model
==============
Turns the 15 state parameters into a valid two-qubit density matrix! ⚛️

Construction (purification-based entangled basis):
1. Local basis d0..d3 from two single-qubit rotations (θ, ψ) and (θ', ψ')
2. Entangled basis e0..e3: e0 mixes d0/d1 through (χ, ζ), e1..e3 mix the
   orthogonal complement Ψ⊥ with d2/d3 through (θ0, ψ0, θ21, ψ21, θ32, ψ32)
3. ρ = Σ μ_k |e_k⟩⟨e_k| with μ3 = 1 - μ0 - μ1 - μ2

The optimizer's input vector is laid out as
    [15 state params | 2(nA-1) Alice angles | 2nB Bob angles | θ_d, φ_d]

Part of: Discord Certifier tools
"""

import json
from dataclasses import dataclass, fields, asdict
from typing import Dict, List, Tuple

import numpy as np

# ============================================================================
# CONFIGURATION
# ============================================================================

N_STATE_PARAMS = 15
TWO_PI = 2 * np.pi
ORTHONORMALITY_TOL = 1e-8
SIMPLEX_TOL = 1e-12

# Frozen serialization order of the 15 state parameters
PARAM_NAMES = (
    "mu0", "mu1", "mu2",
    "theta", "psi", "theta_p", "psi_p",
    "theta_0", "psi_0", "theta_21", "psi_21", "theta_32", "psi_32",
    "chi", "zeta",
)


class StateModelError(Exception):
    """Rejected state-model input (simplex, ranges, vector length)."""
    pass


class BasisConstructionError(Exception):
    """Entangled basis failed its orthonormality check (implementation bug)."""
    pass


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class StateParams:
    """The 15 optimization variables that fix a two-qubit mixed state."""
    mu0: float
    mu1: float
    mu2: float
    theta: float = 0.0
    psi: float = 0.0
    theta_p: float = 0.0
    psi_p: float = 0.0
    theta_0: float = 0.0
    psi_0: float = 0.0
    theta_21: float = 0.0
    psi_21: float = 0.0
    theta_32: float = 0.0
    psi_32: float = 0.0
    chi: float = 0.0
    zeta: float = 0.0

    @property
    def mu3(self) -> float:
        return 1.0 - self.mu0 - self.mu1 - self.mu2

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.mu0, self.mu1, self.mu2, self.mu3])

    def validate(self) -> "StateParams":
        """
        Check the simplex condition and parameter ranges.

        Angles are accepted on the closed interval [0, 2π] so that box
        bounds handed to the optimizer are valid StateParams.

        Raises:
            StateModelError: On any violation
        """
        values = self.to_vector()
        if not np.all(np.isfinite(values)):
            raise StateModelError("❌ StateParams contain non-finite values")
        mus = values[:3]
        if np.any(mus < 0) or np.any(mus > 1):
            raise StateModelError(f"❌ Weights must lie in [0, 1], got {mus.tolist()}")
        if mus.sum() > 1 + SIMPLEX_TOL:
            raise StateModelError(f"❌ Simplex violated: mu0+mu1+mu2 = {mus.sum():.12f} > 1")
        angles = values[3:]
        if np.any(angles < 0) or np.any(angles > TWO_PI):
            raise StateModelError("❌ Angles must lie in [0, 2π]")
        return self

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_vector(cls, values) -> "StateParams":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_STATE_PARAMS,):
            raise StateModelError(f"❌ Expected {N_STATE_PARAMS} state parameters, got {values.shape}")
        return cls(**{name: float(v) for name, v in zip(PARAM_NAMES, values)})

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "StateParams":
        unknown = set(data) - set(PARAM_NAMES)
        missing = [name for name in PARAM_NAMES if name not in data]
        if unknown or missing:
            raise StateModelError(f"❌ Bad StateParams keys: missing={missing}, unknown={sorted(unknown)}")
        return cls(**{name: float(data[name]) for name in PARAM_NAMES})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StateParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class MeasurementConfig:
    """
    Bloch angles for every variational observable plus the discord measurement.

    alice holds settings 1..nA-1 (setting 0 is fixed to σ_z); bob holds all nB.
    """
    alice: Tuple[Tuple[float, float], ...]
    bob: Tuple[Tuple[float, float], ...]
    discord_angles: Tuple[float, float] = (0.0, 0.0)

    @property
    def n_alice(self) -> int:
        return len(self.alice) + 1

    @property
    def n_bob(self) -> int:
        return len(self.bob)

    def to_vector(self) -> np.ndarray:
        flat: List[float] = []
        for pair in self.alice:
            flat.extend(pair)
        for pair in self.bob:
            flat.extend(pair)
        flat.extend(self.discord_angles)
        return np.array(flat, dtype=float)


# ============================================================================
# BASIS CONSTRUCTION
# ============================================================================

def _qubit_pair(theta: float, psi: float) -> Tuple[np.ndarray, np.ndarray]:
    """|φ⟩ and |φ⊥⟩ for one local rotation."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    em, ep = np.exp(-0.5j * psi), np.exp(0.5j * psi)
    phi = np.array([c * em, s * ep])
    phi_perp = np.array([-s * em, c * ep])
    return phi, phi_perp


def local_basis(theta: float, psi: float, theta_p: float, psi_p: float) -> np.ndarray:
    """
    Product basis built from two single-qubit rotations.

    Returns:
        4×4 array whose rows are d0 = φφ', d1 = φ⊥φ'⊥, d2 = φφ'⊥, d3 = φ⊥φ'
    """
    phi, phi_perp = _qubit_pair(theta, psi)
    phi_p, phi_p_perp = _qubit_pair(theta_p, psi_p)
    return np.array([
        np.kron(phi, phi_p),
        np.kron(phi_perp, phi_p_perp),
        np.kron(phi, phi_p_perp),
        np.kron(phi_perp, phi_p),
    ])


def _mixing(theta: float, psi: float) -> Tuple[complex, complex]:
    """c = cos(θ/2)e^{-iψ/2}, s = sin(θ/2)e^{iψ/2}"""
    return np.cos(theta / 2) * np.exp(-0.5j * psi), np.sin(theta / 2) * np.exp(0.5j * psi)


def gram_residual(vectors: np.ndarray) -> float:
    """max|⟨v_i|v_j⟩ - δ_ij| over the rows of vectors."""
    gram = vectors.conj() @ vectors.T
    return float(np.max(np.abs(gram - np.eye(len(vectors)))))


def entangled_basis(p: StateParams, check: bool = True) -> np.ndarray:
    """
    Orthonormal entangled basis e0..e3 (rows of the returned 4×4 array).

    Ψ⊥ is taken as the orthogonal complement of e0 inside span{d0, d1};
    barred symbols are complex conjugates.

    Raises:
        BasisConstructionError: If the orthonormality residual exceeds 1e-8
    """
    d = local_basis(p.theta, p.psi, p.theta_p, p.psi_p)
    q_plus, q_minus = np.cos(p.chi), np.sin(p.chi)
    phase = np.exp(1j * p.zeta)

    e0 = q_plus * d[0] + phase * q_minus * d[1]
    psi_perp = -np.conj(phase) * q_minus * d[0] + q_plus * d[1]

    c0, s0 = _mixing(p.theta_0, p.psi_0)
    c21, s21 = _mixing(p.theta_21, p.psi_21)
    c32, s32 = _mixing(p.theta_32, p.psi_32)
    cb0, sb0 = np.conj(c0), np.conj(s0)
    cb21, sb21 = np.conj(c21), np.conj(s21)
    cb32, sb32 = np.conj(c32), np.conj(s32)

    e1 = c21 * psi_perp + s21 * (c32 * d[2] + s32 * d[3])
    e2 = (-c0 * sb21 * psi_perp
          + (c0 * cb21 * c32 - s0 * sb32) * d[2]
          + (c0 * cb21 * s32 + s0 * cb32) * d[3])
    e3 = (sb0 * sb21 * psi_perp
          - (sb0 * cb21 * c32 + cb0 * sb32) * d[2]
          - (sb0 * cb21 * s32 - cb0 * cb32) * d[3])

    basis = np.array([e0, e1, e2, e3])
    if check:
        residual = gram_residual(basis)
        if residual > ORTHONORMALITY_TOL:
            raise BasisConstructionError(
                f"❌ Entangled basis not orthonormal (residual {residual:.3e})"
            )
    return basis


def assemble_state(p: StateParams) -> np.ndarray:
    """
    ρ = Σ_k μ_k |e_k⟩⟨e_k|

    Raises:
        StateModelError: If the simplex condition or ranges are violated
    """
    p.validate()
    basis = entangled_basis(p)
    weights = np.clip(p.weights, 0.0, None)
    rho = (basis.T * weights) @ basis.conj()
    return (rho + rho.conj().T) / 2


# ============================================================================
# INPUT VECTOR LAYOUT
# ============================================================================

def vector_length(n_alice: int, n_bob: int) -> int:
    """N_D = 15 + 2(nA - 1) + 2nB + 2"""
    return N_STATE_PARAMS + 2 * (n_alice - 1) + 2 * n_bob + 2


def decode_vector(x, n_alice: int, n_bob: int) -> Tuple[StateParams, MeasurementConfig]:
    """
    Split an optimizer vector into state parameters and measurement angles.

    Raises:
        StateModelError: If the vector length does not match the setting counts
    """
    x = np.asarray(x, dtype=float)
    expected = vector_length(n_alice, n_bob)
    if x.ndim != 1 or x.shape[0] != expected:
        raise StateModelError(
            f"❌ Vector length {x.shape} does not match N_D = {expected} for nA={n_alice}, nB={n_bob}"
        )

    params = StateParams.from_vector(x[:N_STATE_PARAMS])
    cursor = N_STATE_PARAMS
    alice_flat = x[cursor:cursor + 2 * (n_alice - 1)]
    cursor += 2 * (n_alice - 1)
    bob_flat = x[cursor:cursor + 2 * n_bob]
    cursor += 2 * n_bob

    cfg = MeasurementConfig(
        alice=tuple((float(a), float(b)) for a, b in alice_flat.reshape(-1, 2)),
        bob=tuple((float(a), float(b)) for a, b in bob_flat.reshape(-1, 2)),
        discord_angles=(float(x[cursor]), float(x[cursor + 1])),
    )
    return params, cfg


def encode_vector(params: StateParams, cfg: MeasurementConfig) -> np.ndarray:
    """Inverse of decode_vector."""
    return np.concatenate([params.to_vector(), cfg.to_vector()])


def vector_bounds(n_alice: int, n_bob: int) -> np.ndarray:
    """
    Box bounds for the optimizer vector as an (N_D, 2) array.

    Weights live in [0, 1], every angle in [0, 2π] except θ_d ∈ [0, π].
    """
    n = vector_length(n_alice, n_bob)
    bounds = np.tile([0.0, TWO_PI], (n, 1))
    bounds[:3] = [0.0, 1.0]
    bounds[-2] = [0.0, np.pi]
    return bounds


def project_simplex(x: np.ndarray, delta: float = 1e-9) -> np.ndarray:
    """Rescale the (μ0, μ1, μ2) block so that it sums to at most 1 - delta."""
    x = np.array(x, dtype=float)
    total = x[:3].sum()
    if total > 1.0:
        x[:3] *= (1.0 - delta) / total
    return x


# ============================================================================
# CONSTRUCTIONS
# ============================================================================

def pure_state_to_params(vec) -> StateParams:
    """
    StateParams whose assembled state is |ψ⟩⟨ψ|, via the Schmidt decomposition.

    |ψ⟩ = s0|a0 b0⟩ + s1|a1 b1⟩ maps to φ = a0, φ' = b0 up to phase,
    χ = atan2(s1, s0), and ζ collects the leftover relative phase.
    """
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    u, svals, vh = np.linalg.svd(v.reshape(2, 2))

    def angles_of(col: np.ndarray) -> Tuple[float, float, float]:
        # col = e^{iγ}(cos(θ/2)e^{-iψ/2}, sin(θ/2)e^{iψ/2})
        theta = 2 * np.arctan2(abs(col[1]), abs(col[0]))
        a0 = np.angle(col[0]) if abs(col[0]) > 1e-12 else np.angle(col[1])
        a1 = np.angle(col[1]) if abs(col[1]) > 1e-12 else a0
        psi = (a1 - a0) % TWO_PI
        gamma = a0 + psi / 2
        return theta, psi, gamma

    theta, psi, _ = angles_of(u[:, 0])
    theta_p, psi_p, _ = angles_of(vh[0, :])
    phi, phi_perp = _qubit_pair(theta, psi)
    phi_p, phi_p_perp = _qubit_pair(theta_p, psi_p)

    # Remaining phases of the Schmidt vectors relative to the constructed φ's
    g0 = np.vdot(phi, u[:, 0]) * np.vdot(phi_p, vh[0, :])
    g1 = np.vdot(phi_perp, u[:, 1]) * np.vdot(phi_p_perp, vh[1, :])
    zeta = (np.angle(g1) - np.angle(g0)) % TWO_PI
    chi = float(np.arctan2(svals[1], svals[0]))

    return StateParams(
        mu0=1.0, mu1=0.0, mu2=0.0,
        theta=float(theta), psi=float(psi), theta_p=float(theta_p), psi_p=float(psi_p),
        chi=chi, zeta=float(zeta),
    )


# Explicit parameter choices reaching the Bell states and the maximally mixed state
BELL_STATE_PARAMS: Dict[str, StateParams] = {
    "phi_plus": StateParams(mu0=1.0, mu1=0.0, mu2=0.0, chi=np.pi / 4, zeta=0.0),
    "phi_minus": StateParams(mu0=1.0, mu1=0.0, mu2=0.0, chi=np.pi / 4, zeta=np.pi),
    # θ' = π gives d0 = |01⟩, d1 = -|10⟩
    "psi_plus": StateParams(mu0=1.0, mu1=0.0, mu2=0.0, theta_p=np.pi, chi=np.pi / 4, zeta=np.pi),
    "psi_minus": StateParams(mu0=1.0, mu1=0.0, mu2=0.0, theta_p=np.pi, chi=np.pi / 4, zeta=0.0),
}
MAXIMALLY_MIXED_PARAMS = StateParams(mu0=0.25, mu1=0.25, mu2=0.25)


def random_params(rng: np.random.Generator) -> StateParams:
    """Uniform angles and a uniform point on the weight simplex."""
    mus = rng.dirichlet(np.ones(4))[:3]
    angles = rng.uniform(0.0, TWO_PI, size=N_STATE_PARAMS - 3)
    return StateParams.from_vector(np.concatenate([mus, angles]))


def param_names() -> List[str]:
    return [f.name for f in fields(StateParams)]
