"""
🧪 Unit Tests for StateModel

Entangled-basis construction, state assembly, vector layout and the
pure-state inversion used to seed near-quantum-bound runs.

Run with: pytest tools/tests/test_state_model.py -v
"""

import json

import numpy as np
import pytest
import sys
from pathlib import Path

# Add tools directory to path for imports
tools_dir = Path(__file__).resolve().parent.parent
if str(tools_dir) not in sys.path:
    sys.path.insert(0, str(tools_dir))

from LinalgCore import hermitian_eigenvalues, hermiticity_residual, partial_trace_A, partial_trace_B, pure_state, random_unitary
from StateModel import (
    BELL_STATE_PARAMS,
    MAXIMALLY_MIXED_PARAMS,
    N_STATE_PARAMS,
    PARAM_NAMES,
    MeasurementConfig,
    StateModelError,
    StateParams,
    assemble_state,
    decode_vector,
    encode_vector,
    entangled_basis,
    gram_residual,
    local_basis,
    param_names,
    project_simplex,
    pure_state_to_params,
    random_params,
    vector_bounds,
    vector_length,
)


# ============================================================================
# FIXTURES
# ============================================================================

@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def bell_vectors():
    s = 1 / np.sqrt(2)
    return {
        "phi_plus": np.array([s, 0, 0, s]),
        "phi_minus": np.array([s, 0, 0, -s]),
        "psi_plus": np.array([0, s, s, 0]),
        "psi_minus": np.array([0, s, -s, 0]),
    }


# ============================================================================
# BASIS CONSTRUCTION
# ============================================================================

class TestBasis:
    """Tests for the local and entangled bases."""

    def test_local_basis_orthonormal(self, rng):
        """Test that d0..d3 are orthonormal for random rotations."""
        for _ in range(50):
            d = local_basis(*rng.uniform(0, 2 * np.pi, size=4))
            assert gram_residual(d) < 1e-12

    def test_entangled_basis_orthonormal(self, rng):
        """Test that e0..e3 are orthonormal for random parameters."""
        for _ in range(200):
            assert gram_residual(entangled_basis(random_params(rng))) < 1e-10

    def test_zero_angles_computational_basis(self):
        """Test that all-zero angles give e0 = |00⟩."""
        e = entangled_basis(StateParams(mu0=1.0, mu1=0.0, mu2=0.0))
        assert np.allclose(np.abs(e[0]), [1, 0, 0, 0])


# ============================================================================
# STATE ASSEMBLY
# ============================================================================

class TestAssembleState:
    """Tests for assemble_state invariants."""

    def test_random_states_are_density_matrices(self, rng):
        """Test trace, Hermiticity, PSD and eigenvalue multiset on 1,000 random parameter sets."""
        for _ in range(1000):
            params = random_params(rng)
            rho = assemble_state(params)
            assert abs(np.trace(rho).real - 1) <= 1e-12
            assert hermiticity_residual(rho) <= 1e-12
            eigs = np.linalg.eigvalsh(rho)
            assert eigs[0] >= -1e-12
            assert np.allclose(np.sort(eigs), np.sort(params.weights), atol=1e-10)

    def test_purity_is_sum_of_squared_weights(self, rng):
        """Test tr(ρ²) = Σμ² whatever the basis angles."""
        for _ in range(100):
            params = random_params(rng)
            rho = assemble_state(params)
            assert np.trace(rho @ rho).real == pytest.approx(np.sum(params.weights ** 2), abs=1e-12)

    def test_chi_sets_entanglement_of_e0(self, rng):
        """Test that |e0⟩ has reduced eigenvalues {cos²χ, sin²χ} on both qubits."""
        for chi in np.linspace(0.0, np.pi / 2, 7):
            angles = rng.uniform(0.0, 2 * np.pi, size=N_STATE_PARAMS - 3)
            values = np.concatenate([[1.0, 0.0, 0.0], angles])
            values[PARAM_NAMES.index("chi")] = chi
            rho = assemble_state(StateParams.from_vector(values))
            expected = np.sort([np.cos(chi) ** 2, np.sin(chi) ** 2])[::-1]
            assert np.allclose(hermitian_eigenvalues(partial_trace_B(rho)), expected, atol=1e-10)
            assert np.allclose(hermitian_eigenvalues(partial_trace_A(rho)), expected, atol=1e-10)

    @pytest.mark.parametrize("name", ["phi_plus", "phi_minus", "psi_plus", "psi_minus"])
    def test_bell_states_reachable(self, name, bell_vectors):
        """Test that the documented parameter choices give the four Bell states."""
        rho = assemble_state(BELL_STATE_PARAMS[name])
        assert np.allclose(rho, pure_state(bell_vectors[name]), atol=1e-12)

    def test_maximally_mixed(self):
        """Test that equal weights give I/4."""
        assert np.allclose(assemble_state(MAXIMALLY_MIXED_PARAMS), np.eye(4) / 4, atol=1e-12)

    def test_simplex_violation_rejected(self):
        """Test that μ0+μ1+μ2 > 1 raises."""
        with pytest.raises(StateModelError):
            assemble_state(StateParams(mu0=0.5, mu1=0.4, mu2=0.2))

    def test_angle_out_of_range_rejected(self):
        """Test that angles outside [0, 2π] raise."""
        with pytest.raises(StateModelError):
            assemble_state(StateParams(mu0=1.0, mu1=0.0, mu2=0.0, theta=-0.1))

    def test_non_finite_rejected(self):
        """Test that NaN parameters raise."""
        with pytest.raises(StateModelError):
            StateParams(mu0=np.nan, mu1=0.0, mu2=0.0).validate()


# ============================================================================
# PURE-STATE INVERSION
# ============================================================================

class TestPureStateToParams:
    """Tests for pure_state_to_params."""

    def test_random_pure_states(self, rng):
        """Test that assembling the inverted parameters gives back |ψ⟩⟨ψ|."""
        for _ in range(200):
            vec = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            params = pure_state_to_params(vec)
            params.validate()
            assert np.allclose(assemble_state(params), pure_state(vec), atol=1e-9)

    def test_product_state(self):
        """Test that a product state maps to χ = 0."""
        vec = np.kron([np.cos(0.3), np.sin(0.3)], [1, 1j]) / np.sqrt(2)
        params = pure_state_to_params(vec)
        assert params.chi == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(assemble_state(params), pure_state(vec), atol=1e-10)

    def test_locally_rotated_bell_state(self, rng):
        """Test inversion of (U⊗V)|Φ+⟩."""
        u, v = random_unitary(2, rng), random_unitary(2, rng)
        vec = np.kron(u, v) @ np.array([1, 0, 0, 1]) / np.sqrt(2)
        params = pure_state_to_params(vec)
        assert params.chi == pytest.approx(np.pi / 4, abs=1e-9)
        assert np.allclose(assemble_state(params), pure_state(vec), atol=1e-9)


# ============================================================================
# VECTOR LAYOUT
# ============================================================================

class TestVectorLayout:
    """Tests for decode_vector / encode_vector / vector_bounds."""

    def test_chsh_length(self):
        """Test N_D = 23 for two settings per party."""
        assert vector_length(2, 2) == 23

    def test_i1_length(self):
        """Test N_D for four Alice settings and three Bob settings."""
        assert vector_length(4, 3) == 15 + 6 + 6 + 2

    def test_decode_splits_blocks(self):
        """Test that decode_vector places every block where the layout says."""
        x = np.arange(vector_length(3, 2), dtype=float) / 100
        params, cfg = decode_vector(x, 3, 2)
        assert params.mu0 == 0.0
        assert params.zeta == pytest.approx(0.14)
        assert cfg.alice == ((0.15, 0.16), (0.17, 0.18))
        assert cfg.bob == ((0.19, 0.20), (0.21, 0.22))
        assert cfg.discord_angles == (0.23, 0.24)
        assert cfg.n_alice == 3 and cfg.n_bob == 2
        assert np.array_equal(encode_vector(params, cfg), x)

    def test_wrong_length_rejected(self):
        """Test that a vector of the wrong length raises."""
        with pytest.raises(StateModelError):
            decode_vector(np.zeros(22), 2, 2)

    def test_bounds(self):
        """Test weight, angle and θ_d bounds."""
        bounds = vector_bounds(2, 2)
        assert bounds.shape == (23, 2)
        assert np.allclose(bounds[:3], [[0, 1]] * 3)
        assert np.allclose(bounds[3:-2], [[0, 2 * np.pi]] * 18)
        assert np.allclose(bounds[-2], [0, np.pi])
        assert np.allclose(bounds[-1], [0, 2 * np.pi])

    def test_project_simplex(self):
        """Test that over-full weights are rescaled below 1 and others untouched."""
        x = np.array([0.6, 0.5, 0.4, 1.0, 2.0])
        y = project_simplex(x)
        assert y[:3].sum() == pytest.approx(1 - 1e-9)
        assert np.array_equal(y[3:], x[3:])
        assert np.array_equal(project_simplex(np.array([0.1, 0.2, 0.3])), [0.1, 0.2, 0.3])


# ============================================================================
# SERIALIZATION
# ============================================================================

class TestSerialization:
    """Tests for StateParams dict/JSON handling."""

    def test_param_order_frozen(self):
        """Test that the field order matches the canonical serialization order."""
        assert tuple(param_names()) == PARAM_NAMES
        assert len(PARAM_NAMES) == N_STATE_PARAMS

    def test_json_keys(self):
        """Test that to_json writes exactly the 15 canonical keys."""
        data = json.loads(BELL_STATE_PARAMS["phi_plus"].to_json())
        assert list(data) == list(PARAM_NAMES)

    def test_unknown_key_rejected(self):
        """Test that from_dict rejects extra keys."""
        data = BELL_STATE_PARAMS["phi_plus"].to_dict()
        data["gamma"] = 0.0
        with pytest.raises(StateModelError):
            StateParams.from_dict(data)

    def test_missing_key_rejected(self):
        """Test that from_dict rejects missing keys."""
        data = BELL_STATE_PARAMS["phi_plus"].to_dict()
        del data["zeta"]
        with pytest.raises(StateModelError):
            StateParams.from_dict(data)

    def test_measurement_config_vector(self):
        """Test MeasurementConfig flattening order."""
        cfg = MeasurementConfig(alice=((1.0, 2.0),), bob=((3.0, 4.0), (5.0, 6.0)), discord_angles=(7.0, 8.0))
        assert np.array_equal(cfg.to_vector(), [1, 2, 3, 4, 5, 6, 7, 8])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
