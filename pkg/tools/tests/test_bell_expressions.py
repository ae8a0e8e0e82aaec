"""
🧪 Unit Tests for BellExpressions

Observables, correlators, local-bound enumeration, see-saw quantum bounds
and the expression registry.

Run with: pytest tools/tests/test_bell_expressions.py -v
"""

import itertools

import numpy as np
import pytest
import sys
from pathlib import Path

# Add tools directory to path for imports
tools_dir = Path(__file__).resolve().parent.parent
if str(tools_dir) not in sys.path:
    sys.path.insert(0, str(tools_dir))

from LinalgCore import SIGMA_X, SIGMA_Y, SIGMA_Z, pure_state, random_density_matrix
from StateModel import MeasurementConfig
from BellExpressions import (
    EXPRESSION_NAMES,
    BellExpression,
    BellExpressionError,
    UnknownExpressionError,
    bell_value,
    bloch_angles,
    correlator,
    deterministic_value,
    get_expression,
    local_bound_enumerate,
    observable,
    raw_expression,
    registry,
    seesaw_maximize,
)


# ============================================================================
# FIXTURES
# ============================================================================

@pytest.fixture
def phi_plus():
    return pure_state([1, 0, 0, 1])


@pytest.fixture
def chsh_optimal_config():
    """A1 = σx, B0 = (σz+σx)/√2, B1 = (σz-σx)/√2 (A0 = σz implicitly)."""
    return MeasurementConfig(
        alice=((np.pi / 2, 0.0),),
        bob=((np.pi / 4, 0.0), (np.pi / 4, np.pi)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(99)


# ============================================================================
# OBSERVABLES
# ============================================================================

class TestObservables:
    """Tests for O(θ, φ) and Bloch angles."""

    def test_pauli_axes(self):
        """Test that the Bloch axes give σz, σx, σy."""
        assert np.allclose(observable(0.0, 0.0), SIGMA_Z)
        assert np.allclose(observable(np.pi / 2, 0.0), SIGMA_X)
        assert np.allclose(observable(np.pi / 2, np.pi / 2), SIGMA_Y)

    def test_observable_is_involution(self, rng):
        """Test that O² = I and O has eigenvalues ±1."""
        for theta, phi in rng.uniform(0, 2 * np.pi, size=(20, 2)):
            o = observable(theta, phi)
            assert np.allclose(o @ o, np.eye(2))
            assert np.allclose(np.linalg.eigvalsh(o), [-1, 1])

    def test_bloch_angles_inverse(self, rng):
        """Test that observable(bloch_angles(n)) = n·σ."""
        for n in rng.standard_normal((20, 3)):
            n = n / np.linalg.norm(n)
            theta, phi = bloch_angles(n)
            expected = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
            assert np.allclose(observable(theta, phi), expected)


# ============================================================================
# CORRELATORS & BELL VALUES
# ============================================================================

class TestBellValue:
    """Tests for correlators and Bell values."""

    def test_chsh_tsirelson_on_phi_plus(self, phi_plus, chsh_optimal_config):
        """Test that Φ+ with the textbook settings reaches 2√2."""
        value = bell_value(phi_plus, get_expression("chsh"), chsh_optimal_config)
        assert value == pytest.approx(2 * np.sqrt(2), abs=1e-12)

    def test_correlator_phi_plus_zz(self, phi_plus, chsh_optimal_config):
        """Test ⟨σz⊗B0⟩ = 1/√2 on Φ+."""
        assert correlator(phi_plus, 0, 0, chsh_optimal_config) == pytest.approx(1 / np.sqrt(2))

    def test_correlators_bounded(self, rng, chsh_optimal_config):
        """Test |⟨C(x, y)⟩| ≤ 1 on random states."""
        for _ in range(20):
            rho = random_density_matrix(rng)
            for x, y in itertools.product(range(2), range(2)):
                assert abs(correlator(rho, x, y, chsh_optimal_config)) <= 1 + 1e-12

    def test_correlator_out_of_range(self, phi_plus, chsh_optimal_config):
        """Test that a setting index beyond the config raises."""
        with pytest.raises(BellExpressionError):
            correlator(phi_plus, 2, 0, chsh_optimal_config)

    def test_config_size_mismatch(self, phi_plus, chsh_optimal_config):
        """Test that evaluating BC3 with a CHSH-sized config raises."""
        with pytest.raises(BellExpressionError):
            bell_value(phi_plus, raw_expression("bc3"), chsh_optimal_config)

    @pytest.mark.parametrize("name", EXPRESSION_NAMES)
    def test_linear_in_state(self, name, rng):
        """Test B(aρ1 + (1-a)ρ2) = a·B(ρ1) + (1-a)·B(ρ2) at fixed settings."""
        expr = raw_expression(name)
        cfg = MeasurementConfig(
            alice=tuple(tuple(rng.uniform(0, np.pi, 2)) for _ in range(expr.n_alice - 1)),
            bob=tuple(tuple(rng.uniform(0, np.pi, 2)) for _ in range(expr.n_bob)),
        )
        rho1, rho2 = random_density_matrix(rng), random_density_matrix(rng)
        a = rng.uniform()
        mixed = bell_value(a * rho1 + (1 - a) * rho2, expr, cfg)
        assert mixed == pytest.approx(a * bell_value(rho1, expr, cfg)
                                      + (1 - a) * bell_value(rho2, expr, cfg), abs=1e-12)

    def test_product_states_respect_local_bound(self, rng):
        """Test that product states never beat the CHSH local bound."""
        expr = get_expression("chsh")
        for _ in range(50):
            a = random_density_matrix(rng, rank=1)[:2, :2]
            a = a / np.trace(a)
            b = np.array([[0.5, 0.2], [0.2, 0.5]], dtype=complex)
            cfg = MeasurementConfig(alice=(tuple(rng.uniform(0, np.pi, 2)),),
                                    bob=tuple(tuple(rng.uniform(0, np.pi, 2)) for _ in range(2)))
            assert abs(bell_value(np.kron(a, b), expr, cfg)) <= 2 + 1e-9


# ============================================================================
# LOCAL BOUNDS
# ============================================================================

class TestLocalBound:
    """Tests for deterministic-strategy enumeration."""

    @pytest.mark.parametrize("name, expected", [
        ("chsh", 2), ("modchsh", 3), ("bc3", 4), ("bc5", 8), ("i1", 5), ("i2", 6),
    ])
    def test_enumerated_bounds(self, name, expected):
        """Test the local bound of every registered expression."""
        assert local_bound_enumerate(raw_expression(name)) == expected

    def test_matches_full_enumeration(self):
        """Test the best-response shortcut against enumerating both parties."""
        for name in EXPRESSION_NAMES:
            expr = raw_expression(name)
            best = max(
                deterministic_value(expr, a, b)
                for a in itertools.product((-1, 1), repeat=expr.n_alice)
                for b in itertools.product((-1, 1), repeat=expr.n_bob)
            )
            assert local_bound_enumerate(expr) == best

    @pytest.mark.parametrize("name", EXPRESSION_NAMES)
    def test_invariant_under_relabeling_and_flips(self, name, rng):
        """Test that permuting settings, flipping outcomes and swapping parties keep the bound."""
        expr = raw_expression(name)
        expected = local_bound_enumerate(expr)
        for _ in range(5):
            perm_a = rng.permutation(expr.n_alice)
            perm_b = rng.permutation(expr.n_bob)
            flip_a = rng.choice((-1, 1), size=expr.n_alice)
            flip_b = rng.choice((-1, 1), size=expr.n_bob)
            terms = tuple((int(perm_a[x]), int(perm_b[y]), int(c * flip_a[x] * flip_b[y]))
                          for x, y, c in expr.terms)
            relabeled = BellExpression(name=f"{name}_relabeled", n_alice=expr.n_alice,
                                       n_bob=expr.n_bob, terms=terms)
            assert local_bound_enumerate(relabeled) == expected

            swapped = BellExpression(name=f"{name}_swapped", n_alice=expr.n_bob, n_bob=expr.n_alice,
                                     terms=tuple((y, x, c) for x, y, c in expr.terms))
            assert local_bound_enumerate(swapped) == expected

    def test_too_many_settings_rejected(self):
        """Test that enumeration refuses more than 24 settings in total."""
        expr = BellExpression(name="big", n_alice=13, n_bob=12, terms=((0, 0, 1),))
        with pytest.raises(BellExpressionError):
            local_bound_enumerate(expr)

    def test_bad_coefficient_rejected(self):
        """Test that a coefficient other than ±1 raises."""
        with pytest.raises(BellExpressionError):
            BellExpression(name="bad", n_alice=2, n_bob=2, terms=((0, 0, 2),))


# ============================================================================
# QUANTUM BOUNDS & REGISTRY
# ============================================================================

class TestRegistry:
    """Tests for resolved registry bounds."""

    @pytest.mark.parametrize("name, expected", [
        ("chsh", 2 * np.sqrt(2)),
        ("modchsh", 1 + 2 * np.sqrt(2)),
        ("bc3", 3 * np.sqrt(3)),
        ("bc5", 10 * np.cos(np.pi / 10)),
        ("i2", 2 + 4 * np.sqrt(2)),
    ])
    def test_quantum_bounds(self, name, expected):
        """Test that the see-saw reproduces the literature quantum bounds."""
        expr = get_expression(name)
        assert expr.seesaw_quantum_bound == pytest.approx(expected, abs=1e-3)
        assert expr.quantum_bound == pytest.approx(expected, abs=1e-3)
        assert expr.quantum_bound_source == "literature"

    def test_i1_uses_seesaw_value(self):
        """Test that I1 falls back to its see-saw value above the local bound."""
        expr = get_expression("i1")
        assert expr.literature_quantum_bound == pytest.approx(1.0)
        assert expr.quantum_bound_source == "seesaw"
        assert expr.quantum_bound == expr.seesaw_quantum_bound
        assert expr.quantum_bound > expr.local_bound

    def test_registry_order_and_ratios(self):
        """Test canonical order and 0 < p_L < 1 for every expression."""
        exprs = registry()
        assert [e.name for e in exprs] == list(EXPRESSION_NAMES)
        for expr in exprs:
            assert 0 < expr.p_local < 1

    def test_chsh_classical_fraction(self):
        """Test p_L = 1/√2 for CHSH."""
        assert get_expression("chsh").p_local == pytest.approx(1 / np.sqrt(2), abs=1e-4)

    def test_i2_crossing_fraction(self):
        """Test p_L = 6/(2+4√2) ≈ 0.784 for I2."""
        assert get_expression("i2").p_local == pytest.approx(0.784, abs=1e-3)

    def test_unknown_expression(self):
        """Test that an unknown name raises with the valid names listed."""
        with pytest.raises(UnknownExpressionError) as excinfo:
            get_expression("chsh3")
        for name in EXPRESSION_NAMES:
            assert name in str(excinfo.value)


class TestSeesaw:
    """Tests for see-saw maximization."""

    def test_deterministic(self):
        """Test that the same seed gives the same value and angles."""
        expr = raw_expression("chsh")
        a = seesaw_maximize(expr, restarts=3, rng_seed=5)
        b = seesaw_maximize(expr, restarts=3, rng_seed=5)
        assert a.value == b.value
        assert a.bob_angles == b.bob_angles

    def test_state_reaches_value(self):
        """Test that the reported state and settings reproduce the reported value."""
        expr = raw_expression("chsh")
        result = seesaw_maximize(expr, restarts=5, rng_seed=11)
        value = bell_value(pure_state(result.state), expr, result.config())
        assert value == pytest.approx(result.value, abs=1e-9)

    def test_needs_restarts(self):
        """Test that zero restarts are rejected."""
        with pytest.raises(BellExpressionError):
            seesaw_maximize(raw_expression("chsh"), restarts=0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
