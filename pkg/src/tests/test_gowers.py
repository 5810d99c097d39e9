"""
Test suite for Gowers uniformity norms.

Tests verify exact norm identities, agreement of the naive, recursive and
Fourier evaluators, and the seminorm properties of U^d.
"""
import pytest
import numpy as np

from src.gowers import (
    Signal,
    fourier_transform,
    inner_product,
    l2_norm,
    multiplicative_derivative,
    u2_fourier,
    u_norm,
    u_norm_naive,
    u_norm_recursive,
)
from src.group_cube import BudgetExceededError, FiniteAbelianGroup

TOL = 1e-9


class TestNormIdentities:
    """Test closed-form values of U^d norms."""

    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("N", [2, 5, 12])
    def test_constant_one(self, d, N):
        f = Signal.constant(FiniteAbelianGroup([N]))
        assert abs(u_norm_naive(f, d) - 1.0) < 1e-12

    @pytest.mark.parametrize("N", [3, 5])
    def test_constant_one_degree_4(self, N):
        f = Signal.constant(FiniteAbelianGroup([N]))
        assert abs(u_norm_naive(f, 4) - 1.0) < 1e-12
        assert abs(u_norm_recursive(f, 4) - 1.0) < 1e-12

    def test_character_u2(self, z5):
        f = Signal.character(z5, 2)
        assert abs(u_norm_naive(f, 2) - 1.0) < TOL
        assert abs(u2_fourier(f) - 1.0) < TOL

    def test_quadratic_phase(self, z5):
        f = Signal.quadratic_phase(z5, 1)
        assert abs(u_norm_naive(f, 2) - 5 ** -0.25) < TOL
        assert abs(u2_fourier(f) - 5 ** -0.25) < TOL
        assert abs(u_norm_naive(f, 3) - 1.0) < TOL

    @pytest.mark.parametrize("N", [7, 16])
    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("seed", range(5))
    def test_phase_polynomial_is_extremal(self, N, k, seed):
        rng = np.random.default_rng(seed)
        coeffs = [int(a) for a in rng.integers(0, N, size=k)] + [int(rng.integers(1, N))]
        f = Signal.phase_polynomial(FiniteAbelianGroup([N]), coeffs)
        assert abs(u_norm_recursive(f, k + 1) - 1.0) < TOL
        if N == 7 and k <= 2:
            assert abs(u_norm_naive(f, k + 1) - 1.0) < TOL

    def test_u1_is_absolute_mean(self, random_signal):
        f = random_signal("Z7", 3)
        assert abs(u_norm(f, 1) - abs(np.mean(f.values))) < TOL

    def test_zero_function(self, z5):
        f = Signal.constant(z5, 0.0)
        assert u_norm(f, 3) == 0.0


class TestEvaluatorAgreement:
    """Test that naive enumeration and the derivative recursion agree."""

    @pytest.mark.parametrize("group_text", ["Z5", "Z8", "Z9", "Z2xZ3"])
    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_naive_vs_recursive(self, random_signal, group_text, d, seed):
        f = random_signal(group_text, seed)
        assert abs(u_norm_naive(f, d) - u_norm_recursive(f, d)) < TOL

    @pytest.mark.parametrize("seed", [0, 1])
    def test_naive_vs_recursive_degree_4(self, random_signal, seed):
        f = random_signal("Z5", seed)
        assert abs(u_norm_naive(f, 4) - u_norm_recursive(f, 4)) < TOL

    @pytest.mark.slow
    @pytest.mark.parametrize("group_text", ["Z5", "Z8", "Z9", "Z12"])
    @pytest.mark.parametrize("d", [2, 3, 4])
    @pytest.mark.parametrize("seed", range(50))
    def test_naive_vs_recursive_grid(self, random_signal, group_text, d, seed):
        f = random_signal(group_text, 100 + seed)
        assert abs(u_norm_naive(f, d) - u_norm_recursive(f, d)) < TOL

    @pytest.mark.parametrize("seed", range(5))
    def test_fourier_identity(self, random_signal, seed):
        f = random_signal("Z12", seed)
        assert abs(u2_fourier(f) - u_norm_naive(f, 2)) < TOL

    def test_parallel_matches_serial(self, random_signal):
        f = random_signal("Z9", 4)
        assert u_norm_recursive(f, 3, n_jobs=2) == pytest.approx(u_norm_recursive(f, 3, n_jobs=1), abs=1e-12)

    def test_dispatch(self, random_signal):
        f = random_signal("Z5", 0)
        assert u_norm(f, 2, method="fourier") == pytest.approx(u_norm(f, 2, method="naive"), abs=TOL)
        with pytest.raises(ValueError, match="only computes U\\^2"):
            u_norm(f, 3, method="fourier")
        with pytest.raises(ValueError, match="Unknown evaluator"):
            u_norm(f, 2, method="magic")


class TestSeminormProperties:
    """Test triangle inequality and monotonicity in d."""

    @pytest.mark.parametrize("seed", range(100))
    def test_triangle_inequality(self, random_signal, seed):
        f = random_signal("Z8", 2 * seed)
        g = random_signal("Z8", 2 * seed + 1)
        for d in (2, 3, 4):
            assert u_norm(f + g, d) <= u_norm(f, d) + u_norm(g, d) + TOL

    @pytest.mark.parametrize("seed", range(100))
    def test_monotone_in_degree(self, random_signal, seed):
        f = random_signal("Z6", seed)
        norms = [u_norm_naive(f, 1)] + [u_norm_recursive(f, d) for d in (2, 3, 4)]
        for lower, upper in zip(norms, norms[1:]):
            assert lower <= upper + TOL

    def test_bounded_by_sup_norm(self, random_signal):
        f = random_signal("Z9", 11)
        assert u_norm(f, 3) <= np.max(np.abs(f.values)) + TOL

    @pytest.mark.parametrize("c", [0.5, -2.0, 0.3 + 0.4j, 1j])
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_homogeneity(self, random_signal, c, d):
        f = random_signal("Z7", 5)
        assert u_norm(f.scale(c), d) == pytest.approx(abs(c) * u_norm(f, d), abs=TOL)



class TestPrimitives:
    """Test derivatives, inner products and the Fourier transform."""

    def test_derivative_of_character_is_constant(self, z5):
        f = Signal.character(z5, 2)
        derivative = multiplicative_derivative(f, 1)
        assert np.allclose(derivative.values, np.exp(2j * np.pi * 2 / 5))

    def test_inner_product_of_distinct_characters(self, z5):
        assert abs(inner_product(Signal.character(z5, 1), Signal.character(z5, 2))) < TOL
        assert inner_product(Signal.character(z5, 1), Signal.character(z5, 1)) == pytest.approx(1.0)

    def test_fourier_of_character_is_delta(self, z5):
        F = fourier_transform(Signal.character(z5, 3))
        assert abs(F[3] - 1.0) < TOL
        assert np.sum(np.abs(F)) == pytest.approx(1.0)

    def test_l2_norm(self, z5):
        assert l2_norm(Signal.constant(z5, 0.5)) == pytest.approx(0.5)

    def test_signal_bound_enforced(self, z5):
        with pytest.raises(ValueError, match="declared bound"):
            Signal(z5, np.full(5, 2.0), 1.0)

    def test_signal_size_checked(self, z5):
        with pytest.raises(ValueError, match="needs 5 values"):
            Signal(z5, np.ones(4), 1.0)

    def test_different_groups_rejected(self, z5):
        with pytest.raises(ValueError, match="different groups"):
            Signal.constant(z5) + Signal.constant(FiniteAbelianGroup([6]))


class TestBudget:
    """Test the enumeration budget of the naive evaluator."""

    def test_naive_budget(self, random_signal):
        f = random_signal("Z8", 0)
        with pytest.raises(BudgetExceededError):
            u_norm_naive(f, 3, budget=100)

    def test_degree_must_be_positive(self, z5):
        with pytest.raises(ValueError):
            u_norm_naive(Signal.constant(z5), 0)
        with pytest.raises(ValueError):
            u_norm_recursive(Signal.constant(z5), 1)
