"""
Test suite for coset nilmanifolds, nilsequences and the polynomial lift.
"""
import pytest
import warnings
from fractions import Fraction

import numpy as np

from src.filtered_groups import (
    AbelianCarrier,
    HeisenbergCarrier,
    PolySeq,
    abelian_filtration,
    poly_eval,
)
from src.gowers import Signal, l2_norm, u_norm
from src.group_cube import FiniteAbelianGroup
from src.nilmanifold import (
    LiftError,
    Nilsequence,
    NilPoint,
    OutputFunction,
    PeriodMismatchError,
    check_lipschitz,
    correlate,
    inverse_demo,
    is_p_periodic,
    lift_morphism,
    morphism_check,
    nilsequence_eval,
    nilsequence_table,
    reduce_mod_gamma,
)


def square_over_5():
    """g(n) = n^2 / 5 in Taylor form (0, 1/5, 2/5)."""
    return PolySeq(abelian_filtration(1, 2), ((0,), ("1/5",), ("2/5",)))


def matched_nilsequence(period=5):
    return Nilsequence(square_over_5(), OutputFunction("e(t)", AbelianCarrier(1)), period=period)


def projected(g, N):
    return [reduce_mod_gamma(poly_eval(g, n), g.carrier)[0] for n in range(N)]


def random_heisenberg_table(seed, N=7):
    rng = np.random.default_rng(seed)
    xy = rng.integers(0, N, size=(N, 2))
    z = rng.integers(0, N * N, size=N)
    return [(Fraction(int(a), N), Fraction(int(b), N), Fraction(int(c), N * N)) for (a, b), c in zip(xy, z)]


def perturbed_instance(periodic_poly, heis, p, seed):
    """
    Seeded p-periodic sequence, or one whose period-p quotient leaves Gamma.

    Returns (g, expected periodicity). An x-shift of 1/(2p) in g_1 moves the
    quotient's x by 1/2, and a central twist 1/p^2 in g_2 moves its z by
    n/p + (p-1)/(2p).
    """
    mode = seed % 6
    half = Fraction(1, 2 * p)
    if mode == 0:
        return periodic_poly("heis", p, seed), True
    if mode == 1:
        return periodic_poly("abelian", p, seed, degree=1 + seed % 3), True
    if mode == 4:
        b = 1 + seed % (p - 1)
        return PolySeq(heis, ((0, 0, 0), (Fraction(1, p), Fraction(b, p), 0), (0, 0, 0))), False
    if mode == 5:
        g = periodic_poly("abelian", p, seed, degree=1 + seed % 3)
        coeffs = list(g.coefficients)
        coeffs[1] = (coeffs[1][0] + half,)
        return PolySeq(g.filtration, tuple(coeffs)), False
    g = periodic_poly("heis", p, seed)
    coeffs = list(g.coefficients)
    if mode == 2:
        coeffs[1] = heis.carrier.mul(coeffs[1], (half, Fraction(0), Fraction(0)))
    else:
        coeffs[2] = heis.carrier.mul(coeffs[2], (Fraction(0), Fraction(0), Fraction(1, p * p)))
    return PolySeq(heis, tuple(coeffs)), False


class TestReduction:
    """Test reduction to the fundamental domain."""

    def test_identity(self):
        point, gamma = reduce_mod_gamma((0, 0, 0), HeisenbergCarrier())
        assert point.coords == (0, 0, 0)
        assert gamma == (0, 0, 0)

    def test_abelian(self):
        point, gamma = reduce_mod_gamma((Fraction(7, 5),), AbelianCarrier(1))
        assert point.coords == (Fraction(2, 5),)
        assert gamma == (Fraction(1),)

    def test_heisenberg(self):
        carrier = HeisenbergCarrier()
        g = (Fraction(3, 2), Fraction(1), Fraction(5, 4))
        point, gamma = reduce_mod_gamma(g, carrier)
        assert point.coords == (Fraction(1, 2), Fraction(0), Fraction(3, 4))
        assert gamma == (1, 1, 0)
        assert carrier.mul(point.coords, gamma) == g

    @pytest.mark.parametrize("carrier", [AbelianCarrier(2), HeisenbergCarrier()])
    def test_idempotent_and_right_invariant(self, carrier, rng):
        for _ in range(1000):
            g = tuple(Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 12))) for _ in range(carrier.dim))
            gamma = tuple(Fraction(int(rng.integers(-4, 5))) for _ in range(carrier.dim))
            point, _ = reduce_mod_gamma(g, carrier)
            assert all(0 <= c < 1 for c in point.coords)
            assert reduce_mod_gamma(point.coords, carrier)[0] == point
            assert reduce_mod_gamma(carrier.mul(g, gamma), carrier)[0] == point


class TestPeriodicity:
    """Test the window and exact p-periodicity tests."""

    def test_square_over_5(self):
        assert is_p_periodic(square_over_5(), 5, window=5)
        assert not is_p_periodic(square_over_5(), 3, window=5)

    def test_constant(self, heis):
        g = PolySeq(heis, (("1/3", "1/2", "1/7"), (0, 0, 0), (0, 0, 0)))
        assert is_p_periodic(g, 4, window=4)

    def test_window_too_small_is_detected(self):
        # g(n+1) - g(n) = binom(n, 2) / 2 is an integer at n = 0 only
        g = PolySeq(abelian_filtration(1, 3), ((0,), (0,), (0,), ("1/2",)))
        with pytest.raises(ValueError, match="too small"):
            is_p_periodic(g, 1, window=0)

    @pytest.mark.parametrize("seed", range(20))
    def test_generated_sequences_are_periodic(self, periodic_poly, seed):
        assert is_p_periodic(periodic_poly("abelian", 7, seed, degree=3), 7, window=7)
        assert is_p_periodic(periodic_poly("heis", 7, seed), 7, window=7)

    @pytest.mark.parametrize("seed", range(200))
    def test_mixed_instances(self, periodic_poly, heis, seed):
        p = (5, 7, 11, 31)[(seed // 6) % 4]
        g, expected = perturbed_instance(periodic_poly, heis, p, seed)
        assert is_p_periodic(g, p, window=p) == expected

    def test_invalid_period(self):
        with pytest.raises(ValueError):
            is_p_periodic(square_over_5(), 0, window=3)


class TestOutputFunction:
    """Test the closed-form output function language."""

    def test_constant_one(self):
        F = OutputFunction("1", AbelianCarrier(1))
        assert F(0.3) == 1

    def test_sup_bound_enforced(self):
        with pytest.raises(ValueError, match="sup-bound"):
            OutputFunction("2*e(t)", AbelianCarrier(1))
        assert OutputFunction("e(t)/2 + tent(t)/2", AbelianCarrier(1)).sup_bound == pytest.approx(1.0)

    def test_unknown_symbol(self):
        with pytest.raises(ValueError, match="Unknown symbols"):
            OutputFunction("e(q)", AbelianCarrier(1))

    def test_torus_coordinates(self):
        F = OutputFunction("e(t1 + t2)", AbelianCarrier(2))
        assert F(0.125, 0.125) == pytest.approx(1j)

    def test_vectorized(self):
        F = OutputFunction("tent(t)", AbelianCarrier(1))
        assert np.allclose(F(np.array([0.0, 0.25, 0.5])), [0.0, 0.5, 1.0])


class TestNilsequence:
    """Test evaluation, tables and correlation."""

    def test_constant_F(self):
        ns = Nilsequence(square_over_5(), OutputFunction("1", AbelianCarrier(1)))
        assert all(nilsequence_eval(ns, n) == 1 for n in range(6))

    def test_quadratic_torus(self):
        ns = matched_nilsequence()
        for n in range(-3, 8):
            assert nilsequence_eval(ns, n) == pytest.approx(np.exp(2j * np.pi * ((n * n) % 5) / 5))

    def test_heisenberg_bump(self, heis):
        g = PolySeq(heis, ((0, 0, 0), ("1/3", "1/4", 0), (0, 0, "1/2")))
        assert poly_eval(g, 2) == (Fraction(2, 3), Fraction(1, 2), Fraction(7, 12))
        ns = Nilsequence(g, OutputFunction("e(z)*tent(x)*tent(y)", heis.carrier))
        assert nilsequence_eval(ns, 2) == pytest.approx((2 / 3) * np.exp(2j * np.pi * 7 / 12))

    def test_table_matches_pointwise(self, periodic_poly):
        g = periodic_poly("heis", 11, 3)
        ns = Nilsequence(g, OutputFunction("e(x + z)", g.carrier), period=11)
        table = nilsequence_table(ns, 11)
        assert np.allclose(table, [nilsequence_eval(ns, n) for n in range(11)])

    def test_spec_round_trip(self):
        ns = Nilsequence(square_over_5(), OutputFunction("e(t)", AbelianCarrier(1)), period=5, lipschitz=7.0)
        again = Nilsequence.from_spec(ns.to_spec())
        assert again.poly == ns.poly
        assert again.to_spec() == ns.to_spec()

    def test_matched_correlation_is_one(self, z5):
        value = correlate(Signal.quadratic_phase(z5, 1), matched_nilsequence())
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_linear_against_quadratic(self, z5):
        f = Signal.character(z5, 1)
        x = np.arange(5)
        expected = np.mean(np.exp(2j * np.pi * x / 5) * np.conj(np.exp(2j * np.pi * x * x / 5)))
        assert correlate(f, matched_nilsequence()) == pytest.approx(expected, abs=1e-12)

    def test_random_sign_is_bounded(self):
        group = FiniteAbelianGroup([31])
        signs = np.random.default_rng(0).choice([-1.0, 1.0], size=31)
        ns = Nilsequence(
            PolySeq(abelian_filtration(1, 2), ((0,), ("1/31",), ("2/31",))),
            OutputFunction("e(t)", AbelianCarrier(1)),
            period=31,
        )
        assert abs(correlate(Signal(group, signs, 1.0), ns)) <= 1.0

    def test_period_mismatch(self):
        f = Signal.constant(FiniteAbelianGroup([7]))
        with pytest.warns(UserWarning, match="period"):
            correlate(f, matched_nilsequence())
        with pytest.raises(PeriodMismatchError):
            correlate(f, matched_nilsequence(), strict=True)

    def test_chain_for_self_correlation(self, periodic_poly):
        g = periodic_poly("abelian", 13, 5, degree=2)
        ns = Nilsequence(g, OutputFunction("e(t)/2 + tent(t)/2", g.carrier), period=13)
        group = FiniteAbelianGroup([13])
        f = Signal(group, nilsequence_table(ns, 13), 1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            value = correlate(f, ns)
        assert value.real == pytest.approx(l2_norm(f) ** 2, abs=1e-12)
        assert value.real >= u_norm(f, 3) ** 8 - 1e-9

    def test_lipschitz_spot_check(self):
        ns = Nilsequence(square_over_5(), OutputFunction("e(t)", AbelianCarrier(1)), lipschitz=2 * np.pi + 0.01)
        report = check_lipschitz(ns, samples=500, seed=1)
        assert report["ok"] is True
        assert 6.0 < report["max_ratio"] < 2 * np.pi + 1e-3
        tight = Nilsequence(ns.poly, ns.F, lipschitz=1.0)
        assert check_lipschitz(tight, samples=500, seed=1)["ok"] is False


class TestLift:
    """Test the layer-by-layer polynomial lift of morphisms Z_N -> G/Gamma."""

    def test_square_over_5(self):
        table = projected(square_over_5(), 5)
        g = lift_morphism(table, 5, abelian_filtration(1, 2))
        assert projected(g, 10) == [table[n % 5] for n in range(10)]

    def test_constant(self, heis):
        point = NilPoint((Fraction(1, 3), Fraction(1, 2), Fraction(1, 7)))
        g = lift_morphism(lambda n: point, 6, heis)
        assert g.coefficients[1] == (0, 0, 0)
        assert g.coefficients[2] == (0, 0, 0)

    @pytest.mark.parametrize("p", [5, 7, 31])
    @pytest.mark.parametrize("seed", range(34))
    def test_round_trip(self, periodic_poly, p, seed):
        for kind, degree in (("heis", 2), ("abelian", 1 + seed % 3)):
            source = periodic_poly(kind, p, seed, degree=degree)
            table = projected(source, p)
            g = lift_morphism(table, p, source.filtration)
            assert projected(g, 2 * p) == [table[n % p] for n in range(2 * p)]
            assert is_p_periodic(g, p, window=p)

    def test_non_morphism_fails(self):
        rng = np.random.default_rng(7)
        table = [(Fraction(int(v), 97),) for v in rng.integers(0, 97, size=7)]
        with pytest.raises(LiftError) as excinfo:
            lift_morphism(table, 7, abelian_filtration(1, 2))
        assert excinfo.value.level == 2

    @pytest.mark.parametrize("seed", range(100))
    def test_random_heisenberg_map_fails(self, heis, seed):
        with pytest.raises(LiftError):
            lift_morphism(random_heisenberg_table(seed), 7, heis)


class TestMorphismCheck:
    """Test the sampled cube-lifting test."""

    def test_polynomial_orbits_pass(self, periodic_poly, heis):
        g = periodic_poly("heis", 7, 1)
        assert morphism_check(projected(g, 7), 7, heis, n_dim=3, seed=0)
        a = periodic_poly("abelian", 7, 1, degree=2)
        assert morphism_check(projected(a, 7), 7, a.filtration, n_dim=3, seed=0)

    def test_constant_passes(self, heis):
        point = (Fraction(1, 2), Fraction(0), Fraction(1, 3))
        assert morphism_check([point] * 5, 5, heis, n_dim=2, seed=0)

    def test_random_maps_fail(self):
        failures = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            table = [(Fraction(int(v), 97),) for v in rng.integers(0, 97, size=7)]
            if not morphism_check(table, 7, abelian_filtration(1, 2), n_dim=3, seed=seed):
                failures += 1
        assert failures >= 99

    def test_random_heisenberg_maps_fail(self, heis):
        failures = sum(
            1 for seed in range(100)
            if not morphism_check(random_heisenberg_table(seed), 7, heis, n_dim=3, seed=seed)
        )
        assert failures >= 99

    def test_dimension_limit(self, heis):
        with pytest.raises(ValueError):
            morphism_check([(0, 0, 0)] * 3, 3, heis, n_dim=4)


class TestInverseDemo:
    """Test the matched quadratic nilsequence demonstration."""

    def test_matched(self):
        report = inverse_demo(31, seed=42)
        assert report["correlation"] == pytest.approx(1.0, abs=1e-9)
        assert report["u3_norm"] == pytest.approx(1.0, abs=1e-9)
        assert report["bound_holds"]
        assert report["chain_holds"]

    def test_modulated(self):
        report = inverse_demo(31, seed=42, modulated=True)
        assert 0.5 <= report["correlation"] <= 1.0
        assert report["u3_norm"] < 1.0
        assert report["bound_holds"]
        assert report["chain_holds"]

    def test_deterministic(self):
        assert inverse_demo(13, seed=3) == inverse_demo(13, seed=3)
