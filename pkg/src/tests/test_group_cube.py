"""
Test suite for finite abelian groups and discrete cube combinatorics.

Tests cover the vertex layout, Gray codes, faces, automorphisms,
concatenation and the brute-force morphism search.
"""
import pytest
import numpy as np

from src.group_cube import (
    BudgetExceededError,
    Cube,
    CubeAutomorphism,
    Face,
    FiniteAbelianGroup,
    adjacent,
    all_automorphisms,
    apply_automorphism,
    concatenate,
    enumerate_cubes,
    enumerate_morphisms,
    faces,
    gray_code,
    is_cube_Dk,
    make_parallelepiped,
    parallelepiped_array,
    restrict,
    sample_cube,
)


class TestFiniteAbelianGroup:
    """Test parsing and arithmetic of Z_m1 x ... x Z_mr."""

    def test_parse_product(self):
        group = FiniteAbelianGroup.parse("Z2xZ3")
        assert group.shape == (2, 3)
        assert group.order == 6
        assert repr(group) == "Z2xZ3"

    @pytest.mark.parametrize("text", ["Z", "5", "Z2*Z3", "Zx"])
    def test_parse_rejects_garbage(self, text):
        with pytest.raises(ValueError, match="Invalid group spec"):
            FiniteAbelianGroup.parse(text)

    def test_element_order_is_row_major(self, z2xz3):
        elements = z2xz3.elements()
        assert elements[:4] == [(0, 0), (0, 1), (0, 2), (1, 0)]
        assert z2xz3.index((1, 2)) == 5

    def test_arithmetic_reduces_mod_orders(self, z2xz3):
        assert z2xz3.coerce((3, -1)) == (1, 2)
        assert z2xz3.add((1, 2), (1, 2)) == (0, 1)
        assert z2xz3.neg((1, 1)) == (1, 2)
        assert z2xz3.scale((1, 1), 4) == (0, 1)

    def test_contains_requires_residues(self, z5):
        assert z5.contains((4,))
        assert z5.contains(3)
        assert not z5.contains((5,))
        assert not z5.contains((1, 1))


class TestCubes:
    """Test parallelepipeds, Gray codes and faces."""

    def test_vertex_layout_is_little_endian(self, z5):
        q = make_parallelepiped(z5, 0, [1, 2])
        assert q.values == ((0,), (1,), (2,), (3,))

    def test_cube_size_is_checked(self):
        with pytest.raises(ValueError):
            Cube(2, (1, 2, 3))

    def test_parallelepiped_gray_code_vanishes(self, z5):
        q = make_parallelepiped(z5, 3, [1, 4])
        assert gray_code(q, z5) == (0,)
        assert is_cube_Dk(q, z5, 1)

    def test_non_parallelepiped_is_only_in_higher_degree(self, z5):
        q = Cube(2, ((0,), (0,), (0,), (1,)))
        assert gray_code(q, z5) == (1,)
        assert not is_cube_Dk(q, z5, 1)
        assert is_cube_Dk(q, z5, 2)

    def test_every_3_cube_of_a_quadratic_passes_degree_2(self, z5):
        for q in enumerate_cubes(z5, 3):
            image = q.map(lambda x: z5.coerce(x[0] * x[0]))
            assert is_cube_Dk(image, z5, 2)

    def test_face_counts(self):
        assert len(faces(3, 2)) == 6
        assert len(faces(3, 0)) == 8
        assert len(faces(3, 3)) == 1

    def test_face_codimension(self):
        face = Face(3, (0, 2), 0)
        assert face.dimension == 2
        assert face.codimension == 1
        assert face.vertices() == [0, 1, 4, 5]

    def test_restrict(self):
        q = Cube(2, ("a", "b", "c", "d"))
        assert restrict(q, Face(2, (1,), 0)).values == ("a", "c")
        assert restrict(q, Face(2, (0,), 2)).values == ("c", "d")


class TestAutomorphisms:
    """Test Aut({0,1}^n) and its action on cubes."""

    @pytest.mark.parametrize("n,count", [(1, 2), (2, 8), (3, 48)])
    def test_group_order(self, n, count):
        assert len(all_automorphisms(n)) == count

    def test_reflection_reverses_an_edge(self, z5):
        q = make_parallelepiped(z5, 1, [2])
        flipped = apply_automorphism(q, CubeAutomorphism((0,), 1))
        assert flipped == make_parallelepiped(z5, 3, [-2])
        assert CubeAutomorphism((0,), 1).r == 1

    def test_permutation_swaps_generators(self, z5):
        q = make_parallelepiped(z5, 0, [1, 2])
        swapped = apply_automorphism(q, CubeAutomorphism((1, 0), 0))
        assert swapped == make_parallelepiped(z5, 0, [2, 1])

    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError):
            CubeAutomorphism((0, 0), 0)

    def test_dimension_mismatch(self, z5):
        with pytest.raises(ValueError):
            apply_automorphism(make_parallelepiped(z5, 0, [1]), CubeAutomorphism((0, 1), 0))


class TestConcatenation:
    """Test gluing adjacent cubes along the first coordinate."""

    def test_parallelepipeds_glue_to_parallelepiped(self, z5):
        q1 = make_parallelepiped(z5, 0, [1, 3])
        q2 = make_parallelepiped(z5, 1, [2, 3])
        assert adjacent(q1, q2)
        assert concatenate(q1, q2) == make_parallelepiped(z5, 0, [3, 3])

    def test_non_adjacent_raises(self, z5):
        q1 = make_parallelepiped(z5, 0, [1, 3])
        q2 = make_parallelepiped(z5, 2, [2, 3])
        assert not adjacent(q1, q2)
        with pytest.raises(ValueError, match="not adjacent"):
            concatenate(q1, q2)


class TestEnumeration:
    """Test cube enumeration, sampling and budgets."""

    def test_enumeration_count(self, z5):
        assert sum(1 for _ in enumerate_cubes(z5, 2)) == 125

    def test_budget_exceeded(self, z5):
        with pytest.raises(BudgetExceededError) as excinfo:
            list(enumerate_cubes(z5, 2, budget=100))
        assert excinfo.value.required == 125
        assert excinfo.value.budget == 100

    def test_sampling_is_deterministic(self, z2xz3):
        assert sample_cube(z2xz3, 3, seed=7) == sample_cube(z2xz3, 3, seed=7)

    def test_parallelepiped_array(self, rng):
        cubes = parallelepiped_array(7, 2, 50, rng)
        assert cubes.shape == (50, 4)
        assert np.all((cubes[:, 3] - cubes[:, 1] - cubes[:, 2] + cubes[:, 0]) % 7 == 0)


class TestMorphismSearch:
    """Test the exhaustive search for maps D_1(X) -> D_k(Y)."""

    def test_coprime_orders_give_only_constants(self):
        found = enumerate_morphisms(FiniteAbelianGroup([3]), FiniteAbelianGroup([2]), 2)
        assert len(found) == 2
        assert all(len(set(m)) == 1 for m in found)

    def test_z4_to_z3_degree_1(self):
        found = enumerate_morphisms(FiniteAbelianGroup([4]), FiniteAbelianGroup([3]), 1)
        assert len(found) == 3

    def test_affine_maps_on_z5(self, z5):
        # x -> a x + b
        assert len(enumerate_morphisms(z5, z5, 1)) == 25

    def test_budget_is_enforced(self, z5):
        with pytest.raises(BudgetExceededError):
            enumerate_morphisms(z5, z5, 2, budget=1000)
