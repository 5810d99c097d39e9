"""
Filtered nilpotent groups with exact rational arithmetic.

Two carriers ship: the abelian vector group Q^m and the Heisenberg group of
unitriangular 3x3 rational matrices, written in coordinates (x, y, z) for
[[1, x, z], [0, 1, y], [0, 0, 1]]. Subgroups in a filtration are coordinate
subgroups: level i is the set of elements whose coordinates outside
``levels[i]`` vanish.
"""
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, FrozenSet, Tuple

import numpy as np

from src.config import MAX_CUBE_DIM, POLY_SAMPLES, POLY_WINDOW
from src.group_cube import Cube, Face, popcount, vertex_bits


class FiltrationError(ValueError):
    """A Taylor coefficient g_i lies outside G_i."""

    def __init__(self, index, element=None):
        self.index = index
        self.element = element
        super().__init__(f"Coefficient g_{index} = {element} is not in filtration level G_{index}")


class CubeMembershipError(ValueError):
    """Face factorization failed at the given face."""

    def __init__(self, face, element=None):
        self.face = face
        self.element = element
        super().__init__(
            f"Face with anchor {face.anchor} (codim {face.codimension}) needs factor {element}, "
            f"which is not in G_{face.codimension}"
        )


def to_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    raise TypeError(f"Refusing inexact coordinate {value!r}; use int, Fraction or 'p/q'")


def binom(n, i):
    """Binomial coefficient for any integer n (negative n allowed), i >= 0."""
    if i < 0:
        return 0
    numerator = 1
    for j in range(i):
        numerator *= n - j
    return numerator // math.factorial(i)


class Carrier:
    """Common interface of the group carriers. Elements are tuples of Fractions."""

    name = "carrier"
    dim = 0

    def element(self, coords):
        coords = tuple(to_fraction(c) for c in coords)
        if len(coords) != self.dim:
            raise ValueError(f"{self.name} elements have {self.dim} coordinates, got {len(coords)}")
        return coords

    def identity(self):
        return (Fraction(0),) * self.dim

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def power(self, a, n):
        raise NotImplementedError

    def commutator(self, a, b):
        return self.mul(self.mul(self.inv(a), self.inv(b)), self.mul(a, b))

    def unit(self, coord):
        return tuple(Fraction(1 if c == coord else 0) for c in range(self.dim))

    def in_lattice(self, a):
        return all(c.denominator == 1 for c in a)

    def reduce(self, a):
        """Returns (rep, gamma) with a = rep * gamma, rep coordinates in [0, 1)."""
        raise NotImplementedError

    def lattice_correction(self, a, free):
        """Lattice element gamma making a * gamma vanish outside ``free``, or None."""
        raise NotImplementedError


class AbelianCarrier(Carrier):
    """Q^m with lattice Z^m."""

    def __init__(self, m=1):
        if m < 1:
            raise ValueError("Abelian carrier needs m >= 1")
        self.dim = m
        self.name = f"abelian:m={m}"

    def __eq__(self, other):
        return isinstance(other, AbelianCarrier) and other.dim == self.dim

    def __hash__(self):
        return hash(self.name)

    def mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inv(self, a):
        return tuple(-x for x in a)

    def power(self, a, n):
        return tuple(n * x for x in a)

    def reduce(self, a):
        gamma = tuple(Fraction(math.floor(x)) for x in a)
        return tuple(x - g for x, g in zip(a, gamma)), gamma

    def lattice_correction(self, a, free):
        gamma = []
        for c, x in enumerate(a):
            if c in free:
                gamma.append(Fraction(0))
            elif x.denominator != 1:
                return None
            else:
                gamma.append(-x)
        return tuple(gamma)


class HeisenbergCarrier(Carrier):
    """Unitriangular 3x3 matrices; lattice = integer entries."""

    dim = 3
    name = "heis"

    def __eq__(self, other):
        return isinstance(other, HeisenbergCarrier)

    def __hash__(self):
        return hash(self.name)

    def mul(self, a, b):
        x, y, z = a
        u, v, w = b
        return (x + u, y + v, z + w + x * v)

    def inv(self, a):
        x, y, z = a
        return (-x, -y, -z + x * y)

    def power(self, a, n):
        x, y, z = a
        return (n * x, n * y, n * z + binom(n, 2) * x * y)

    def matrix(self, a):
        x, y, z = a
        return [[Fraction(1), x, z], [Fraction(0), Fraction(1), y], [Fraction(0), Fraction(0), Fraction(1)]]

    def reduce(self, a):
        # Mal'cev order x -> y -> z: a * gamma^{-1} = (x-p, y-q, z - r + p*q - x*q)
        x, y, z = a
        p = math.floor(x)
        q = math.floor(y)
        z_shift = z + p * q - x * q
        r = math.floor(z_shift)
        rep = (x - p, y - q, z_shift - r)
        gamma = (Fraction(p), Fraction(q), Fraction(r))
        return rep, gamma

    def lattice_correction(self, a, free):
        x, y, z = a
        if (0 not in free and x.denominator != 1) or (1 not in free and y.denominator != 1):
            return None
        p = Fraction(0) if 0 in free else -x
        q = Fraction(0) if 1 in free else -y
        r = Fraction(0)
        if 2 not in free:
            r = -(z + x * q)
            if r.denominator != 1:
                return None
        return (p, q, r)


@dataclass(frozen=True)
class Filtration:
    """G_0 >= G_1 >= ... >= G_{k+1} = {id}; levels[i] = free coordinates of G_i."""

    carrier: Carrier
    levels: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        levels = [frozenset(level) for level in self.levels]
        while levels and not levels[-1]:
            levels.pop()
        for i in range(1, len(levels)):
            if not levels[i] <= levels[i - 1]:
                raise ValueError(f"Filtration is not decreasing at level {i}")
        object.__setattr__(self, "levels", tuple(levels))

    @property
    def degree(self):
        return max(len(self.levels) - 1, 0)

    def level(self, i):
        if i < 0:
            i = 0
        return self.levels[i] if i < len(self.levels) else frozenset()

    def contains(self, g, i):
        free = self.level(i)
        return all(c == 0 for idx, c in enumerate(g) if idx not in free)

    def identity(self):
        return self.carrier.identity()

    def mul(self, a, b):
        return self.carrier.mul(a, b)

    def inv(self, a):
        return self.carrier.inv(a)

    def generators(self, i):
        return [self.carrier.unit(c) for c in sorted(self.level(i))]

    def check_commutators(self):
        """[G_i, G_j] <= G_{i+j} on generator pairs; returns violating (i, j) pairs."""
        violations = []
        top = len(self.levels)
        for i in range(top):
            for j in range(top):
                for a in self.generators(i):
                    for b in self.generators(j):
                        if not self.contains(self.carrier.commutator(a, b), i + j):
                            violations.append((i, j))
        return sorted(set(violations))

    def to_spec(self):
        if isinstance(self.carrier, HeisenbergCarrier) and self.levels == heisenberg_lcs().levels:
            return "heis:lcs"
        if isinstance(self.carrier, AbelianCarrier):
            full = frozenset(range(self.carrier.dim))
            if all(level == full for level in self.levels):
                return f"abelian:m={self.carrier.dim},deg={self.degree}"
        return repr(self.levels)


def abelian_filtration(m, degree):
    full = frozenset(range(m))
    return Filtration(AbelianCarrier(m), tuple(full for _ in range(degree + 1)))


def heisenberg_lcs():
    """Lower central series: G_0 = G_1 = H, G_2 = centre, G_3 = {id}."""
    full = frozenset({0, 1, 2})
    return Filtration(HeisenbergCarrier(), (full, full, frozenset({2})))


def parse_filtration(text):
    """Parses 'abelian:m={m},deg={k}' or 'heis:lcs'."""
    text = text.strip()
    if text == "heis:lcs":
        return heisenberg_lcs()
    match = re.fullmatch(r"abelian:m=(\d+),deg=(\d+)", text)
    if match:
        return abelian_filtration(int(match.group(1)), int(match.group(2)))
    raise ValueError(f"Invalid filtration spec '{text}' (expected 'abelian:m=1,deg=2' or 'heis:lcs')")


def shifted_filtration(filtration, shift):
    """Filtration whose j-th term is G_{j + shift}."""
    if shift < 0:
        raise ValueError("Shift must be >= 0")
    levels = tuple(filtration.level(j + shift) for j in range(len(filtration.levels)))
    return Filtration(filtration.carrier, levels)


@dataclass(frozen=True)
class PolySeq:
    """Polynomial sequence g(n) = g_0 g_1^n g_2^binom(n,2) ... with g_i in G_i."""

    filtration: Filtration
    coefficients: Tuple

    def __post_init__(self):
        carrier = self.filtration.carrier
        coeffs = tuple(carrier.element(c) for c in self.coefficients)
        for i, c in enumerate(coeffs):
            if not self.filtration.contains(c, i):
                raise FiltrationError(i, c)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def carrier(self):
        return self.filtration.carrier

    def __call__(self, n):
        return poly_eval(self, n)

    def to_json(self):
        return [[str(c) for c in coeff] for coeff in self.coefficients]

    @classmethod
    def from_json(cls, filtration, data):
        return cls(filtration, tuple(tuple(to_fraction(c) for c in coeff) for coeff in data))


def poly_eval(g, n):
    carrier = g.carrier
    result = carrier.identity()
    for i, coeff in enumerate(g.coefficients):
        result = carrier.mul(result, carrier.power(coeff, binom(n, i)))
    return result


def taylor_from_values(values, filtration):
    """
    Recovers the unique Taylor coefficients from g(0), ..., g(k).

    Since binom(j, j) = 1, g_j is what remains of g(j) after dividing out
    the contribution of g_0, ..., g_{j-1}.
    """
    carrier = filtration.carrier
    values = [carrier.element(v) for v in values]
    coeffs = []
    for j, value in enumerate(values):
        partial = carrier.identity()
        for i, c in enumerate(coeffs):
            partial = carrier.mul(partial, carrier.power(c, binom(j, i)))
        g_j = carrier.mul(carrier.inv(partial), value)
        if not filtration.contains(g_j, j):
            raise FiltrationError(j, g_j)
        coeffs.append(g_j)
    return PolySeq(filtration, tuple(coeffs))


def _advance(n, h):
    if isinstance(n, tuple):
        return tuple(a + b for a, b in zip(n, h))
    return n + h


def discrete_derivative(seq, h, group):
    """n -> g(n)^{-1} g(n + h)."""
    return lambda n: group.mul(group.inv(seq(n)), seq(_advance(n, h)))


def seq_product(a, b, group):
    return lambda n: group.mul(a(n), b(n))


def seq_inverse(a, group):
    return lambda n: group.inv(a(n))


def _sample_direction(rng, window, domain_dim):
    if domain_dim == 1:
        return int(rng.integers(1, window + 1))
    while True:
        h = tuple(int(c) for c in rng.integers(0, window + 1, size=domain_dim))
        if any(h):
            return h


def is_poly_check(seq, filtration, window=POLY_WINDOW, samples=POLY_SAMPLES, seed=0, domain_dim=1):
    """
    Sampled polynomiality test for a map Z^domain_dim -> G.

    Each sample draws directions h_1, ..., h_{k+1} and a base point n and checks
    that the i-th iterated derivative at n lies in G_i. One-sided: True means
    no counterexample was found.

    Args:
        seq (callable): the map, n -> group element
        filtration: anything exposing mul, inv, contains(g, i) and degree
        window (int): directions are drawn from [1, window]
        samples (int): number of sampled derivative chains
        seed (int): random seed
        domain_dim (int): dimension of the domain lattice

    Returns:
        bool: True if every sampled derivative landed in its level
    """
    if window < filtration.degree + 1:
        raise ValueError(f"Window {window} is smaller than degree + 1 = {filtration.degree + 1}")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        if domain_dim == 1:
            n = int(rng.integers(-window, window + 1))
        else:
            n = tuple(int(c) for c in rng.integers(-window, window + 1, size=domain_dim))
        if not filtration.contains(seq(n), 0):
            return False
        current = seq
        for i in range(1, filtration.degree + 2):
            current = discrete_derivative(current, _sample_direction(rng, window, domain_dim), filtration)
            if not filtration.contains(current(n), i):
                return False
    return True


@dataclass(frozen=True)
class FaceFactorization:
    """q = prod_j g_j^{F_j} in canonical face order, g_j in G_{codim F_j}."""

    filtration: Filtration
    dimension: int
    factors: Tuple[Tuple[Face, Tuple], ...]

    def evaluate(self):
        carrier = self.filtration.carrier
        values = [carrier.identity() for _ in range(2 ** self.dimension)]
        for face, g in self.factors:
            for v in face.vertices():
                values[v] = carrier.mul(values[v], g)
        return Cube(self.dimension, tuple(values))


def upper_face(n, w):
    """The face {v : v >= w} anchored at w; its codimension is |w|."""
    return Face(n, tuple(i for i in range(n) if not (w >> i) & 1), w)


def canonical_face_order(n):
    """Decreasing face dimension, then lexicographic anchor vertex."""
    anchors = sorted(range(2 ** n), key=lambda w: (popcount(w), vertex_bits(w, n)[::-1]))
    return [upper_face(n, w) for w in anchors]


def cube_membership(q, filtration, max_dim=MAX_CUBE_DIM):
    """
    Greedy face peeling of a cube over G.

    At each face in canonical order the residual value at the anchor is the
    forced factor; it must lie in G_{codim}. Returns the FaceFactorization or
    raises CubeMembershipError naming the first violating face.
    """
    if q.dimension > max_dim:
        raise ValueError(f"Cube dimension {q.dimension} exceeds the supported maximum {max_dim}")
    carrier = filtration.carrier
    residual = [carrier.element(v) for v in q.values]
    factors = []
    for face in canonical_face_order(q.dimension):
        g = residual[face.anchor]
        if not filtration.contains(g, face.codimension):
            raise CubeMembershipError(face, g)
        g_inv = carrier.inv(g)
        for v in face.vertices():
            residual[v] = carrier.mul(g_inv, residual[v])
        factors.append((face, g))
    identity = carrier.identity()
    if any(v != identity for v in residual):
        raise CubeMembershipError(factors[-1][0], residual)
    return FaceFactorization(filtration, q.dimension, tuple(factors))


def is_in_cube_group(q, filtration):
    try:
        cube_membership(q, filtration)
    except CubeMembershipError:
        return False
    return True


class CubeFiltration:
    """
    The cube group C^k(G_.) with filtration G~_i = G_i^{[k]} cap C^k(G_.).

    G~_i is tested as membership in the cube group of the shifted filtration.
    """

    def __init__(self, filtration, k):
        self.base = filtration
        self.k = k
        self._shifted = [shifted_filtration(filtration, i) for i in range(filtration.degree + 2)]

    @property
    def degree(self):
        return self.base.degree

    def identity(self):
        return Cube(self.k, tuple(self.base.identity() for _ in range(2 ** self.k)))

    def mul(self, a, b):
        return Cube(self.k, tuple(self.base.mul(x, y) for x, y in zip(a.values, b.values)))

    def inv(self, a):
        return a.map(self.base.inv)

    def contains(self, c, i):
        shifted = self._shifted[i] if i < len(self._shifted) else shifted_filtration(self.base, i)
        return is_in_cube_group(c, shifted)


def g_upper_k(g, k) -> Callable[[Tuple[int, ...]], Cube]:
    """The map (n_0, ..., n_k) -> (g(n_0 + v . (n_1, ..., n_k)))_v."""
    def evaluate(ns):
        n0, steps = ns[0], ns[1:]
        if len(steps) != k:
            raise ValueError(f"g^({k}) takes {k + 1} integers, got {len(ns)}")
        values = []
        for v in range(2 ** k):
            n = n0 + sum(steps[i] for i in range(k) if (v >> i) & 1)
            values.append(poly_eval(g, n))
        return Cube(k, tuple(values))

    return evaluate
