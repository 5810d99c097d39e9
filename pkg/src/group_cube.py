"""
Finite abelian groups, discrete cubes and cube combinatorics.

Vertices of {0,1}^n are stored as integers in binary-little-endian order:
coordinate i of vertex v is bit i of its index, so a 2-cube is laid out as
(00, 10, 01, 11). Every module of the package shares this layout.
"""
import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from src.config import ENUMERATION_BUDGET


class BudgetExceededError(ValueError):
    """Raised when an exhaustive enumeration would exceed the configured budget."""

    def __init__(self, required, budget):
        self.required = required
        self.budget = budget
        super().__init__(f"Enumeration needs {required} items, budget is {budget}")


def popcount(v):
    return bin(v).count("1")


def vertex_bits(v, n):
    """Coordinates of vertex index v as a tuple (v_0, ..., v_{n-1})."""
    return tuple((v >> i) & 1 for i in range(n))


class FiniteAbelianGroup:
    """
    Product of cyclic groups Z_{m_1} x ... x Z_{m_r}.

    Elements are tuples of residues. Canonical element order is the
    row-major order of numpy's ndindex over the shape (m_1, ..., m_r).
    """

    def __init__(self, cyclic_orders):
        orders = tuple(int(m) for m in cyclic_orders)
        if not orders:
            raise ValueError("A group needs at least one cyclic factor")
        if any(m < 1 for m in orders):
            raise ValueError(f"Cyclic orders must be >= 1, got {orders}")
        self.cyclic_orders = orders

    @classmethod
    def parse(cls, text):
        """Parses 'Z5' or 'Z2xZ3'."""
        parts = text.strip().split("x")
        orders = []
        for part in parts:
            match = re.fullmatch(r"Z(\d+)", part.strip())
            if not match:
                raise ValueError(f"Invalid group spec '{text}' (expected e.g. 'Z5' or 'Z2xZ3')")
            orders.append(int(match.group(1)))
        return cls(orders)

    @property
    def shape(self):
        return self.cyclic_orders

    @property
    def order(self):
        return math.prod(self.cyclic_orders)

    @property
    def rank(self):
        return len(self.cyclic_orders)

    def __eq__(self, other):
        return isinstance(other, FiniteAbelianGroup) and self.cyclic_orders == other.cyclic_orders

    def __hash__(self):
        return hash(("FiniteAbelianGroup", self.cyclic_orders))

    def __repr__(self):
        return "x".join(f"Z{m}" for m in self.cyclic_orders)

    def coerce(self, a):
        if isinstance(a, (int, np.integer)):
            a = (int(a),)
        a = tuple(int(c) for c in a)
        if len(a) != self.rank:
            raise ValueError(f"Element {a} does not belong to {self!r}")
        return tuple(c % m for c, m in zip(a, self.cyclic_orders))

    def contains(self, a):
        if isinstance(a, (int, np.integer)):
            a = (int(a),)
        return (
            isinstance(a, tuple)
            and len(a) == self.rank
            and all(isinstance(c, (int, np.integer)) and 0 <= c < m for c, m in zip(a, self.cyclic_orders))
        )

    def zero(self):
        return (0,) * self.rank

    def add(self, a, b):
        return tuple((x + y) % m for x, y, m in zip(a, b, self.cyclic_orders))

    def neg(self, a):
        return tuple((-x) % m for x, m in zip(a, self.cyclic_orders))

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def scale(self, a, n):
        return tuple((n * x) % m for x, m in zip(a, self.cyclic_orders))

    def elements(self):
        return [tuple(int(c) for c in idx) for idx in np.ndindex(*self.cyclic_orders)]

    def index(self, a):
        return int(np.ravel_multi_index(self.coerce(a), self.cyclic_orders))


@dataclass(frozen=True)
class Cube:
    """A map {0,1}^n -> space, stored as 2^n values in vertex order."""

    dimension: int
    values: Tuple

    def __post_init__(self):
        if self.dimension < 0:
            raise ValueError("Cube dimension must be >= 0")
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != 2 ** self.dimension:
            raise ValueError(
                f"A {self.dimension}-cube needs {2 ** self.dimension} values, got {len(self.values)}"
            )

    def __getitem__(self, v):
        return self.values[v]

    def map(self, fn):
        """Vertexwise composition fn o q."""
        return Cube(self.dimension, tuple(fn(x) for x in self.values))

    def to_json(self):
        return [list(x) if isinstance(x, tuple) else x for x in self.values]


@dataclass(frozen=True)
class Face:
    """A face of {0,1}^n: free coordinates plus the anchor (all free bits zero)."""

    n: int
    free: Tuple[int, ...]
    anchor: int

    @property
    def dimension(self):
        return len(self.free)

    @property
    def codimension(self):
        return self.n - len(self.free)

    def vertices(self):
        """Vertex indices of the face, in the face's own vertex order."""
        out = []
        for w in range(2 ** len(self.free)):
            v = self.anchor
            for j, coord in enumerate(self.free):
                if (w >> j) & 1:
                    v |= 1 << coord
            out.append(v)
        return out


def faces(n, m):
    """All m-dimensional faces of {0,1}^n, ordered by free coordinates then anchor."""
    result = []
    for free in itertools.combinations(range(n), m):
        fixed = [i for i in range(n) if i not in free]
        for bits in itertools.product((0, 1), repeat=len(fixed)):
            anchor = sum(b << i for b, i in zip(bits, fixed))
            result.append(Face(n, free, anchor))
    return result


def restrict(q, face):
    return Cube(face.dimension, tuple(q[v] for v in face.vertices()))


def make_parallelepiped(group, x, h):
    """Standard cube q(v) = x + sum_i v_i h_i on a finite abelian group."""
    x = group.coerce(x)
    h = [group.coerce(e) for e in h]
    n = len(h)
    values = []
    for v in range(2 ** n):
        point = x
        for i in range(n):
            if (v >> i) & 1:
                point = group.add(point, h[i])
        values.append(point)
    return Cube(n, tuple(values))


def gray_code(q, group):
    """Alternating vertex sum sum_v (-1)^{|v|} q(v) in an abelian group."""
    total = group.zero()
    for v, value in enumerate(q.values):
        if popcount(v) % 2:
            total = group.add(total, group.neg(value))
        else:
            total = group.add(total, value)
    return total


def is_cube_Dk(q, group, k):
    """Membership in the degree-k cube set: Gray code vanishes on every (k+1)-face."""
    if k < 0:
        raise ValueError("Degree k must be >= 0")
    if q.dimension <= k:
        return True
    zero = group.zero()
    return all(gray_code(restrict(q, face), group) == zero for face in faces(q.dimension, k + 1))


def _half(q, bit):
    """Values of q on the (n-1)-face where coordinate 0 equals bit."""
    return tuple(q[v] for v in range(2 ** q.dimension) if (v & 1) == bit)


def adjacent(q1, q2):
    """True iff q1 and q2 meet along coordinate 0: q1(1, v) = q2(0, v)."""
    if q1.dimension != q2.dimension or q1.dimension == 0:
        return False
    return _half(q1, 1) == _half(q2, 0)


def concatenate(q1, q2):
    """Glue adjacent cubes: q(0, v) = q1(0, v) and q(1, v) = q2(1, v)."""
    if not adjacent(q1, q2):
        raise ValueError("Cubes are not adjacent; cannot concatenate")
    values = [q1[v] if (v & 1) == 0 else q2[v] for v in range(2 ** q1.dimension)]
    return Cube(q1.dimension, tuple(values))


@dataclass(frozen=True)
class CubeAutomorphism:
    """
    theta(v)_j = v_{perm[j]} XOR reflect_j.

    r is the number of reflected coordinates, i.e. |theta(0^n)|.
    """

    permutation: Tuple[int, ...]
    reflection: int = 0

    def __post_init__(self):
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ValueError(f"Not a permutation: {self.permutation}")
        if self.reflection < 0 or self.reflection >= 2 ** len(self.permutation):
            raise ValueError("Reflection mask out of range")

    @property
    def n(self):
        return len(self.permutation)

    @property
    def r(self):
        return popcount(self.reflection)

    def __call__(self, v):
        w = 0
        for j, src in enumerate(self.permutation):
            w |= ((v >> src) & 1) << j
        return w ^ self.reflection


def all_automorphisms(n):
    return [
        CubeAutomorphism(tuple(perm), mask)
        for perm in itertools.permutations(range(n))
        for mask in range(2 ** n)
    ]


def apply_automorphism(q, theta):
    """Returns q o theta."""
    if theta.n != q.dimension:
        raise ValueError(f"Automorphism of {{0,1}}^{theta.n} applied to a {q.dimension}-cube")
    return Cube(q.dimension, tuple(q[theta(v)] for v in range(2 ** q.dimension)))


def enumerate_cubes(group, n, budget=ENUMERATION_BUDGET) -> Iterator[Cube]:
    """Yields all order^(n+1) parallelepipeds (x, h_1, ..., h_n)."""
    required = group.order ** (n + 1)
    if required > budget:
        raise BudgetExceededError(required, budget)
    elements = group.elements()
    for params in itertools.product(elements, repeat=n + 1):
        yield make_parallelepiped(group, params[0], params[1:])


def sample_cube(group, n, seed):
    """Uniform random parallelepiped, deterministic in seed."""
    rng = np.random.default_rng(seed)
    return random_parallelepiped(group, n, rng)


def random_parallelepiped(group, n, rng):
    params = [
        tuple(int(rng.integers(0, m)) for m in group.cyclic_orders)
        for _ in range(n + 1)
    ]
    return make_parallelepiped(group, params[0], params[1:])


def parallelepiped_array(p, n, samples, rng):
    """
    Vectorized parallelepipeds on Z_p.

    Returns an int array of shape (samples, 2^n) with vertex values.
    """
    params = rng.integers(0, p, size=(samples, n + 1))
    bits = np.array([vertex_bits(v, n) for v in range(2 ** n)], dtype=np.int64).reshape(2 ** n, n)
    return (params[:, :1] + params[:, 1:] @ bits.T) % p


def enumerate_morphisms(source, target, degree, budget=ENUMERATION_BUDGET):
    """
    All maps D_1(source) -> D_degree(target), by exhaustive search.

    A map is a morphism iff the Gray code of its image vanishes on every
    (degree+1)-dimensional parallelepiped of the source.

    Returns:
        list: morphisms as tuples of target elements in source element order
    """
    source_elements = source.elements()
    target_elements = target.elements()
    n_maps = target.order ** source.order
    if n_maps * source.order ** (degree + 2) > budget:
        raise BudgetExceededError(n_maps * source.order ** (degree + 2), budget)
    cubes = [
        tuple(source.index(x) for x in q.values)
        for q in enumerate_cubes(source, degree + 1, budget)
    ]
    found = []
    for images in itertools.product(target_elements, repeat=len(source_elements)):
        ok = True
        for idx in cubes:
            image = Cube(degree + 1, tuple(images[i] for i in idx))
            if gray_code(image, target) != target.zero():
                ok = False
                break
        if ok:
            found.append(images)
    return found
