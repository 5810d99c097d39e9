"""
Finite probability spaces with partition sigma-algebras.

All measures are exact Fractions and points are 0-based indices. The
square-root thresholds of the approximation lemmas are compared by raising
both sides to a power, so no comparison goes through floating point.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.config import N_JOBS, RANDOM_STATE


@dataclass(frozen=True)
class FiniteProbSpace:
    weights: Tuple[Fraction, ...]

    def __post_init__(self):
        weights = tuple(Fraction(w) for w in self.weights)
        if not weights:
            raise ValueError("A probability space needs at least one point")
        if any(w < 0 for w in weights):
            raise ValueError("Weights must be nonnegative")
        if sum(weights) != 1:
            raise ValueError(f"Weights must sum to exactly 1, got {sum(weights)}")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, size):
        return cls(tuple(Fraction(1, size) for _ in range(size)))

    @property
    def size(self):
        return len(self.weights)

    def measure(self, subset):
        return sum((self.weights[x] for x in subset), Fraction(0))

    def null(self, x):
        return self.weights[x] == 0


@dataclass(frozen=True)
class PartitionSigma:
    blocks: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        blocks = tuple(sorted((frozenset(b) for b in self.blocks if b), key=min))
        seen = set()
        for block in blocks:
            if seen & block:
                raise ValueError("Partition blocks overlap")
            seen |= block
        if seen != set(range(len(seen))):
            raise ValueError("Partition blocks must cover the points 0..M-1")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def finest(cls, size):
        return cls(tuple(frozenset({x}) for x in range(size)))

    @classmethod
    def coarsest(cls, size):
        return cls((frozenset(range(size)),))

    @classmethod
    def from_labels(cls, labels):
        groups = {}
        for x, label in enumerate(labels):
            groups.setdefault(label, set()).add(x)
        return cls(tuple(frozenset(g) for g in groups.values()))

    @property
    def size(self):
        return sum(len(b) for b in self.blocks)

    def block_of(self, x):
        for block in self.blocks:
            if x in block:
                return block
        raise ValueError(f"Point {x} is not covered by the partition")


def _check_sizes(space, *partitions):
    for P in partitions:
        if P.size != space.size:
            raise ValueError(f"Partition covers {P.size} points, space has {space.size}")


def indicator(subset, size):
    return [Fraction(1) if x in subset else Fraction(0) for x in range(size)]


def cond_expect(f, P, space):
    """Block-wise weighted average; blocks of weight 0 get value 0."""
    _check_sizes(space, P)
    out = [Fraction(0)] * space.size
    for block in P.blocks:
        mass = space.measure(block)
        value = sum((space.weights[x] * f[x] for x in block), Fraction(0)) / mass if mass else Fraction(0)
        for x in block:
            out[x] = value
    return out


def meet(P0, P1, space):
    """
    Connected components of the block-overlap graph on positive-weight
    overlaps. Null points join the component of the first positive-weight point.
    """
    _check_sizes(space, P0, P1)
    parent = list(range(space.size))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for P in (P0, P1):
        for block in P.blocks:
            positive = [x for x in sorted(block) if not space.null(x)]
            for x in positive[1:]:
                union(positive[0], x)

    positive_points = [x for x in range(space.size) if not space.null(x)]
    anchor = positive_points[0]
    for x in range(space.size):
        if space.null(x):
            union(anchor, x)

    components = {}
    for x in range(space.size):
        components.setdefault(find(x), set()).add(x)
    return PartitionSigma(tuple(frozenset(c) for c in components.values()))


def is_measurable(values, P, space):
    """True iff values are constant on every block up to null points."""
    for block in P.blocks:
        seen = {values[x] for x in block if not space.null(x)}
        if len(seen) > 1:
            return False
    return True


def is_measurable_set(subset, P, space):
    return is_measurable(indicator(subset, space.size), P, space)


def check_cond_independence(P0, P1, space):
    """E(1_B | P1) is P0-measurable for every block B of P0."""
    _check_sizes(space, P0, P1)
    return all(
        is_measurable(cond_expect(indicator(block, space.size), P1, space), P0, space)
        for block in P0.blocks
    )


def symmetric_difference(a, b):
    return frozenset(a) ^ frozenset(b)


def _l2_squared(f, g, space):
    return sum((w * (a - b) ** 2 for w, a, b in zip(space.weights, f, g)), Fraction(0))


@dataclass
class LemmaReport:
    subset: FrozenSet[int]
    precondition: bool
    bound_holds: Optional[bool]
    symmetric_difference: Fraction
    details: dict = field(default_factory=dict)
    can_fail: bool = False

    @property
    def violation(self):
        return self.precondition and (
            self.bound_holds is False or self.details.get("measurable") is False
            or self.details.get("invariant") is False
        )

    def to_json(self):
        return {
            "subset": sorted(self.subset),
            "precondition": self.precondition,
            "bound_holds": self.bound_holds,
            "symmetric_difference": str(self.symmetric_difference),
            "details": {k: str(v) if isinstance(v, Fraction) else v for k, v in self.details.items()},
            "can_fail": self.can_fail,
        }


def level_set_approx(S, P, space, eps):
    """
    S' = {E(1_S | P) > eps^{1/2}}.

    When ||1_S - E(1_S | P)||_2 <= eps the report asserts
    lambda(S delta S') < 5 eps^{1/2}; otherwise bound_holds is None.
    """
    eps = Fraction(eps)
    one_s = indicator(S, space.size)
    e = cond_expect(one_s, P, space)
    precondition = _l2_squared(one_s, e, space) <= eps ** 2
    S_prime = frozenset(x for x in range(space.size) if e[x] > 0 and e[x] ** 2 > eps)
    delta = space.measure(symmetric_difference(S, S_prime))
    bound = delta ** 2 < 25 * eps if precondition else None
    can_fail = precondition and delta > 0 and 25 * eps < 1
    return LemmaReport(S_prime, precondition, bound, delta, can_fail=can_fail)


def ci_intersection_approx(S0, S1, P0, P1, space, eps):
    """
    C = {E(1_{S0} | P1) > (2 eps^{1/2})^{1/2}}.

    Under conditional independence, S_i in P_i and lambda(S0 delta S1) <= eps,
    asserts C is meet-measurable and lambda(C delta S_i) <= 10 eps^{1/4}.
    """
    eps = Fraction(eps)
    problems = []
    if not check_cond_independence(P0, P1, space):
        problems.append("P0 and P1 are not conditionally independent")
    if not is_measurable_set(S0, P0, space):
        problems.append("S0 is not P0-measurable")
    if not is_measurable_set(S1, P1, space):
        problems.append("S1 is not P1-measurable")
    if space.measure(symmetric_difference(S0, S1)) > eps:
        problems.append("lambda(S0 delta S1) exceeds eps")

    e = cond_expect(indicator(S0, space.size), P1, space)
    C = frozenset(x for x in range(space.size) if e[x] > 0 and e[x] ** 4 > 4 * eps)
    delta0 = space.measure(symmetric_difference(C, S0))
    delta1 = space.measure(symmetric_difference(C, S1))
    precondition = not problems
    details = {"delta_S1": delta1, "problems": problems}
    if precondition:
        details["measurable"] = is_measurable_set(C, meet(P0, P1, space), space)
        bound = delta0 ** 4 <= 10 ** 4 * eps and delta1 ** 4 <= 10 ** 4 * eps
    else:
        bound = None
    can_fail = precondition and (delta0 > 0 or delta1 > 0) and 10 ** 4 * eps < 1
    return LemmaReport(C, precondition, bound, delta0, details, can_fail)


def _apply(g, subset):
    return frozenset(g[x] for x in subset)


def invariant_approx(S, action, space, eps):
    """
    S' = {E_{g in G} 1_{gS} > eps^{1/4}} for a finite group of permutations.

    Raises:
        ValueError: if some permutation does not preserve the weights
    """
    eps = Fraction(eps)
    action = [tuple(g) for g in action]
    for g in action:
        if sorted(g) != list(range(space.size)):
            raise ValueError(f"{g} is not a permutation of the points")
        if any(space.weights[g[x]] != space.weights[x] for x in range(space.size)):
            raise ValueError(f"Action by {g} is not measure-preserving")
    worst = max(space.measure(symmetric_difference(S, _apply(g, S))) for g in action)
    precondition = worst <= eps

    h = [Fraction(sum(1 for g in action if x in _apply(g, S)), len(action)) for x in range(space.size)]
    S_prime = frozenset(x for x in range(space.size) if h[x] > 0 and h[x] ** 4 > eps)
    delta = space.measure(symmetric_difference(S, S_prime))
    invariant = all(space.measure(symmetric_difference(S_prime, _apply(g, S_prime))) == 0 for g in action)
    details = {"invariant": invariant, "max_shift": worst}
    bound = delta ** 4 <= 625 * eps if precondition else None
    can_fail = precondition and delta > 0 and 625 * eps < 1
    return LemmaReport(S_prime, precondition, bound, delta, details, can_fail)


def _random_weights(rng, size, allow_null=True):
    raw = [int(v) for v in rng.integers(1, 10, size=size)]
    if allow_null and size > 1:
        for x in range(size):
            if rng.random() < 0.1:
                raw[x] = 0
        if not any(raw):
            raw[0] = 1
    total = sum(raw)
    return tuple(Fraction(v, total) for v in raw)


def _upper_sqrt(r):
    """Smallest Fraction of the form (isqrt(nd) + 1) / d whose square exceeds r."""
    return Fraction(math.isqrt(r.numerator * r.denominator) + 1, r.denominator)


def generate_level_set_instance(rng):
    """
    Near-measurable S against a random partition.

    Every other instance puts its flipped points on light weights, which keeps
    eps below 1/25 while the flipped points still land in S delta S'.
    """
    light = rng.random() < 0.5
    if light:
        size = int(rng.integers(16, 65))
        labels = rng.integers(0, int(rng.integers(1, 5)), size=size)
    else:
        size = int(rng.integers(1, 65))
        labels = rng.integers(0, max(1, size // int(rng.integers(1, 5))), size=size)
    P = PartitionSigma.from_labels([int(v) for v in labels])
    chosen = [b for b in P.blocks if rng.random() < 0.5]
    S = set().union(*chosen) if chosen else set()
    if light:
        flips = {int(x) for x in rng.choice(size, size=int(rng.integers(1, 3)), replace=False)}
        raw = [1 if x in flips else int(rng.integers(200, 400)) for x in range(size)]
        space = FiniteProbSpace(tuple(Fraction(v, sum(raw)) for v in raw))
    else:
        space = FiniteProbSpace(_random_weights(rng, size))
        flips = {x for x in range(size) if rng.random() < 0.05}
    S ^= flips
    one_s = indicator(S, size)
    l2_sq = _l2_squared(one_s, cond_expect(one_s, P, space), space)
    eps = _upper_sqrt(l2_sq) * Fraction(int(rng.integers(100, 200)), 100)
    return frozenset(S), P, space, eps


def generate_ci_instance(rng):
    """
    Disjoint union of product blocks A_i x B_i with product weights.

    In light instances the first point of A_0 is a P0 block of its own with
    relative weight below 1e-4, and S0 differs from S1 by exactly that block.
    """
    light = rng.random() < 0.5
    points = 0
    labels0, labels1, meet_labels = [], [], []
    weights = []
    for i in range(int(rng.integers(1, 4))):
        a, b = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        if light and i == 0:
            a = max(a, 2)
            wa = [1] + [int(v) for v in rng.integers(10 ** 4, 2 * 10 ** 4, size=a - 1)]
            part_a = [a] + [int(v) for v in rng.integers(0, a, size=a - 1)]
        else:
            wa = [int(v) for v in rng.integers(1, 5, size=a)]
            part_a = [int(v) for v in rng.integers(0, a, size=a)]
        wb = [int(v) for v in rng.integers(1, 5, size=b)]
        block_mass = int(rng.integers(1, 5))
        part_b = [int(v) for v in rng.integers(0, b, size=b)]
        for s in range(a):
            for t in range(b):
                weights.append(Fraction(block_mass * wa[s] * wb[t], sum(wa) * sum(wb)))
                labels0.append((i, part_a[s]))
                labels1.append((i, part_b[t]))
                meet_labels.append(i)
                points += 1
    total = sum(weights)
    space = FiniteProbSpace(tuple(w / total for w in weights))
    P0 = PartitionSigma.from_labels(labels0)
    P1 = PartitionSigma.from_labels(labels1)

    core = {i for i in set(meet_labels) if rng.random() < 0.5}
    base = {x for x in range(points) if meet_labels[x] in core}
    S0, S1 = set(base), set(base)
    if light:
        S0 ^= set(P0.block_of(0))
    else:
        for block in P0.blocks:
            if rng.random() < 0.2:
                S0 ^= set(block)
        for block in P1.blocks:
            if rng.random() < 0.2:
                S1 ^= set(block)
    eps = space.measure(symmetric_difference(S0, S1))
    if eps == 0:
        eps = Fraction(1, 10 ** 6)
    return frozenset(S0), frozenset(S1), P0, P1, space, eps


def generate_invariant_instance(rng):
    """
    Cyclic group generated by a permutation whose cycle lengths divide c.

    Light instances open with a full cycle of weight 1 among cycles of weight
    500 to 1000, and flip a single point of that cycle.
    """
    light = rng.random() < 0.5
    c = int(rng.integers(2 if light else 1, 9))
    divisors = [d for d in range(1, c + 1) if c % d == 0]
    cycles = []
    size = 0
    target = int(rng.integers(c + 8, 33)) if light else int(rng.integers(1, 33))
    if light:
        cycles.append(list(range(c)))
        size = c
    while size < target:
        length = min(int(rng.choice(divisors)), 32 - size)
        if c % length:
            length = 1
        cycle = list(range(size, size + length))
        cycles.append(cycle)
        size += length
    perm = list(range(size))
    for cycle in cycles:
        for j, x in enumerate(cycle):
            perm[x] = cycle[(j + 1) % len(cycle)]
    action = []
    g = list(range(size))
    for _ in range(c):
        action.append(tuple(g))
        g = [perm[x] for x in g]

    raw = [0] * size
    for k, cycle in enumerate(cycles):
        if light:
            w = 1 if k == 0 else int(rng.integers(500, 1000))
        else:
            w = int(rng.integers(1, 6))
        for x in cycle:
            raw[x] = w
    total = sum(raw)
    space = FiniteProbSpace(tuple(Fraction(w, total) for w in raw))

    S = set()
    for cycle in cycles:
        if rng.random() < 0.5:
            S |= set(cycle)
    if light:
        S ^= {int(rng.integers(0, c))}
    else:
        for x in range(size):
            if rng.random() < 0.05:
                S ^= {x}
    eps = max(space.measure(symmetric_difference(S, _apply(g, S))) for g in action)
    if eps == 0:
        eps = Fraction(1, 10 ** 6)
    return frozenset(S), action, space, eps


def _run_instance(lemma, seed):
    rng = np.random.default_rng(seed)
    if lemma == "B1":
        S, P, space, eps = generate_level_set_instance(rng)
        return level_set_approx(S, P, space, eps)
    if lemma == "B2":
        S0, S1, P0, P1, space, eps = generate_ci_instance(rng)
        return ci_intersection_approx(S0, S1, P0, P1, space, eps)
    if lemma == "B3":
        S, action, space, eps = generate_invariant_instance(rng)
        return invariant_approx(S, action, space, eps)
    raise ValueError(f"Unknown lemma '{lemma}' (expected B1, B2 or B3)")


def run_suite(lemma, seed=RANDOM_STATE, instances=1000, n_jobs=N_JOBS):
    """
    Runs seeded random instances of one approximation lemma.

    Returns:
        dict: lemma, instances, precondition_held, can_fail (instances whose
        bound is below 1 with a nonempty symmetric difference) and the
        violating reports
    """
    children = np.random.SeedSequence(seed).spawn(instances)
    seeds = [int(child.generate_state(1)[0]) for child in children]
    reports: List[LemmaReport] = Parallel(n_jobs=n_jobs)(
        delayed(_run_instance)(lemma, s) for s in seeds
    )
    violations = [dict(r.to_json(), instance=i) for i, r in enumerate(reports) if r.violation]
    return {
        "lemma": lemma,
        "instances": instances,
        "precondition_held": sum(1 for r in reports if r.precondition),
        "can_fail": sum(1 for r in reports if r.can_fail),
        "violations": violations,
    }
