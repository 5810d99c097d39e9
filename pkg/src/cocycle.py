"""
Degree-k cocycles on finite abelian groups with their standard cube structure.

A cocycle assigns a value in an abelian target to every (k+1)-dimensional
parallelepiped; it must flip sign under reflections and add up under
concatenation along the first coordinate.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed

from src.config import DEFECT_SAMPLES, ENUMERATION_BUDGET, N_JOBS, RANDOM_STATE
from src.group_cube import (
    Cube,
    _half,
    all_automorphisms,
    apply_automorphism,
    concatenate,
    enumerate_cubes,
    gray_code,
    make_parallelepiped,
    random_parallelepiped,
)

# Values within this distance count as equal (float-valued maps)
EQUALITY_TOLERANCE = 1e-12


class CircleTarget:
    """R/Z with d(s, t) = distance from s - t to the nearest integer."""

    name = "circle"

    def zero(self):
        return Fraction(0)

    def add(self, a, b):
        return (a + b) % 1

    def neg(self, a):
        return (-a) % 1

    def normalize(self, a):
        return a % 1

    def distance(self, a, b):
        d = float((a - b) % 1)
        return min(d, 1.0 - d)


class CyclicTarget:
    """Z_m with d(a, b) = circle distance of (a - b) / m."""

    def __init__(self, m):
        if m < 1:
            raise ValueError("Cyclic target needs m >= 1")
        self.m = m
        self.name = f"Z{m}"

    def zero(self):
        return 0

    def add(self, a, b):
        return (a + b) % self.m

    def neg(self, a):
        return (-a) % self.m

    def normalize(self, a):
        return int(a) % self.m

    def distance(self, a, b):
        r = (a - b) % self.m
        return min(r, self.m - r) / self.m


def parse_target(text):
    text = text.strip()
    if text == "circle":
        return CircleTarget()
    if text.startswith("Z") and text[1:].isdigit():
        return CyclicTarget(int(text[1:]))
    raise ValueError(f"Invalid cocycle target '{text}' (expected 'circle' or 'Z<m>')")


def point_map(g, domain):
    """
    Normalizes a map X -> A to a function on element tuples.

    Callables on a cyclic domain receive the integer residue; tables are
    indexed in canonical element order.
    """
    if callable(g):
        if domain.rank == 1:
            return lambda x: g(x[0])
        return g
    table = list(g)
    if len(table) != domain.order:
        raise ValueError(f"Map table has {len(table)} entries, domain has {domain.order} elements")
    return lambda x: table[domain.index(x)]


@dataclass
class Cocycle:
    domain: object
    k: int
    target: object
    rule: Callable
    overrides: Dict = field(default_factory=dict)

    @property
    def cube_dimension(self):
        return self.k + 1

    def __call__(self, q):
        if q.values in self.overrides:
            return self.overrides[q.values]
        return self.target.normalize(self.rule(q))

    def perturb(self, q, value):
        """Copy of the cocycle with a different value on one cube."""
        overrides = dict(self.overrides)
        overrides[q.values] = self.target.normalize(value)
        return Cocycle(self.domain, self.k, self.target, self.rule, overrides)


def coboundary_from(g, domain, k, target):
    """rho(q) = Gray code of g o q in dimension k + 1."""
    f = point_map(g, domain)
    return Cocycle(domain, k, target, lambda q: gray_code(q.map(lambda x: target.normalize(f(x))), target))


def constant_cocycle(domain, k, target, c):
    return Cocycle(domain, k, target, lambda q: c)


@dataclass
class AxiomReport:
    automorphism_violations: List[dict] = field(default_factory=list)
    concatenation_violations: List[dict] = field(default_factory=list)
    cubes_checked: int = 0
    pairs_checked: int = 0
    note: Optional[str] = None

    @property
    def passed(self):
        return not self.automorphism_violations and not self.concatenation_violations

    def to_json(self):
        return {
            "passed": self.passed,
            "automorphism_violations": self.automorphism_violations,
            "concatenation_violations": self.concatenation_violations,
            "cubes_checked": self.cubes_checked,
            "pairs_checked": self.pairs_checked,
            "note": self.note,
        }


def _equal(target, a, b):
    return target.distance(a, b) <= EQUALITY_TOLERANCE


def _check_automorphisms(rho, q, automorphisms, report):
    value = rho(q)
    for theta in automorphisms:
        expected = rho.target.neg(value) if theta.r % 2 else value
        if not _equal(rho.target, rho(apply_automorphism(q, theta)), expected):
            report.automorphism_violations.append({
                "cube": q.to_json(),
                "permutation": list(theta.permutation),
                "reflection": theta.reflection,
            })


def _check_concatenation(rho, q1, q2, report):
    report.pairs_checked += 1
    q3 = concatenate(q1, q2)
    if not _equal(rho.target, rho(q3), rho.target.add(rho(q1), rho(q2))):
        report.concatenation_violations.append({"q1": q1.to_json(), "q2": q2.to_json()})


def check_cocycle_axioms(rho, mode="enumerate", samples=DEFECT_SAMPLES, seed=RANDOM_STATE,
                         budget=ENUMERATION_BUDGET):
    """
    Tests the sign rule under every cube automorphism and additivity over
    adjacent pairs. An empty report means the cocycle passed.

    Args:
        rho (Cocycle): cocycle to test
        mode (str): 'enumerate' (every cube and pair) or 'sample'
        samples (int): cubes drawn in sample mode
        seed (int): sampling seed
        budget (int): enumeration budget

    Returns:
        AxiomReport: violations citing cubes in vertex order
    """
    report = AxiomReport()
    if rho.k == -1:
        report.note = "degree -1: cocycles are maps on points and both axioms are vacuous"
        return report
    n = rho.cube_dimension
    domain = rho.domain
    automorphisms = all_automorphisms(n)

    if mode == "enumerate":
        cubes = list(enumerate_cubes(domain, n, budget))
        by_lower_half = {}
        for q in cubes:
            by_lower_half.setdefault(_half(q, 0), []).append(q)
        for q in cubes:
            report.cubes_checked += 1
            _check_automorphisms(rho, q, automorphisms, report)
            for q2 in by_lower_half.get(_half(q, 1), []):
                _check_concatenation(rho, q, q2, report)
    elif mode == "sample":
        rng = np.random.default_rng(seed)
        elements = domain.elements()
        for _ in range(samples):
            params = [elements[int(i)] for i in rng.integers(0, domain.order, size=n + 1)]
            q = make_parallelepiped(domain, params[0], params[1:])
            report.cubes_checked += 1
            theta = automorphisms[int(rng.integers(0, len(automorphisms)))]
            _check_automorphisms(rho, q, [theta], report)
            step = elements[int(rng.integers(0, domain.order))]
            q2 = make_parallelepiped(domain, domain.add(params[0], params[1]), [step] + params[2:])
            _check_concatenation(rho, q, q2, report)
    else:
        raise ValueError(f"Unknown mode '{mode}' (expected enumerate or sample)")
    return report


def _cubes(domain, n, mode, samples, rng, budget):
    if mode == "enumerate":
        return enumerate_cubes(domain, n, budget)
    if mode == "sample":
        return (random_parallelepiped(domain, n, rng) for _ in range(samples))
    raise ValueError(f"Unknown mode '{mode}' (expected enumerate or sample)")


def d1_to_zero(rho, mode="enumerate", samples=DEFECT_SAMPLES, seed=RANDOM_STATE, budget=ENUMERATION_BUDGET):
    """Average of d_A(rho(q), 0) over enumerated or sampled cubes."""
    rng = np.random.default_rng(seed)
    zero = rho.target.zero()
    distances = [rho.target.distance(rho(q), zero) for q in _cubes(rho.domain, rho.cube_dimension, mode, samples, rng, budget)]
    return float(np.mean(distances)) if distances else 0.0


def correct_cube(values, target):
    """One-vertex correction: q'(0) = q(0) - sigma(q); returns (corrected values, sigma)."""
    sigma = gray_code(Cube(len(values).bit_length() - 1, tuple(values)), target)
    corrected = list(values)
    corrected[0] = target.add(values[0], target.neg(sigma))
    return corrected, sigma


def _defect_shard(f, domain, k, target, delta, mode, samples, seed, budget):
    rng = np.random.default_rng(seed)
    zero = target.zero()
    failures = 0
    total = 0
    for q in _cubes(domain, k + 1, mode, samples, rng, budget):
        values = [target.normalize(f(x)) for x in q.values]
        _, sigma = correct_cube(values, target)
        # only vertex 0 moves, by exactly sigma
        if target.distance(sigma, zero) > delta:
            failures += 1
        total += 1
    return {
        "delta": delta,
        "failure_fraction": failures / total if total else 0.0,
        "quasi": (failures / total if total else 0.0) <= delta,
        "cubes": total,
    }


def quasimorphism_defect(phi, domain, k, target, deltas, samples=DEFECT_SAMPLES, seed=RANDOM_STATE,
                         mode="sample", budget=ENUMERATION_BUDGET, n_jobs=N_JOBS):
    """
    Empirical (delta, 1)-quasimorphism defect of phi: X -> A.

    For every delta, the fraction of (k+1)-cubes whose image is farther than
    delta (vertexwise) from its one-vertex Gray-code correction. Sample mode
    draws an independent shard per delta from seeds spawned off the master seed.

    Returns:
        list: rows {delta, failure_fraction, quasi, cubes}
    """
    f = point_map(phi, domain)
    seeds = np.random.SeedSequence(seed).spawn(len(deltas))
    shard_seeds = [int(s.generate_state(1)[0]) for s in seeds]
    return Parallel(n_jobs=n_jobs)(
        delayed(_defect_shard)(f, domain, k, target, float(delta), mode, samples, s, budget)
        for delta, s in zip(deltas, shard_seeds)
    )
