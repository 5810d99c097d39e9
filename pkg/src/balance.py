"""
Balance of morphisms Z_p -> Y measured on cube measures.

Cube measures are stored as arrays of vertex coordinates; the metric between
two measures is the truncated test-function sum
d'(mu, nu) = sum_{r <= R} 2^{-r} |int h_r dmu - int h_r dnu|
over vertex-character products h_r(q) = e(xi_r . q). The factor-consistent
metric adds the same quantity on the factor Y_{k-1}.
"""
import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed

from src.config import (
    BALANCE_BOOTSTRAP,
    BALANCE_FAMILY_SIZE,
    BALANCE_SAMPLES,
    EXACT_BALANCE_MAX_N,
    EXACT_BALANCE_MAX_P,
    N_JOBS,
    RANDOM_STATE,
)
from src.filtered_groups import canonical_face_order
from src.group_cube import parallelepiped_array, popcount


class UnsupportedTargetError(ValueError):
    pass


@dataclass(frozen=True)
class TorusTarget:
    """D_k(T^m): the m-torus with degree-k cube structure; its factor is a point."""

    m: int = 1
    k: int = 1

    @property
    def dim(self):
        return self.m

    @property
    def name(self):
        return f"torus:m={self.m},k={self.k}"


@dataclass(frozen=True)
class HeisenbergTarget:
    """Heisenberg nilmanifold with the lower central series; factor T^2 drops z."""

    dim: int = 3
    k: int = 2
    name: str = "heis"


def parse_balance_target(text):
    text = text.strip()
    if text == "heis":
        return HeisenbergTarget()
    if text.startswith("torus:"):
        params = dict(part.split("=") for part in text[len("torus:"):].split(","))
        return TorusTarget(int(params.get("m", 1)), int(params.get("k", 1)))
    raise UnsupportedTargetError(f"Unsupported balance target '{text}' (expected 'torus:m=1,k=1' or 'heis')")


def factor_of(target):
    """Target of the factor map pi_{k-1}, or None for a point."""
    if isinstance(target, TorusTarget):
        return None
    if isinstance(target, HeisenbergTarget):
        return TorusTarget(2, 1)
    raise UnsupportedTargetError(f"No factor map known for {target!r}")


def project_to_factor(samples, target):
    if isinstance(target, HeisenbergTarget):
        return samples[..., :2]
    raise UnsupportedTargetError(f"No factor map known for {target!r}")


@dataclass
class EmpiricalCubeMeasure:
    """Uniform measure on sampled cubes; samples has shape (S, 2^n, dim)."""

    target: object
    n: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        expected = (2 ** self.n, self.target.dim)
        if self.samples.ndim != 3 or self.samples.shape[1:] != expected:
            raise ValueError(f"Cube samples must have shape (S, {expected[0]}, {expected[1]}), got {self.samples.shape}")
        if self.samples.shape[0] < 1:
            raise ValueError("An empirical cube measure needs at least one sample")

    @property
    def sample_count(self):
        return self.samples.shape[0]

    def character_means(self, frequencies):
        flat = self.samples.reshape(self.sample_count, -1)
        return np.mean(np.exp(2j * np.pi * (flat @ frequencies.T)), axis=0)

    def resample(self, rng):
        idx = rng.integers(0, self.sample_count, size=self.sample_count)
        return EmpiricalCubeMeasure(self.target, self.n, self.samples[idx])

    def project(self):
        factor = factor_of(self.target)
        return EmpiricalCubeMeasure(factor, self.n, project_to_factor(self.samples, self.target))


@dataclass
class ExactTorusHaar:
    """Exact Haar measure on C^n(D_k(T^m)) through its character means."""

    target: TorusTarget
    n: int

    @property
    def sample_count(self):
        return 0

    def character_means(self, frequencies):
        # int e(xi . q) = 1 iff for every face parameter w (|w| <= k) the
        # frequencies on the vertices above w sum to zero
        m = self.target.m
        xi = frequencies.reshape(len(frequencies), 2 ** self.n, m)
        means = np.ones(len(frequencies), dtype=complex)
        for w in range(2 ** self.n):
            if popcount(w) > self.target.k:
                continue
            above = [v for v in range(2 ** self.n) if v & w == w]
            total = xi[:, above, :].sum(axis=1)
            means[np.any(total != 0, axis=1)] = 0.0
        return means


def _frequencies_with_l1(dim, total):
    """Integer vectors of l1-norm `total`, descending lexicographic order."""
    if dim == 1:
        return [(total,), (-total,)] if total else [(0,)]
    out = []
    for first in range(total, -total - 1, -1):
        for rest in _frequencies_with_l1(dim - 1, total - abs(first)):
            out.append((first,) + rest)
    return out


class TestFunctionFamily:
    """
    Vertex-character products h_r(q) = e(xi_r . q), each of sup-norm 1.

    One complex character stands for the pair cos(2 pi xi . q), sin(2 pi xi . q):
    the gap |E_mu h - E_nu h| bounds both real and imaginary gaps and is at
    most their sum, so the metric matches the real test functions up to a
    factor 2.

    Frequencies are ordered by l1-norm, then descending lexicographically,
    keeping one representative of each pair {xi, -xi} (first nonzero entry
    positive).
    """

    __test__ = False

    def __init__(self, n, dim, size=BALANCE_FAMILY_SIZE):
        if size < 1:
            raise ValueError("Test function family needs size >= 1")
        self.n = n
        self.dim = dim
        self.size = size
        coords = 2 ** n * dim
        frequencies = []
        for total in itertools.count(1):
            for xi in _frequencies_with_l1(coords, total):
                first = next(c for c in xi if c != 0)
                if first > 0:
                    frequencies.append(xi)
                    if len(frequencies) == size:
                        break
            if len(frequencies) == size:
                break
        self.frequencies = np.asarray(frequencies, dtype=np.int64)

    @classmethod
    def for_target(cls, target, n, size=BALANCE_FAMILY_SIZE):
        return cls(n, target.dim, size)

    @property
    def weights(self):
        return 0.5 ** np.arange(1, self.size + 1)

    def truncation_bound(self):
        # every dropped term is at most 2 * 2^{-r}
        return 2.0 ** (1 - self.size)


@dataclass(frozen=True)
class MetricEstimate:
    value: float
    truncation_bound: float
    samples: tuple

    def __float__(self):
        return self.value


def _check_compatible(mu, nu, family):
    if mu.target != nu.target or mu.n != nu.n:
        raise ValueError(f"Measures differ: {mu.target!r}/n={mu.n} vs {nu.target!r}/n={nu.n}")
    if family.n != mu.n or family.dim != mu.target.dim:
        raise ValueError("Test function family does not match the measures' cube space")


def metric_d_prime(mu, nu, family):
    """Truncated test-function metric; the truncation error is at most 2^{1-R}."""
    _check_compatible(mu, nu, family)
    diff = np.abs(mu.character_means(family.frequencies) - nu.character_means(family.frequencies))
    value = float(np.sum(family.weights * diff))
    return MetricEstimate(value, family.truncation_bound(), (mu.sample_count, nu.sample_count))


def factor_consistent_metric(mu, nu, family_size=BALANCE_FAMILY_SIZE):
    """
    d_{n,k}(mu, nu) = d'_{n,k}(mu, nu) + d_{n,k-1}(pushforwards to the factor).

    The recursion stops at the point space, where the metric is 0.
    """
    target = mu.target
    if not isinstance(target, (TorusTarget, HeisenbergTarget)):
        raise UnsupportedTargetError(f"Unsupported balance target {target!r}")
    value = metric_d_prime(mu, nu, TestFunctionFamily.for_target(target, mu.n, family_size)).value
    if factor_of(target) is None:
        return value
    return value + factor_consistent_metric(mu.project(), nu.project(), family_size)


def _reduce_heisenberg(x, y, z):
    p = np.floor(x)
    q = np.floor(y)
    z = z + p * q - x * q
    return x - p, y - q, z - np.floor(z)


def haar_cube_sampler(target, n, samples=BALANCE_SAMPLES, seed=RANDOM_STATE):
    """
    Haar cube measure sampled through the face factorization.

    Each face anchored at w with |w| <= k gets a uniform parameter from the
    fundamental domain of G_{|w|}; the vertex value at v is the ordered
    product of the parameters of the faces containing v.
    """
    if n > 3:
        raise ValueError(f"Cube dimension {n} exceeds the supported maximum 3")
    rng = np.random.default_rng(seed)
    if isinstance(target, TorusTarget):
        anchors = [w for w in range(2 ** n) if popcount(w) <= target.k]
        params = rng.uniform(0.0, 1.0, size=(samples, len(anchors), target.m))
        incidence = np.array([[1.0 if v & w == w else 0.0 for w in anchors] for v in range(2 ** n)])
        cubes = np.einsum("vw,swm->svm", incidence, params) % 1.0
        return EmpiricalCubeMeasure(target, n, cubes)
    if isinstance(target, HeisenbergTarget):
        x = np.zeros((samples, 2 ** n))
        y = np.zeros((samples, 2 ** n))
        z = np.zeros((samples, 2 ** n))
        for face in canonical_face_order(n):
            level = face.codimension
            if level > 2:
                continue
            u = rng.uniform(0.0, 1.0, samples) if level <= 1 else np.zeros(samples)
            v = rng.uniform(0.0, 1.0, samples) if level <= 1 else np.zeros(samples)
            w = rng.uniform(0.0, 1.0, samples)
            for vertex in face.vertices():
                z[:, vertex] = z[:, vertex] + w + x[:, vertex] * v
                x[:, vertex] = x[:, vertex] + u
                y[:, vertex] = y[:, vertex] + v
        x, y, z = _reduce_heisenberg(x, y, z)
        return EmpiricalCubeMeasure(target, n, np.stack([x, y, z], axis=-1))
    raise UnsupportedTargetError(f"Unsupported balance target {target!r}")


def pushforward_sampler(table, target, n, samples=BALANCE_SAMPLES, seed=RANDOM_STATE):
    """phi applied vertexwise to uniformly sampled parallelepipeds on Z_p."""
    table = np.asarray(table, dtype=float).reshape(-1, target.dim)
    rng = np.random.default_rng(seed)
    idx = parallelepiped_array(len(table), n, samples, rng)
    return EmpiricalCubeMeasure(target, n, table[idx])


def pushforward_exact(table, target, n):
    """Every parallelepiped on Z_p, each with equal weight."""
    table = np.asarray(table, dtype=float).reshape(-1, target.dim)
    p = len(table)
    params = np.array(list(itertools.product(range(p), repeat=n + 1)), dtype=np.int64)
    bits = np.array([[(v >> i) & 1 for i in range(n)] for v in range(2 ** n)], dtype=np.int64).reshape(2 ** n, n)
    idx = (params[:, :1] + params[:, 1:] @ bits.T) % p
    return EmpiricalCubeMeasure(target, n, table[idx])


def _bootstrap_spread(push, haar, family_size, rounds, seed):
    if rounds < 2 or isinstance(haar, ExactTorusHaar):
        return 0.0
    rng = np.random.default_rng(seed)
    values = [
        factor_consistent_metric(push.resample(rng), haar.resample(rng), family_size)
        for _ in range(rounds)
    ]
    return float(np.std(values))


def _metric_at(table, target, n, samples, seeds, family_size, mode, bootstrap):
    if mode == "exact":
        if not isinstance(target, TorusTarget):
            raise UnsupportedTargetError("Exact balance needs a torus target")
        if len(table) > EXACT_BALANCE_MAX_P or n > EXACT_BALANCE_MAX_N:
            raise ValueError(
                f"Exact balance is limited to p <= {EXACT_BALANCE_MAX_P} and n <= {EXACT_BALANCE_MAX_N}"
            )
        push = pushforward_exact(table, target, n)
        haar = ExactTorusHaar(target, n)
    else:
        push = pushforward_sampler(table, target, n, samples, seeds[0])
        haar = haar_cube_sampler(target, n, samples, seeds[1])
    d = factor_consistent_metric(push, haar, family_size)
    spread = _bootstrap_spread(push, haar, family_size, bootstrap, seeds[2])
    return n, d, spread


@dataclass
class BalanceResult:
    rows: List[dict] = field(default_factory=list)
    smallest_b: Optional[float] = None
    family_size: int = BALANCE_FAMILY_SIZE
    samples: int = BALANCE_SAMPLES
    mode: str = "sample"

    def to_json(self):
        return {
            "rows": self.rows,
            "smallest_b": self.smallest_b,
            "family_size": self.family_size,
            "truncation_bound": 2.0 ** (1 - self.family_size),
            "samples": self.samples,
            "mode": self.mode,
        }


def balance_of(table, target, b_grid, samples=BALANCE_SAMPLES, seed=RANDOM_STATE,
               family_size=BALANCE_FAMILY_SIZE, mode="sample", bootstrap=BALANCE_BOOTSTRAP, n_jobs=N_JOBS):
    """
    Checks d_n(pushforward, Haar) <= b for all n <= 1/b, for each b in the grid.

    Args:
        table: vertex coordinates of phi(x) for x = 0, ..., p-1, shape (p, dim)
        target: TorusTarget or HeisenbergTarget
        b_grid (list): thresholds, sorted descending, each with 1/b <= 3
        samples (int): cubes per empirical measure
        seed (int): master seed; each n gets its own derived seeds
        family_size (int): truncation index R of the test-function family
        mode (str): 'sample' or 'exact' (torus targets, p <= 13, n <= 2)
        bootstrap (int): bootstrap rounds for the reported spread
        n_jobs (int): joblib workers, one task per cube dimension

    Returns:
        BalanceResult: rows {b, n, d, pass, spread} and the smallest passing b
    """
    b_grid = [float(b) for b in b_grid]
    if any(b <= 0 for b in b_grid):
        raise ValueError("Balance thresholds must be positive")
    if b_grid != sorted(b_grid, reverse=True):
        raise ValueError(f"Balance grid must be sorted descending, got {b_grid}")
    max_n = {b: math.floor(1.0 / b + 1e-12) for b in b_grid}
    if any(n > 3 for n in max_n.values()):
        raise ValueError("Balance grid needs 1/b <= 3")

    dims = sorted({n for b in b_grid for n in range(1, max_n[b] + 1)})
    children = np.random.SeedSequence(seed).spawn(len(dims))
    shard_seeds = [[int(s) for s in child.generate_state(3)] for child in children]
    measured = Parallel(n_jobs=n_jobs)(
        delayed(_metric_at)(table, target, n, samples, s, family_size, mode, bootstrap)
        for n, s in zip(dims, shard_seeds)
    )
    by_n = {n: (d, spread) for n, d, spread in measured}

    result = BalanceResult(family_size=family_size, samples=samples, mode=mode)
    for b in b_grid:
        passed_all = True
        for n in range(1, max_n[b] + 1):
            d, spread = by_n[n]
            passed = d <= b
            passed_all = passed_all and passed
            result.rows.append({"b": b, "n": n, "d": d, "pass": passed, "spread": spread})
        if passed_all:
            result.smallest_b = b
    return result
