"""
Coset nilspaces G/Gamma at desk scale.

Fundamental-domain reduction, p-periodicity, nilsequences with closed-form
output functions, correlation against signals on Z_p and the constructive
polynomial lift of a morphism Z_N -> G/Gamma.
"""
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
import sympy

from src.config import MORPHISM_SAMPLES, POLY_SAMPLES, RANDOM_STATE
from src.filtered_groups import (
    AbelianCarrier,
    HeisenbergCarrier,
    PolySeq,
    abelian_filtration,
    binom,
    canonical_face_order,
    parse_filtration,
    poly_eval,
    taylor_from_values,
)
from src.gowers import Signal, e, l2_norm, u_norm
from src.group_cube import FiniteAbelianGroup


class LiftError(ValueError):
    """The finite-difference fit failed on a quotient layer."""

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"Polynomial fit failed at level {level}; the map is not a morphism")


class PeriodMismatchError(ValueError):
    pass


class Lattice:
    """Gamma inside a carrier: integer coordinates, with Gamma_i = Gamma cap G_i."""

    def __init__(self, carrier):
        self.carrier = carrier

    def contains(self, g):
        return self.carrier.in_lattice(g)

    def contains_at_level(self, g, filtration, i):
        return self.contains(g) and filtration.contains(g, i)


@dataclass(frozen=True)
class NilPoint:
    """Canonical coset representative, coordinates in [0, 1)."""

    coords: Tuple[Fraction, ...]

    def as_floats(self):
        return tuple(float(c) for c in self.coords)


def reduce_mod_gamma(g, carrier):
    """
    Returns (NilPoint, gamma) with g = rep * gamma exactly.

    Example:
        >>> point, gamma = reduce_mod_gamma((Fraction(7, 5),), AbelianCarrier(1))
        >>> point.coords, gamma
        ((Fraction(2, 5),), (Fraction(1, 1),))
    """
    rep, gamma = carrier.reduce(carrier.element(g))
    return NilPoint(rep), gamma


def _abelian_periodic(g, p):
    # g(n+p) - g(n) = sum_j c_j binom(n, j) with c_j = sum_{i>j} g_i binom(p, i-j)
    coeffs = g.coefficients
    for j in range(len(coeffs)):
        for coord in range(g.carrier.dim):
            c_j = sum((coeffs[i][coord] * binom(p, i - j) for i in range(j + 1, len(coeffs))), Fraction(0))
            if c_j.denominator != 1:
                return False
    return True


def is_p_periodic(g, p, window):
    """
    Checks g(n)^{-1} g(n+p) in Gamma for n in [-window, window].

    For abelian carriers the exact algebraic test runs as well and the two
    must agree; a disagreement means the window was too small.
    """
    if p < 1:
        raise ValueError(f"Period must be >= 1, got {p}")
    carrier = g.carrier
    lattice = Lattice(carrier)
    window_result = all(
        lattice.contains(carrier.mul(carrier.inv(poly_eval(g, n)), poly_eval(g, n + p)))
        for n in range(-window, window + 1)
    )
    if isinstance(carrier, AbelianCarrier):
        exact = _abelian_periodic(g, p)
        if exact != window_result:
            raise ValueError(f"Window {window} too small to certify period {p}")
        return exact
    return window_result


def _tent(s):
    return np.maximum(0.0, 1.0 - np.abs(2.0 * np.asarray(s, dtype=float) - 1.0))


_E = sympy.Function("e")
_TENT = sympy.Function("tent")


def coordinate_names(carrier):
    if isinstance(carrier, HeisenbergCarrier):
        return ["x", "y", "z"]
    if carrier.dim == 1:
        return ["t"]
    return [f"t{i + 1}" for i in range(carrier.dim)]


def _sup_bound(expr):
    if expr.is_Symbol:
        return 1.0
    if expr.is_Number or expr == sympy.I:
        return abs(complex(expr))
    if isinstance(expr, (_E, _TENT)):
        return 1.0
    if expr.is_Add:
        return sum(_sup_bound(arg) for arg in expr.args)
    if expr.is_Mul:
        return float(np.prod([_sup_bound(arg) for arg in expr.args]))
    if expr.is_Pow:
        base, exponent = expr.args
        if exponent.is_Integer and exponent > 0:
            return _sup_bound(base) ** int(exponent)
        if exponent.is_Integer and isinstance(base, _E):
            return 1.0
    raise ValueError(f"Unsupported construct in output function: {expr}")


class OutputFunction:
    """
    A closed-form F on Mal'cev coordinates.

    Expressions use the coordinate symbols of the carrier (t or t1..tm on a
    torus, x, y, z on the Heisenberg nilmanifold), e(s) = exp(2 pi i s),
    tent(s) = max(0, 1 - |2s - 1|), numeric constants, + and *.
    """

    def __init__(self, text, carrier):
        self.text = text
        self.carrier = carrier
        names = coordinate_names(carrier)
        self.symbols = sympy.symbols(names)
        local = {name: sym for name, sym in zip(names, self.symbols)}
        local.update({"e": _E, "tent": _TENT, "I": sympy.I})
        try:
            self.expr = sympy.sympify(text, locals=local)
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise ValueError(f"Cannot parse output function '{text}': {exc}") from exc
        unknown = self.expr.free_symbols - set(self.symbols)
        if unknown:
            raise ValueError(f"Unknown symbols {sorted(map(str, unknown))} in '{text}'; expected {names}")
        self.sup_bound = _sup_bound(self.expr)
        if self.sup_bound > 1.0 + 1e-12:
            raise ValueError(f"Output function '{text}' has sup-bound {self.sup_bound:.4f} > 1")
        self._fn = sympy.lambdify(self.symbols, self.expr, modules=[{"e": e, "tent": _tent}, "numpy"])

    def __call__(self, *coords):
        value = self._fn(*coords)
        shape = np.broadcast(*[np.asarray(c) for c in coords]).shape
        return np.broadcast_to(np.asarray(value, dtype=complex), shape)

    def __repr__(self):
        return f"OutputFunction({self.text!r})"


@dataclass(frozen=True)
class Nilsequence:
    poly: PolySeq
    F: OutputFunction
    period: Optional[int] = None
    lipschitz: Optional[float] = None

    @property
    def carrier(self):
        return self.poly.carrier

    @classmethod
    def from_spec(cls, spec):
        """Builds from {filtration, coefficients, F, period, lipschitz}."""
        filtration = parse_filtration(spec["filtration"])
        carrier_name = spec.get("carrier")
        if carrier_name and not filtration.carrier.name.startswith(carrier_name.split(":")[0]):
            raise ValueError(f"Carrier '{carrier_name}' does not match filtration '{spec['filtration']}'")
        poly = PolySeq.from_json(filtration, spec["coefficients"])
        F = OutputFunction(spec.get("F", "1"), filtration.carrier)
        return cls(poly, F, spec.get("period"), spec.get("lipschitz"))

    def to_spec(self):
        return {
            "filtration": self.poly.filtration.to_spec(),
            "coefficients": self.poly.to_json(),
            "F": self.F.text,
            "period": self.period,
            "lipschitz": self.lipschitz,
        }


def nilsequence_eval(ns, n):
    point, _ = reduce_mod_gamma(poly_eval(ns.poly, n), ns.carrier)
    return complex(ns.F(*point.as_floats()))


def nilsequence_table(ns, N):
    """Values at n = 0, ..., N-1 as a complex array."""
    points = [reduce_mod_gamma(poly_eval(ns.poly, n), ns.carrier)[0].as_floats() for n in range(N)]
    coords = np.asarray(points, dtype=float).reshape(N, ns.carrier.dim)
    return np.asarray(ns.F(*coords.T), dtype=complex)


def correlate(f, ns, strict=False):
    """E_{x in [0, p)} f(x) conj(F(g(x) Gamma))."""
    if f.group.rank != 1:
        raise ValueError("correlate expects a signal on a cyclic group Z_p")
    p = f.group.order
    if ns.period is not None and ns.period != p:
        message = f"Nilsequence declares period {ns.period} but the signal lives on Z_{p}"
    elif not is_p_periodic(ns.poly, p, window=p):
        message = f"Nilsequence is not {p}-periodic"
    else:
        message = None
    if message:
        if strict:
            raise PeriodMismatchError(message)
        warnings.warn(message)
    table = nilsequence_table(ns, p)
    return complex(np.mean(f.values * np.conj(table)))


def check_lipschitz(ns, samples=POLY_SAMPLES, seed=RANDOM_STATE, scale=1e-3):
    """
    Spot-checks the declared Lipschitz constant with sampled difference quotients.

    Returns:
        dict: max_ratio, declared and ok (None when nothing is declared)
    """
    rng = np.random.default_rng(seed)
    dim = ns.carrier.dim
    a = rng.uniform(0.0, 1.0 - scale, size=(samples, dim))
    step = rng.uniform(-scale, scale, size=(samples, dim))
    b = np.clip(a + step, 0.0, 1.0 - 1e-12)
    distance = np.max(np.abs(a - b), axis=1)
    keep = distance > 0
    diff = np.abs(ns.F(*a.T) - ns.F(*b.T))
    max_ratio = float(np.max(diff[keep] / distance[keep])) if np.any(keep) else 0.0
    ok = None if ns.lipschitz is None else max_ratio <= ns.lipschitz + 1e-9
    return {"max_ratio": max_ratio, "declared": ns.lipschitz, "ok": ok}


def _as_table(phi, N, carrier):
    if callable(phi):
        raw = [phi(n) for n in range(N)]
    else:
        raw = list(phi)
        if len(raw) != N:
            raise ValueError(f"Map table has {len(raw)} entries, expected {N}")
    table = []
    for value in raw:
        coords = value.coords if isinstance(value, NilPoint) else value
        table.append(reduce_mod_gamma(coords, carrier)[0])
    return table


def _frac_mod1(x):
    return x - (x.numerator // x.denominator)


def _layer_factor(carrier, b, n):
    """alpha(n) = b_0 b_1^n b_2^binom(n,2) ..."""
    out = carrier.identity()
    for l, b_l in enumerate(b):
        out = carrier.mul(out, carrier.power(b_l, binom(n, l)))
    return out


def lift_morphism(phi, N, filtration, window_factor=2):
    """
    Lifts a morphism Z_N -> G/Gamma to a polynomial sequence.

    Descends through the layers G_j Gamma / G_{j+1} Gamma: on each layer the
    coordinates of the current residual are fitted by a degree <= j
    polynomial in the binomial basis, with coefficient representatives b_l
    taken in [0, 1). The fitted layer map is divided out and the residual
    must then lie in G_{j+1} Gamma.

    Args:
        phi: callable n -> NilPoint/coordinates, or a table of N points
        N (int): modulus of the domain
        filtration: filtration of the carrier
        window_factor (int): the lift is verified on [0, window_factor * N)

    Returns:
        PolySeq: g with reduce(g(n)) = phi(n mod N) on the verification window

    Raises:
        LiftError: with the failing layer
    """
    carrier = filtration.carrier
    table = _as_table(phi, N, carrier)
    window = window_factor * N
    residual = [table[n % N].coords for n in range(window)]
    factors = []
    for j in range(filtration.degree + 1):
        layer = sorted(filtration.level(j) - filtration.level(j + 1))
        if layer:
            coeffs = []
            for coord in layer:
                values = [residual[n][coord] for n in range(window)]
                diffs = values[: j + 1]
                newton = []
                for _ in range(j + 1):
                    newton.append(_frac_mod1(diffs[0]))
                    diffs = [diffs[i + 1] - diffs[i] for i in range(len(diffs) - 1)]
                for n in range(window):
                    fitted = sum((b * binom(n, l) for l, b in enumerate(newton)), Fraction(0))
                    if _frac_mod1(fitted - values[n]) != 0:
                        raise LiftError(j)
                coeffs.append(newton)
            b = []
            for l in range(j + 1):
                element = [Fraction(0)] * carrier.dim
                for coord, newton in zip(layer, coeffs):
                    element[coord] = newton[l]
                b.append(tuple(element))
            factors.append(b)
            residual = [
                carrier.reduce(carrier.mul(carrier.inv(_layer_factor(carrier, b, n)), residual[n]))[0]
                for n in range(window)
            ]
        if any(not filtration.contains(r, j + 1) for r in residual):
            raise LiftError(j)

    def psi(n):
        out = carrier.identity()
        for b in factors:
            out = carrier.mul(out, _layer_factor(carrier, b, n))
        return out

    g = taylor_from_values([psi(n) for n in range(filtration.degree + 1)], filtration)
    for n in range(window):
        if reduce_mod_gamma(poly_eval(g, n), carrier)[0] != table[n % N]:
            raise LiftError(filtration.degree, f"Lift does not reproduce the map at n = {n}")
    return g


def _cube_liftable(values, filtration):
    carrier = filtration.carrier
    residual = [carrier.element(v) for v in values]
    n = (len(values) - 1).bit_length()
    for face in canonical_face_order(n):
        w = face.anchor
        gamma = carrier.lattice_correction(residual[w], filtration.level(face.codimension))
        if gamma is None:
            return False
        g = carrier.mul(residual[w], gamma)
        residual[w] = g
        g_inv = carrier.inv(g)
        for v in face.vertices():
            residual[v] = carrier.mul(g_inv, residual[v])
    return True


def morphism_check(phi, N, filtration, n_dim, samples=MORPHISM_SAMPLES, seed=RANDOM_STATE):
    """
    Sampled test that phi: Z_N -> G/Gamma maps standard cubes into C^n(G_.)/C^n(Gamma_.).

    Each sampled cube is lifted vertexwise to canonical representatives; the
    face peeling then solves exactly for the lattice correction at every
    anchor. One-sided: True means no counterexample cube was found.
    """
    if n_dim > 3:
        raise ValueError(f"Cube dimension {n_dim} exceeds the supported maximum 3")
    carrier = filtration.carrier
    table = _as_table(phi, N, carrier)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = int(rng.integers(0, N))
        h = [int(c) for c in rng.integers(0, N, size=n_dim)]
        vertices = [
            (x + sum(h[i] for i in range(n_dim) if (v >> i) & 1)) % N for v in range(2 ** n_dim)
        ]
        if not _cube_liftable([table[m].coords for m in vertices], filtration):
            return False
    return True


def periodic_abelian_poly(filtration, p, seed):
    """Random p-periodic abelian sequence n -> (sum_i c_i n^i) / p."""
    rng = np.random.default_rng(seed)
    m, k = filtration.carrier.dim, filtration.degree
    c = rng.integers(0, p, size=(k + 1, m))

    def value(n):
        return tuple(Fraction(int(sum(int(c[i, j]) * n ** i for i in range(k + 1))), p) for j in range(m))

    return taylor_from_values([value(n) for n in range(k + 1)], filtration)


def periodic_heisenberg_poly(filtration, p, seed):
    """
    Random p-periodic Heisenberg sequence g_0 * (an/p, bn/p, ab n(n-p)/(2p^2) + cn/p).

    g(n)^{-1} g(n+p) = (a, b, c) lies in Gamma for every n.
    """
    rng = np.random.default_rng(seed)
    carrier = filtration.carrier
    a, b, c = (int(v) for v in rng.integers(0, p, size=3))
    g0 = tuple(Fraction(int(v), p) for v in rng.integers(0, p, size=3))

    def value(n):
        core = (
            Fraction(a * n, p),
            Fraction(b * n, p),
            Fraction(a * b * n * (n - p), 2 * p * p) + Fraction(c * n, p),
        )
        return carrier.mul(g0, core)

    return taylor_from_values([value(n) for n in range(filtration.degree + 1)], filtration)


def inverse_demo(p, seed=RANDOM_STATE, modulated=False):
    """
    Matched quadratic nilsequence against a quadratic phase on Z_p.

    f(x) = w(x) e(a x^2 / p), with w = 1 or, when modulated, random amplitudes
    in [1/2, 1]; the nilsequence is F = e(t) over g(n) = a n^2 / p. Reports the
    correlation, the U^3 norm delta of f, the lower bound delta^8 / 2 and the
    chain <f, f> = ||f||_2^2 >= ||f||_{U^3}^8.
    """
    rng = np.random.default_rng(seed)
    a = int(rng.integers(1, p))
    group = FiniteAbelianGroup([p])
    amplitude = rng.uniform(0.5, 1.0, size=p) if modulated else np.ones(p)
    phase = Signal.quadratic_phase(group, a)
    f = Signal(group, amplitude * phase.values, 1.0)

    filtration = abelian_filtration(1, 2)
    poly = taylor_from_values([(Fraction(a * n * n, p),) for n in range(3)], filtration)
    ns = Nilsequence(poly, OutputFunction("e(t)", filtration.carrier), period=p, lipschitz=2 * np.pi)
    k = 2
    delta = u_norm(f, k + 1)
    correlation = correlate(f, ns)
    lower_bound = delta ** (2 ** (k + 1)) / 2
    l2_sq = l2_norm(f) ** 2
    return {
        "p": p,
        "a": a,
        "modulated": modulated,
        "k": k,
        "correlation": abs(correlation),
        "u3_norm": delta,
        "lower_bound": lower_bound,
        "bound_holds": abs(correlation) >= lower_bound,
        "l2_squared": l2_sq,
        "chain_holds": l2_sq >= delta ** (2 ** (k + 1)) - 1e-9,
        "nilsequence": ns.to_spec(),
    }
