"""Rational functions of the weight-function construction and the polynomial layer.

A :class:`RationalFn` is ``t**low * N(t) / prod_i (t - P_i)`` with a dense
numerator ``N`` and simple poles ``P_i``. Exact operations (sums, dilations,
the total-difference operator, polynomial parts) stay inside this class;
functions of several variables are handled as vectorized evaluators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from .params import IndexSubset, ModelParams, subsets

CLEANUP = 1e-13
POLE_MATCH = 1e-10


class PoleError(ValueError):
    """Evaluation or residue requested at an unsupported singular point."""


def lambda_count(M: IndexSubset, k: int) -> int:
    return M.lam(k)


def _same(a: complex, b: complex) -> bool:
    return abs(a - b) <= POLE_MATCH * max(1.0, abs(a), abs(b))


def cleanup(coeffs: np.ndarray, rel: float = CLEANUP) -> np.ndarray:
    c = np.array(coeffs, dtype=complex)
    if c.size:
        c[np.abs(c) <= rel * np.abs(c).max()] = 0
    return c


def poly_from_roots(roots: Sequence[complex], lead: complex = 1.0) -> np.ndarray:
    return lead * P.polyfromroots(list(roots)) if len(roots) else np.array([lead], dtype=complex)


@dataclass(frozen=True)
class RationalFn:
    num: np.ndarray
    low: int = 0
    poles: tuple[complex, ...] = ()

    def __post_init__(self) -> None:
        num = np.atleast_1d(np.asarray(self.num, dtype=complex))
        object.__setattr__(self, "num", num)
        poles = tuple(complex(x) for x in self.poles)
        for i, a in enumerate(poles):
            if a == 0:
                raise PoleError("poles must be nonzero; use the Laurent exponent for t = 0")
            if any(_same(a, b) for b in poles[:i]):
                raise PoleError(f"pole {a} listed twice; only simple poles are supported")
        object.__setattr__(self, "poles", poles)

    # construction helpers
    @classmethod
    def constant(cls, c: complex) -> "RationalFn":
        return cls(np.array([c], dtype=complex))

    @classmethod
    def from_poly(cls, poly: Polynomial | np.ndarray, low: int = 0) -> "RationalFn":
        coef = poly.coef if isinstance(poly, Polynomial) else poly
        return cls(np.asarray(coef, dtype=complex), low)

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        val = P.polyval(t, self.num) * t**self.low if self.low else P.polyval(t, self.num)
        for a in self.poles:
            val = val / (t - a)
        return val

    @property
    def is_laurent(self) -> bool:
        return not self.poles

    def denominator(self) -> np.ndarray:
        return poly_from_roots(self.poles)

    def scale(self, c: complex) -> "RationalFn":
        return RationalFn(c * self.num, self.low, self.poles)

    def mul_poly(self, coeffs: np.ndarray | Polynomial, low: int = 0) -> "RationalFn":
        coef = coeffs.coef if isinstance(coeffs, Polynomial) else coeffs
        return RationalFn(P.polymul(self.num, coef), self.low + low, self.poles)

    def with_poles(self, extra: Sequence[complex], lead: complex = 1.0) -> "RationalFn":
        """Divide by lead * prod (t - e) over ``extra``."""
        return RationalFn(self.num / lead, self.low, self.poles + tuple(extra))

    def dilate(self, c: complex) -> "RationalFn":
        """t -> f(c t)."""
        k = len(self.poles)
        powers = c ** np.arange(len(self.num))
        num = self.num * powers * c**self.low / c**k
        return RationalFn(num, self.low, tuple(a / c for a in self.poles))

    def __add__(self, other: "RationalFn") -> "RationalFn":
        shared, extra_b = [], []
        for b in other.poles:
            (shared if any(_same(a, b) for a in self.poles) else extra_b).append(b)
        extra_a = [a for a in self.poles if not any(_same(a, b) for b in other.poles)]
        na = P.polymul(self.num, poly_from_roots(extra_b))
        nb = P.polymul(other.num, poly_from_roots(extra_a))
        low = min(self.low, other.low)
        na = np.concatenate([np.zeros(self.low - low, dtype=complex), na])
        nb = np.concatenate([np.zeros(other.low - low, dtype=complex), nb])
        return RationalFn(P.polyadd(na, nb), low, self.poles + tuple(extra_b))

    def __neg__(self) -> "RationalFn":
        return self.scale(-1)

    def __sub__(self, other: "RationalFn") -> "RationalFn":
        return self + (-other)

    def order_at_zero(self) -> int:
        nz = np.flatnonzero(cleanup(self.num))
        return self.low + int(nz[0]) if nz.size else math.inf

    def order_at_infinity(self) -> int:
        """Largest k with f(t) = O(t^k) at infinity."""
        nz = np.flatnonzero(cleanup(self.num))
        return self.low + int(nz[-1]) - len(self.poles) if nz.size else -math.inf

    def in_space_F(self, z: Sequence[complex]) -> bool:
        return all(any(_same(a, zj) for zj in z) for a in self.poles)


def as_polynomial(f: RationalFn) -> Polynomial:
    if f.poles or f.low < 0:
        raise ValueError("not a polynomial")
    return Polynomial(np.concatenate([np.zeros(f.low, dtype=complex), f.num]))


def residue_at(f: RationalFn, point: complex) -> complex:
    """Exact residue at a listed simple pole; zero at a regular point."""
    point = complex(point)
    if point == 0:
        raise PoleError("residue at t = 0 is not supported")
    for i, a in enumerate(f.poles):
        if _same(a, point):
            val = complex(P.polyval(a, f.num)) * a**f.low
            for j, b in enumerate(f.poles):
                if j != i:
                    val /= a - b
            return val
    return 0j


def small_circle_residue(h: Callable, center: complex, radius: float, nodes: int = 64) -> complex:
    """(1/2 pi i) of the integral of h around |t - center| = radius (trapezoidal rule)."""
    u = np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    t = center + radius * u
    return complex(np.sum(h(t) * radius * u) / nodes)


def total_difference(f: RationalFn, params: ModelParams, alpha: complex | None = None) -> RationalFn:
    """Df(t) = f(t) - alpha f(pt) prod_j (q^-2 t - z_j)/(t - z_j)."""
    alpha = params.alpha if alpha is None else alpha
    q, z = params.q, params.z
    shifted = f.dilate(params.p)
    # prod (q^-2 t - z_j) = q^(-2n) prod (t - q^2 z_j)
    numer = poly_from_roots([q**2 * zj for zj in z], lead=q ** (-2 * params.n))
    second = shifted.mul_poly(numer).with_poles(z).scale(alpha)
    return f - second


def p_polynomial(sign: str, M: IndexSubset, params: ModelParams) -> Polynomial:
    """P_M^+ = prod_{m in M}(q^-4 t - z_m), P_M^- = prod_{k not in M}(q^-4 t - z_k)."""
    idx = list(M) if sign == "+" else list(M.complement(params.n))
    if sign not in "+-":
        raise ValueError(sign)
    q4 = params.q**4
    return Polynomial(poly_from_roots([q4 * params.z[k - 1] for k in idx], lead=q4 ** (-len(idx))))


def t_q2(f, params: ModelParams):
    """T f(t) = f(t) - f(q^2 t); exact on RationalFn, pointwise otherwise."""
    q2 = params.q**2
    if isinstance(f, Polynomial):
        f = RationalFn.from_poly(f)
    if isinstance(f, RationalFn):
        return f - f.dilate(q2)
    return lambda t: f(t) - f(q2 * np.asarray(t))


def poly_part(f: RationalFn | Polynomial) -> Polynomial:
    """Polynomial part: the polynomial Q with f - Q -> 0 as t -> infinity."""
    if isinstance(f, Polynomial):
        return f
    num, den = f.num, f.denominator()
    if f.low >= 0:
        num = np.concatenate([np.zeros(f.low, dtype=complex), num])
    else:
        den = np.concatenate([np.zeros(-f.low, dtype=complex), den])
    quo, _ = P.polydiv(num, den)
    return Polynomial(cleanup(quo)) if np.any(quo) else Polynomial([0j])


# -- weight functions ----------------------------------------------------------

def mu_fn(M: IndexSubset, m: int, params: ModelParams) -> RationalFn:
    """mu_M^(m)(t) = t/(t - z_m) prod_{j in M, j != m} (t - q^2 z_j)/(z_m - q^2 z_j)."""
    if m not in M:
        raise ValueError(f"{m} not in {M}")
    q2, z = params.q**2, params.z
    others = [z[j - 1] for j in M if j != m]
    norm = 1.0 + 0j
    for zj in others:
        d = z[m - 1] - q2 * zj
        if abs(d) < 1e-14 * abs(z[m - 1]):
            raise PoleError(f"resonant normalization z_{m} = q^2 z_j in mu")
        norm *= d
    num = poly_from_roots([q2 * zj for zj in others], lead=1 / norm)
    return RationalFn(num, 1, (z[m - 1],))


@dataclass(frozen=True)
class MultiEvaluator:
    """Vectorized function of ``arity`` variables with per-variable pole lists."""

    arity: int
    fn: Callable = field(repr=False)
    poles: tuple[tuple[complex, ...], ...] = ()
    label: str = ""

    def __call__(self, *t):
        if len(t) != self.arity:
            raise TypeError(f"{self.label or 'evaluator'} takes {self.arity} arguments, got {len(t)}")
        return self.fn(*[np.asarray(x, dtype=complex) for x in t])


def g_eval(M: IndexSubset, t: Sequence, params: ModelParams):
    """g_M(t_1..t_l) = prod_a [t_a/(t_a - z_{m_a}) prod_{j < m_a} (q^-1 t_a - q z_j)/(t_a - z_j)] prod_{a<b} (q^-2 t_a - t_b)."""
    q, z = params.q, params.z
    t = [np.asarray(x, dtype=complex) for x in t]
    if len(t) != len(M):
        raise TypeError(f"g_M for {M} takes {len(M)} arguments")
    val = 1.0 + 0j
    for a, m in enumerate(M):
        ta = t[a]
        val = val * ta / (ta - z[m - 1])
        for j in range(1, m):
            val = val * (ta / q - q * z[j - 1]) / (ta - z[j - 1])
    for a in range(len(t)):
        for b in range(a + 1, len(t)):
            val = val * (t[a] / q**2 - t[b])
    return val


def g_evaluator(M: IndexSubset, params: ModelParams) -> MultiEvaluator:
    poles = tuple(tuple(params.z[: m]) for m in M)
    return MultiEvaluator(len(M), lambda *t: g_eval(M, t, params), poles, f"g_{M}")


def asym(f: MultiEvaluator) -> MultiEvaluator:
    """Sum over permutations of the arguments with signs."""
    k = f.arity
    perms = [(s, _sign(s)) for s in itertools.permutations(range(k))]

    def fn(*t):
        return sum(sg * f.fn(*[t[i] for i in s]) for s, sg in perms)

    union = tuple(dict.fromkeys(x for pl in f.poles for x in pl))
    return MultiEvaluator(k, fn, (union,) * k, f"Asym {f.label}")


def _sign(perm: Sequence[int]) -> int:
    s, seen = 1, set()
    for i in range(len(perm)):
        if i in seen:
            continue
        j, length = i, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        s *= (-1) ** (length - 1)
    return s


def w_evaluator(kind: str, M: IndexSubset, params: ModelParams) -> MultiEvaluator:
    """w_M = Asym g_M (``kind='w'``) or tilde-w_M = det[mu^(m_a)(t_b)] (``kind='wtilde'``)."""
    if kind == "w":
        out = asym(g_evaluator(M, params))
        return MultiEvaluator(out.arity, out.fn, out.poles, f"w_{M}")
    if kind != "wtilde":
        raise ValueError(kind)
    mus = [mu_fn(M, m, params) for m in M]
    k = len(M)

    def fn(*t):
        shape = np.broadcast(*t).shape if t else ()
        mat = np.empty(shape + (k, k), dtype=complex)
        for a in range(k):
            for b in range(k):
                mat[..., a, b] = mus[a](t[b])
        return np.linalg.det(mat) if k else np.ones(shape, dtype=complex)

    poles = (tuple(params.z[m - 1] for m in M),) * k
    return MultiEvaluator(k, fn, poles, f"wtilde_{M}")


def w_eval(kind: str, M: IndexSubset, t: Sequence, params: ModelParams):
    return w_evaluator(kind, M, params)(*t)


def extremal_factor(ell: int, params: ModelParams) -> complex:
    """Ratio w_{M_ext} / tilde-w_{M_ext}."""
    q, z = params.q, params.z
    out = 1.0 + 0j
    for a in range(ell):
        for b in range(a + 1, ell):
            out *= (z[a] / q**2 - z[b]) * (z[a] - z[b] / q**2) / ((z[a] - z[b]) / q)
    return out


# -- iterated residues ------------------------------------------------------------

def _residue_radius(u: complex, poles: Sequence[complex], frac: float) -> float:
    others = [abs(u - a) for a in poles if not _same(a, u)] + [abs(u)]
    return frac * min(others)


def iterated_residue(f: MultiEvaluator, u: Sequence[complex], nodes: int = 64,
                     frac: float = 0.1, check: bool = True, tol: float = 1e-9) -> complex:
    """Res f(u): residue of f / (t_1...t_l) in t_l at u_l, then t_(l-1), ..., finally t_1.

    Each layer is a trapezoidal integral over a small circle around u_k whose
    radius is ``frac`` times the distance to the nearest other declared pole.
    With ``check`` the value is recomputed at half the radii; disagreement
    means the point is not an isolated simple singular point.
    """
    k = f.arity
    if len(u) != k:
        raise TypeError(f"need {k} residue points")
    radii = [_residue_radius(complex(u[a]), f.poles[a] if f.poles else (), frac) for a in range(k)]

    def run(scale: float) -> complex:
        grids, weights = [], []
        th = np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
        for a in range(k):
            r = radii[a] * scale
            t = complex(u[a]) + r * th
            shape = [1] * k
            shape[a] = nodes
            grids.append(t.reshape(shape))
            weights.append((r * th / nodes / t).reshape(shape))
        val = f(*grids)
        for w in weights:
            val = val * w
        return complex(np.sum(val))

    r1 = run(1.0)
    if check:
        r2 = run(0.5)
        if abs(r1 - r2) > tol * max(1.0, abs(r1)):
            raise PoleError(f"residue of {f.label} at {tuple(u)} unstable under radius halving: {r1} vs {r2}")
    return r1


@lru_cache(maxsize=64)
def residue_matrix(params: ModelParams, ell: int, kind: str = "w") -> dict[tuple[IndexSubset, IndexSubset], complex]:
    """{(M, N): Res w_M(z_N)} over all ell-subsets (``kind`` 'w' or 'wtilde')."""
    subs = subsets(params.n, ell)
    out = {}
    for M in subs:
        ev = w_evaluator(kind, M, params)
        for N in subs:
            out[(M, N)] = iterated_residue(ev, N.point(params.z))
    return out


def residue_lookup(params: ModelParams, ell: int) -> Callable[[IndexSubset, IndexSubset], complex]:
    table = residue_matrix(params, ell, "w")
    return lambda M, N: table[(M, N)]


# -- lowering identity -------------------------------------------------------------------

def d1_sides(M: IndexSubset, t: Sequence, params: ModelParams) -> tuple:
    """Both sides of the lowering identity for an (ell-1)-subset M at the point t."""
    q, z, n = params.q, params.z, params.n
    k_vars = len(M) + 1
    lhs = 0
    for k in range(1, n + 1):
        if k in M:
            continue
        lhs = lhs + q ** (2 * M.lam(k) - k) * w_eval("w", M.union(k), t, params)
    lhs = (q - 1 / q) * lhs

    def h(*s):
        t1, rest = s[0], s[1:]
        a = 1.0 + 0j
        b = 1.0 + 0j
        for ta in rest:
            a = a * (t1 / q**2 - ta)
            b = b * (q**2 * t1 - ta)
        for zj in z:
            b = b * (t1 / q**2 - zj) / (t1 - zj)
        g = g_eval(M, rest, params) if len(M) else 1.0
        return (a - b) * g

    rhs = asym(MultiEvaluator(k_vars, h))(*t)
    return lhs, rhs


# -- polynomial layer ---------------------------------------------------------------

def q_polynomial(M: IndexSubset, a: int, params: ModelParams, simplified: bool = False) -> Polynomial:
    """The polynomial Q_M^(a); ``simplified`` selects the two-term form valid when 2 ell = n."""
    ell = len(M)
    if not 1 <= a <= ell:
        raise ValueError(f"a must be in 1..{ell}")
    q = params.q
    Pp = p_polynomial("+", M, params)
    Pm = p_polynomial("-", M, params)
    Pp_q2 = Polynomial(Pp.coef * (q**2) ** np.arange(len(Pp.coef)))  # P^+(q^2 t)
    first = Pm * poly_part(t_q2(RationalFn(Pp.coef, -a), params))
    if simplified:
        if 2 * ell != params.n:
            raise ValueError("the two-term form requires 2 ell = n")
        inner = poly_part(t_q2(RationalFn(Pm.coef, -a), params))
    else:
        head = poly_part(RationalFn(Pp_q2.coef, -a))
        # P^-(t) / P^+(q^2 t) with P^+(q^2 t) = lead * prod (t - q^2 z_m)
        lead = Pp_q2.coef[-1]
        roots = [q**2 * params.z[m - 1] for m in M]
        ratio = RationalFn(P.polymul(Pm.coef, head.coef), 0, ()).with_poles(roots, lead)
        inner = poly_part(t_q2(ratio, params))
    first = q ** (4 * a) * first
    second = q ** (2 * a) * Pp_q2 * inner
    scale = max(np.abs(first.coef).max(), np.abs(second.coef).max())
    out = (first + second).coef
    out[np.abs(out) <= CLEANUP * scale] = 0
    return Polynomial(out)


def q_identity_sides(M: IndexSubset, m: int, t, params: ModelParams) -> tuple:
    """Both sides of D(prod_{k != m}(q^-4 t - z_k)) = -z_m^-1 prod_k (q^-2 z_m - z_k) mu + sum_a Q^(a) z_m^(a-1)."""
    q, z, n = params.q, params.z, params.n
    zm = z[m - 1]
    prod = RationalFn(poly_from_roots([q**4 * z[k - 1] for k in range(1, n + 1) if k != m],
                                      lead=q ** (-4 * (n - 1))))
    lhs = total_difference(prod, params)(t)
    c = -1 / zm
    for k in range(1, n + 1):
        c *= zm / q**2 - z[k - 1]
    rhs = c * mu_fn(M, m, params)(t)
    for a in range(1, len(M) + 1):
        rhs = rhs + q_polynomial(M, a, params)(np.asarray(t)) * zm ** (a - 1)
    return lhs, rhs


def xi_fn(M: IndexSubset, params: ModelParams) -> RationalFn:
    return total_difference(RationalFn.from_poly(p_polynomial("-", M, params)), params)


def xi_expansion(M: IndexSubset, params: ModelParams) -> Callable:
    """sum_{m in M} mu_M^(m)(t) z_m^-1 res xi_M(z_m), as an evaluator."""
    xi = xi_fn(M, params)
    terms = [(mu_fn(M, m, params), residue_at(xi, params.z[m - 1]) / params.z[m - 1]) for m in M]
    return lambda t: sum(c * mu(t) for mu, c in terms)


# -- sampling -------------------------------------------------------------------------

def random_points(rng: np.random.Generator, count: int, avoid: Sequence[complex], eta: float,
                  rmin: float = 0.5, rmax: float = 2.0) -> np.ndarray:
    """Points in the annulus rmin <= |t| <= rmax at distance >= eta from ``avoid``."""
    avoid = np.asarray(list(avoid), dtype=complex)
    out = []
    while len(out) < count:
        r = np.exp(rng.uniform(np.log(rmin), np.log(rmax)))
        t = r * np.exp(2j * np.pi * rng.uniform())
        if avoid.size == 0 or np.abs(t - avoid).min() >= eta:
            out.append(t)
    return np.array(out)
