"""The hypergeometric pairing I(f, F) and its multivariable version.

The integration contour must separate the inner pole family
{p^-k z_j : k <= 1} from the outer family {p^k q^2 z_j : k <= 1}. The two
families interleave radially, so no circle separates them. A contour is
represented as one circle |t| = r plus residue corrections: inner-family
points outside the circle are added, outer-family points inside it are
subtracted. Every piece is a trapezoidal rule, so the whole functional is a
fixed set of nodes and weights, and the multivariable pairing is the tensor
product of that rule in each variable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .elliptic import EllipticFn, WFamily, phase, phase_zero_slope
from .params import ModelParams
from .ratfun import MultiEvaluator, RationalFn, residue_at

SMALL_NODES = 64
SMALL_FRAC = 0.05
DEFAULT_NODES = 512
MAX_NODES = 8192
REL_TOL = 1e-11


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Correction:
    point: complex
    sign: int  # +1: inner-family point outside the circle; -1: outer-family point inside it
    radius: float
    family: str  # 'inner' or 'outer'
    shell: int  # k in p^-k z_j (inner) or p^k q^2 z_j (outer)
    site: int

    @property
    def never_singular(self) -> bool:
        """Outer points p q^2 z_j: no integrand of the construction has a pole there."""
        return self.family == "outer" and self.shell == 1


@dataclass(frozen=True)
class ContourSpec:
    radius: float
    nodes: int
    corrections: tuple[Correction, ...]
    params: ModelParams = field(repr=False)
    small_nodes: int = SMALL_NODES

    @property
    def inside_corrections(self) -> list[complex]:
        return [c.point for c in self.corrections if c.sign > 0]

    @property
    def outside_corrections(self) -> list[complex]:
        return [c.point for c in self.corrections if c.sign < 0]

    def with_nodes(self, nodes: int) -> "ContourSpec":
        return ContourSpec(self.radius, nodes, self.corrections, self.params, self.small_nodes)

    def rule(self, skip_regular: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Nodes x_k and weights w_k with (1/2 pi i) int_C g dt = sum_k w_k g(x_k)."""
        th = np.exp(2j * np.pi * (np.arange(self.nodes) + 0.5) / self.nodes)
        xs = [self.radius * th]
        ws = [self.radius * th / self.nodes]
        u = np.exp(2j * np.pi * (np.arange(self.small_nodes) + 0.5) / self.small_nodes)
        for c in self.corrections:
            if skip_regular and c.never_singular:
                continue
            xs.append(c.point + c.radius * u)
            ws.append(c.sign * c.radius * u / self.small_nodes)
        return np.concatenate(xs), np.concatenate(ws)


def _families(params: ModelParams, lo: float, hi: float):
    """Inner/outer family points with modulus in [lo, hi]."""
    p, q = params.p, params.q
    ap = abs(p)
    out = []
    for j, zj in enumerate(params.z, start=1):
        az = abs(zj)
        # inner p^-k z_j, k <= 1  <=>  p^s z_j with s = -k >= -1
        s_max = int(math.ceil(math.log(lo / az) / math.log(ap))) + 1
        for s in range(-1, max(s_max, -1) + 1):
            P = p**s * zj
            if lo <= abs(P) <= hi:
                out.append(("inner", -s, j, P))
        # outer p^k q^2 z_j, k <= 1
        k_min = int(math.floor(math.log(hi / abs(q**2 * zj)) / math.log(ap))) - 1
        for k in range(min(k_min, 1), 2):
            P = p**k * q**2 * zj
            if lo <= abs(P) <= hi:
                out.append(("outer", k, j, P))
    return out


def _choose_radius(params: ModelParams) -> float:
    lo, hi = params.contour_interval()
    if lo < hi:
        return math.sqrt(lo * hi)
    # widest radial gap among the candidate points; fewest corrections on ties
    mods = np.abs(params.zarr)
    pts = _families(params, float(mods.min()) * abs(params.p) ** 2, float(mods.max()) / abs(params.p) ** 2)
    logs = np.sort(np.log([abs(P) for *_, P in pts]))
    best = None
    for a, b in zip(logs, logs[1:]):
        r = math.exp((a + b) / 2)
        ncorr = sum(1 for fam, _, _, P in pts if (fam == "inner") == (abs(P) > r))
        key = (round(b - a, 6), -ncorr)
        if best is None or key > best[0]:
            best = (key, r)
    return best[1]


def contour_spec(params: ModelParams, radius: float | None = None, nodes: int = DEFAULT_NODES) -> ContourSpec:
    """Circle plus corrections separating the inner and outer pole families."""
    r = _choose_radius(params) if radius is None else float(radius)
    mods = np.abs(params.zarr)
    near = _families(params, min(r, float(mods.min())) * abs(params.p) ** 3,
                     max(r, float(mods.max())) / abs(params.p) ** 3)
    allpts = np.array([P for *_, P in near])
    if np.min(np.abs(np.abs(allpts) - r)) < 1e-3 * r:
        raise QuadratureError(f"radius {r} passes within 1e-3 r of a pole candidate")
    corr = []
    for fam, k, j, P in near:
        outside = abs(P) > r
        if (fam == "inner") != outside:
            continue
        others = [abs(P - Q) for Q in allpts if abs(P - Q) > 1e-12 * abs(P)]
        d = min(others + [abs(P)])
        corr.append(Correction(complex(P), 1 if fam == "inner" else -1, SMALL_FRAC * d, fam, k, j))
    corr.sort(key=lambda c: (c.family, c.shell, c.site))
    return ContourSpec(r, nodes, tuple(corr), params)


def default_contour(params: ModelParams) -> ContourSpec:
    lo, hi = params.contour_interval()
    if not lo < hi:
        raise QuadratureError(f"no admissible radius: interval ({lo:.4g}, {hi:.4g}) is empty")
    return contour_spec(params)


@dataclass(frozen=True)
class PairResult:
    value: complex
    scale: float
    nodes: int
    history: tuple[tuple[int, float], ...]
    correction_mass: tuple[tuple[str, int, int, complex], ...]


def _integrand(f: Callable, F: Callable, params: ModelParams) -> Callable:
    return lambda t: phase(t, params) * f(t) * F(t) / t


def pair_integral(f: RationalFn | Callable, F: EllipticFn | Callable, spec: ContourSpec,
                  tol: float = REL_TOL, detail: bool = False):
    """I(f, F) = (1/2 pi i) int_C phi f F dt/t with N doubled until stable."""
    h = _integrand(f, F, spec.params)
    history = []
    prev = None
    s = spec
    while True:
        x, w = s.rule()
        vals = h(x) * w
        value = complex(np.sum(vals))
        scale = float(np.sum(np.abs(vals)))
        if prev is not None:
            err = abs(value - prev)
            history.append((s.nodes, err / max(scale, 1e-300)))
            if err <= tol * scale:
                break
        if s.nodes >= MAX_NODES:
            raise QuadratureError(f"no convergence up to N = {s.nodes}: history {history}")
        prev = value
        s = s.with_nodes(s.nodes * 2)
    if not detail:
        return value
    masses = []
    u = np.exp(2j * np.pi * (np.arange(s.small_nodes) + 0.5) / s.small_nodes)
    for c in s.corrections:
        xs = c.point + c.radius * u
        masses.append((c.family, c.shell, c.site, complex(c.sign * np.sum(h(xs) * c.radius * u) / s.small_nodes)))
    return PairResult(value, scale, s.nodes, tuple(history), tuple(masses))


def convergence_history(f, F, spec: ContourSpec, sizes: Sequence[int] = (8, 16, 32, 64, 128, 256, 512)) -> list[tuple[int, float]]:
    """|I_N - I_ref| / scale for a range of circle sizes (reference: 2 max(sizes))."""
    h = _integrand(f, F, spec.params)
    x, w = spec.with_nodes(2 * max(sizes)).rule()
    v = h(x) * w
    ref, scale = complex(np.sum(v)), float(np.sum(np.abs(v)))
    out = []
    for N in sizes:
        x, w = spec.with_nodes(N).rule()
        out.append((N, abs(complex(np.sum(h(x) * w)) - ref) / scale))
    return out


def pair_integral_multi(w: MultiEvaluator | Callable, W: WFamily | Sequence[Callable], spec: ContourSpec,
                        arity: int | None = None, tol: float = 1e-9, check: bool = True,
                        skip_regular: bool = True, detail: bool = False):
    """I^l(w, W) for product W, as the tensor product of the one-variable rule.

    With ``check`` the value is recomputed with half the circle nodes and a
    disagreement above ``tol`` relative to the integrand scale raises.
    ``detail`` returns ``(value, scale)`` with scale the sum of |w_k g(x_k)|.
    """
    factors = W.factors if isinstance(W, WFamily) else tuple(W)
    k = arity or (w.arity if isinstance(w, MultiEvaluator) else len(factors))
    if len(factors) != k:
        raise ValueError(f"arity mismatch: {k} variables, {len(factors)} factors")

    def run(s: ContourSpec) -> tuple[complex, float]:
        x, wt = s.rule(skip_regular=skip_regular)
        ph = phase(x, s.params) * wt / x
        cols = [ph * F(x) for F in factors]
        return _tensor_contract(w, x, cols)

    value, scale = run(spec)
    if check:
        half, _ = run(spec.with_nodes(spec.nodes // 2))
        if abs(value - half) > tol * scale:
            raise QuadratureError(f"multivariable pairing unstable: {value} vs {half} (scale {scale:.3g})")
    return (value, scale) if detail else value


def _tensor_contract(w: Callable, x: np.ndarray, cols: Sequence[np.ndarray]) -> tuple[complex, float]:
    k = len(cols)
    if k == 0:
        v = complex(w())
        return v, abs(v)
    if k == 1:
        vals = w(x) * cols[0]
        return complex(np.sum(vals)), float(np.sum(np.abs(vals)))
    # loop over all but the last two variables, vectorize those two
    total, scale = 0j, 0.0
    m = len(x)
    xa, xb = x[:, None], x[None, :]
    ca, cb = cols[-2], cols[-1]
    for idx in itertools.product(range(m), repeat=k - 2):
        pre = [np.full((1, 1), x[i]) for i in idx]
        coef = np.prod([cols[a][i] for a, i in enumerate(idx)]) if idx else 1.0
        grid = w(*pre, xa, xb)
        vals = grid * ca[:, None] * cb[None, :] * coef
        total += complex(np.sum(vals))
        scale += float(np.sum(np.abs(vals)))
    return total, scale


def residue_series_oracle(f: RationalFn, F: EllipticFn, params: ModelParams, max_shells: int = 60,
                          rel: float = 1e-15) -> complex:
    """I(f, F) as the sum of residues at the inner poles p^s z_j, s >= -1.

    Needs f(t) = O(t) at t = 0, so that the accumulation point contributes
    nothing; the shell sums must decay geometrically.
    """
    if f.order_at_zero() < 1:
        raise ValueError("residue series needs f(t) = O(t) as t -> 0")
    p = params.p
    total = 0j
    shells = []
    for s in range(-1, max_shells):
        shell = 0j
        for j, zj in enumerate(params.z, start=1):
            P = p**s * zj
            if s <= 0:
                # phi has a simple zero: only a joint pole of f and F survives
                rf, rF = residue_at(f, P), F.residue(P)
                if rf and rF:
                    shell += phase_zero_slope(params, j, -s) * rf * rF / P
            else:
                rF = F.residue(P)
                if rF:
                    shell += complex(phase(P, params)) * complex(f(P)) * rF / P
        total += shell
        shells.append(abs(shell))
        if s >= 2 and max(shells[-2:]) <= rel * max(abs(total), max(shells)):
            return total
    tail = shells[-5:]
    raise QuadratureError(f"residue series shows no decay within {max_shells} shells (last {tail})")
