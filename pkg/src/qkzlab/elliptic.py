"""q-series, theta functions and the quasi-periodic function spaces.

All products are truncated at the first K with |p|^K |u| / (1 - |p|) below
``TAIL``, which bounds the relative tail of the infinite product.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .params import ModelParams

TAIL = 1e-17
FAR_SHELL = 8
DEFAULT_C = cmath.exp(1j * np.pi / 7)


class EllipticError(ValueError):
    pass


def _p(p) -> complex:
    return p.p if isinstance(p, ModelParams) else complex(p)


def truncation(u, p: complex, tail: float = TAIL) -> int:
    """Number of factors K with |p|^K max|u| / (1-|p|) < tail."""
    ap = abs(p)
    umax = float(np.max(np.abs(u))) if np.size(u) else 0.0
    if umax == 0:
        return 1
    K = int(np.ceil(np.log(tail * (1 - ap) / umax) / np.log(ap)))
    return max(K, 1)


def qpochhammer_inf(u, p, tail: float = TAIL):
    """(u; p)_inf = prod_{s >= 0} (1 - p^s u)."""
    p = _p(p)
    u = np.asarray(u, dtype=complex)
    K = truncation(u, p, tail)
    out = np.ones_like(u)
    ps = 1.0 + 0j
    for _ in range(K):
        out = out * (1 - ps * u)
        ps *= p
    return out


def theta(u, p):
    """theta(u) = (u)_inf (p/u)_inf (p)_inf."""
    p = _p(p)
    u = np.asarray(u, dtype=complex)
    if np.any(u == 0):
        raise EllipticError("theta is undefined at u = 0")
    return qpochhammer_inf(u, p) * qpochhammer_inf(p / u, p) * qpochhammer_inf(p, p)


def log_derivative_E(u, p, tail: float = TAIL):
    """E(u) = u theta'(u) / theta(u); satisfies E(u/p) = E(u) + 1."""
    p = _p(p)
    u = np.asarray(u, dtype=complex)
    K = truncation(np.concatenate([np.ravel(u), np.ravel(p / u)]), p, tail)
    out = np.zeros_like(u)
    ps = 1.0 + 0j
    for _ in range(K):
        a = ps * u
        b = ps * p / u
        out = out - a / (1 - a) + b / (1 - b)
        ps *= p
    return out


def big_theta(t, params: ModelParams):
    """Theta(t) = t^(-n/2) prod_j theta(q^-2 t/z_j) / theta(t/z_j), n even."""
    if params.n % 2:
        raise EllipticError("Theta is defined for even n only")
    t = np.asarray(t, dtype=complex)
    out = t ** (-(params.n // 2))
    for zj in params.z:
        out = out * theta(t / (params.q**2 * zj), params.p) / theta(t / zj, params.p)
    return out


def phase(t, params: ModelParams):
    """phi(t) = prod_j (t/z_j)_inf / (q^-2 t/z_j)_inf."""
    t = np.asarray(t, dtype=complex)
    out = np.ones_like(t)
    for zj in params.z:
        out = out * qpochhammer_inf(t / zj, params.p) / qpochhammer_inf(t / (params.q**2 * zj), params.p)
    return out


def phase_zero_slope(params: ModelParams, j: int, s: int) -> complex:
    """phi'(t) at its simple zero t = p^-s z_j (s >= 0, j 1-based)."""
    p, q, z = params.p, params.q, params.z
    P = z[j - 1] / p**s
    rest = 1.0 + 0j
    for i, zi in enumerate(z, start=1):
        num = qpochhammer_inf(P / zi, p)
        if i == j:
            # drop the vanishing factor (1 - p^s P / z_j)
            num = 1.0 + 0j
            pk = 1.0 + 0j
            for k in range(truncation(P / zi, p)):
                if k != s:
                    num *= 1 - pk * P / zi
                pk *= p
        rest *= num / qpochhammer_inf(P / (q**2 * zi), p)
    return complex(-(p**s) / z[j - 1] * rest)


def theta_pole_residue(m: int, zj: complex, p: complex) -> complex:
    """Residue of 1/theta(t/z_j) at t = p^m z_j."""
    return complex(-((-1) ** m) * p ** (m * (m + 1) // 2) * zj / qpochhammer_inf(p, p) ** 3)


@dataclass(frozen=True)
class EllipticFn:
    """F(t) = numer(t) / prod_{j in sites} theta(t/z_j).

    ``multiplier`` and ``discrepancy`` declare F(pt) = multiplier F(t) - discrepancy Theta(t).
    """

    numer: Callable = field(repr=False)
    sites: tuple[int, ...]
    params: ModelParams = field(repr=False)
    multiplier: complex = 1.0
    discrepancy: complex = 0.0
    label: str = ""

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        out = self.numer(t) * np.ones_like(t)
        for j in self.sites:
            out = out / theta(t / self.params.z[j - 1], self.params.p)
        return out

    def pole_orbit(self, point: complex) -> tuple[int, int] | None:
        """(j, m) if point = p^m z_j for a declared site j, else None."""
        p = self.params.p
        for j in self.sites:
            zj = self.params.z[j - 1]
            m = int(round(np.log(abs(point / zj)) / np.log(abs(p))))
            if abs(p**m * zj - point) <= 1e-10 * abs(point):
                return j, m
        return None

    def residue(self, point: complex) -> complex:
        """Exact residue of F at a point of a declared pole orbit; zero elsewhere.

        Shells beyond ``FAR_SHELL`` overflow the theta products, so there the
        residue is carried from the base shell by the declared law
        F(p^m s) = multiplier^m F(s) - discrepancy S_m Theta(s).
        """
        hit = self.pole_orbit(point)
        if hit is None:
            return 0j
        j, m = hit
        if m > FAR_SHELL:
            return self._far_residue(j, m)
        return self._shell_residue(j, m)

    def _far_residue(self, j: int, m: int) -> complex:
        p = self.params.p
        lam = complex(self.multiplier)
        out = lam**m * self._shell_residue(j, 0)
        if self.discrepancy:
            th = theta_fn(self.params)
            mu = complex(th.multiplier)
            s_m = sum(lam ** (m - 1 - i) * mu**i for i in range(m))
            out -= self.discrepancy * s_m * th._shell_residue(j, 0)
        return p**m * out

    def _shell_residue(self, j: int, m: int) -> complex:
        p, z = self.params.p, self.params.z
        P = p**m * z[j - 1]
        val = complex(self.numer(np.asarray(P, dtype=complex)))
        for i in self.sites:
            if i != j:
                val /= complex(theta(P / z[i - 1], p))
        return val * theta_pole_residue(m, z[j - 1], p)

    def check_quasiperiodic(self, ts: Sequence[complex]) -> float:
        """Max relative defect of F(pt) = multiplier F(t) - discrepancy Theta(t)."""
        ts = np.asarray(ts, dtype=complex)
        lhs = self(self.params.p * ts)
        rhs = self.multiplier * self(ts)
        if self.discrepancy:
            rhs = rhs - self.discrepancy * big_theta(ts, self.params)
        return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), np.abs(rhs))))


def constant_one(params: ModelParams) -> EllipticFn:
    return EllipticFn(lambda t: np.ones_like(t), (), params, 1.0, 0.0, "1")


def b_fn(j: int, params: ModelParams) -> EllipticFn:
    """B_j(t) = theta(t/(alpha z_j)) / theta(t/z_j), multiplier alpha."""
    a, zj, p = params.alpha, params.z[j - 1], params.p
    return EllipticFn(lambda t: theta(t / (a * zj), p), (j,), params, a, 0.0, f"B{j}")


def c_fn(j: int, params: ModelParams, c: complex = DEFAULT_C) -> EllipticFn:
    """C_j(t) = theta(c t/z_j) theta(t/(c z_{j+1})) / (theta(t/z_j) theta(t/z_{j+1})), multiplier 1."""
    if not 1 <= j < params.n:
        raise EllipticError(f"C_j needs 1 <= j < n, got {j}")
    z, p = params.z, params.p
    num = lambda t: theta(c * t / z[j - 1], p) * theta(t / (c * z[j]), p)  # noqa: E731
    return EllipticFn(num, (j, j + 1), params, 1.0, 0.0, f"C{j}")


def theta_fn(params: ModelParams) -> EllipticFn:
    """Theta as an EllipticFn (multiplier 1 at level zero)."""
    n, q, p = params.n, params.q, params.p
    if n % 2:
        raise EllipticError("Theta is defined for even n only")

    def num(t):
        out = t ** (-(n // 2))
        for zj in params.z:
            out = out * theta(t / (q**2 * zj), p)
        return out

    mult = p ** (-(n // 2)) * q ** (2 * n)
    return EllipticFn(num, tuple(range(1, n + 1)), params, mult, 0.0, "Theta")


def e_hat_fn(params: ModelParams, anchor: int = 1) -> EllipticFn:
    """E(t/(q^2 z_anchor)) Theta(t); discrepancy 1."""
    th = theta_fn(params)
    zq = params.q**2 * params.z[anchor - 1]
    num = lambda t: log_derivative_E(t / zq, params.p) * th.numer(t)  # noqa: E731
    return EllipticFn(num, th.sites, params, 1.0, 1.0, "Ehat" if anchor == 1 else f"Ehat{anchor}")


def is_alpha_one(params: ModelParams) -> bool:
    return abs(params.alpha - 1) < 1e-12


def space_basis(space: str, params: ModelParams, c: complex = DEFAULT_C, certify: bool = True) -> list[EllipticFn]:
    """Constructed basis of F_ell ('f_ell') or of the extension F_hat ('f_hat')."""
    if space not in ("f_ell", "f_hat"):
        raise ValueError(space)
    if space == "f_hat" and (params.n % 2 or not is_alpha_one(params)):
        raise EllipticError("F_hat is built for even n and alpha = 1 only")
    if is_alpha_one(params):
        basis = [constant_one(params)] + [c_fn(j, params, c) for j in range(1, params.n)]
    else:
        basis = [b_fn(j, params) for j in range(1, params.n + 1)]
    if space == "f_hat":
        basis.append(e_hat_fn(params))
    if certify:
        ratio = independence_ratio(basis, params)
        if ratio <= 1e-8:
            raise EllipticError(f"basis is numerically dependent (singular value ratio {ratio:.2e})")
    return basis


def probe_points(params: ModelParams, count: int, seed: int = 7) -> np.ndarray:
    """Generic points in 0.5 <= |t|/|z| <= 2 away from z_j."""
    rng = np.random.default_rng(seed)
    scale = float(np.mean(np.abs(params.zarr)))
    out = []
    while len(out) < count:
        t = scale * np.exp(rng.uniform(np.log(0.5), np.log(2.0))) * np.exp(2j * np.pi * rng.uniform())
        if np.min(np.abs(t - params.zarr)) > params.eta * scale:
            out.append(t)
    return np.array(out)


def independence_ratio(basis: Sequence[EllipticFn], params: ModelParams) -> float:
    pts = probe_points(params, len(basis) + 1, seed=11)
    mat = np.array([[F(t) for F in basis] for t in pts])
    s = np.linalg.svd(mat, compute_uv=False)
    return float(s[-1] / s[0])


def discrepancy(F: EllipticFn, params: ModelParams | None = None, probes: int = 10, tol: float = 1e-9) -> complex:
    """The constant d with F(t) - F(pt) = d Theta(t), measured and checked for constancy."""
    params = params or F.params
    if params.n % 2 or not is_alpha_one(params):
        raise EllipticError("discrepancy is defined for even n and alpha = 1")
    ts = probe_points(params, probes, seed=3)
    th = big_theta(ts, params)
    vals = (F(ts) - F(params.p * ts)) / th
    scale = max(np.max(np.abs(F(ts))) / np.min(np.abs(th)), 1.0)
    if np.max(np.abs(vals - vals[0])) > tol * scale:
        raise EllipticError(f"{F.label}: (F(t) - F(pt))/Theta(t) is not constant; F is not in F_hat")
    d = complex(np.mean(vals))
    return 0j if abs(d) < tol * scale else d


# -- W families -------------------------------------------------------------------

FAMILY_TAGS = ("generic_alpha", "alpha_one", "alpha_one_hat")


def _build_factor(token: str, params: ModelParams, c: complex) -> EllipticFn:
    if token == "one":
        return constant_one(params)
    if token == "theta":
        return theta_fn(params)
    if token.startswith("hat"):
        return e_hat_fn(params, hat_anchor(token))
    kind, idx = token[0], int(token[1:])
    if kind == "B":
        return b_fn(idx, params)
    if kind == "C":
        return c_fn(idx, params, c)
    raise ValueError(f"unknown factor token {token!r}")


def hat_anchor(token: str) -> int:
    """'hat' anchors Ehat at z_1, 'hat<k>' at z_k."""
    return int(token[3:]) if len(token) > 3 else 1


def _declared_rho(tokens: Sequence[str], params: ModelParams, c: complex) -> list[complex | None]:
    rho: list[complex | None] = [1.0 + 0j] * params.n
    for tok in tokens:
        if tok.startswith("B"):
            k = int(tok[1:])
            rho[k - 1] = rho[k - 1] / params.alpha
        elif tok.startswith("C"):
            j = int(tok[1:])
            rho[j - 1] = rho[j - 1] * c
            rho[j] = rho[j] / c
        elif tok == "theta" or tok.startswith("hat"):
            rho = [None if r is None else r / params.q**2 for r in rho]
            if tok.startswith("hat"):
                rho[hat_anchor(tok) - 1] = None
    return rho


@dataclass(frozen=True)
class WFamily:
    """Product W(t_1..t_l) = W_1(t_1)...W_l(t_l) built from named basis functions."""

    tag: str
    tokens: tuple[str, ...]
    params: ModelParams = field(repr=False)
    c: complex = DEFAULT_C
    factors: tuple[EllipticFn, ...] = field(default=(), repr=False)
    rho: tuple[complex | None, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.tokens)

    def at(self, params: ModelParams) -> "WFamily":
        """The same closed-form family at other parameters (e.g. a shifted z)."""
        return w_family(self.tag, self.tokens, params, c=self.c, verify=False)

    def __call__(self, *t):
        out = 1.0
        for F, ta in zip(self.factors, t):
            out = out * F(ta)
        return out


def w_family(tag: str, tokens: Sequence[str], params: ModelParams, c: complex = DEFAULT_C,
             verify: bool = True) -> WFamily:
    tokens = tuple(tokens)
    if tag not in FAMILY_TAGS:
        raise ValueError(f"unknown family tag {tag!r}")
    if tag == "generic_alpha":
        if not all(t.startswith("B") for t in tokens):
            raise EllipticError("generic_alpha families use B_j factors only")
        if len(set(tokens)) != len(tokens):
            raise EllipticError("generic_alpha factors must be distinct")
    else:
        if not is_alpha_one(params):
            raise EllipticError(f"{tag} requires alpha = 1")
        allowed = ("one", "theta", "hat") if tag == "alpha_one_hat" else ("one",)
        for i, t in enumerate(tokens):
            if not (t.startswith("C") or t in allowed or (t.startswith("hat") and "hat" in allowed)):
                raise EllipticError(f"factor {t!r} not allowed in {tag}")
            if t.startswith("hat") and i != len(tokens) - 1:
                raise EllipticError("Ehat may only occupy the last slot")
    factors = tuple(_build_factor(t, params, c) for t in tokens)
    rho = tuple(_declared_rho(tokens, params, c))
    fam = WFamily(tag, tokens, params, c, factors, rho)
    if verify:
        verify_covariance(fam)
    return fam


def measured_rho(fam: WFamily, j: int, probes: int = 10) -> tuple[complex, float]:
    """Ratio W(t; ..p z_j..)/W(t; z) at probe points: (mean, relative spread)."""
    shifted = fam.at(fam.params.shifted(j))
    pts = [probe_points(fam.params, probes, seed=20 + a) for a in range(fam.arity)]
    r = shifted(*pts) / fam(*pts)
    r = np.atleast_1d(r)
    mean = complex(np.mean(r))
    return mean, float(np.max(np.abs(r - mean)) / abs(mean))


def verify_covariance(fam: WFamily, tol: float = 1e-9) -> None:
    for j in range(1, fam.params.n + 1):
        declared = fam.rho[j - 1]
        if declared is None:
            continue
        mean, spread = measured_rho(fam, j)
        if spread > tol:
            raise EllipticError(f"covariance ratio for z_{j} is not constant (spread {spread:.2e})")
        if abs(mean - declared) > tol * abs(declared):
            raise EllipticError(f"covariance ratio for z_{j}: declared {declared}, measured {mean}")
