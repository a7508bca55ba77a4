"""Tensor algebra of V^{(x)n}: R-matrix, qKZ operators, U_q(sl2) action.

Basis convention: the state v_{e_1} (x) ... (x) v_{e_n} has index
sum_j b_j 2^(n-j) with b_j = 1 iff e_j = '-', so site 1 is the most
significant bit. A subset M of minus-sites is therefore the index
sum_{m in M} 2^(n-m).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .params import IndexSubset, ModelParams, subsets


class SingularArgumentError(ValueError):
    """An R-matrix was requested at its pole z = q^-2."""

    def __init__(self, msg: str, pair: tuple[int, int] | None = None):
        super().__init__(msg)
        self.pair = pair


SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
TAU_PLUS = np.array([[1, 0], [0, 0]], dtype=complex)
TAU_MINUS = np.array([[0, 0], [0, 1]], dtype=complex)
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def state_index(M: IndexSubset | Sequence[int], n: int) -> int:
    return sum(1 << (n - m) for m in M)


def weight_of_index(idx: int) -> int:
    return bin(idx).count("1")


@dataclass(frozen=True)
class TensorVector:
    """Coefficients over the 2^n product basis, optionally declared of weight ell."""

    coeffs: np.ndarray
    n: int
    weight: int | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} coefficients, got shape {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.weight is not None:
            off = [i for i in np.flatnonzero(c) if weight_of_index(int(i)) != self.weight]
            if off:
                raise ValueError(f"declared weight {self.weight} but support includes index {off[0]}")

    @classmethod
    def zeros(cls, n: int, weight: int | None = None) -> "TensorVector":
        return cls(np.zeros(2**n, dtype=complex), n, weight)

    @classmethod
    def from_subsets(cls, n: int, coeffs: Mapping[IndexSubset, complex]) -> "TensorVector":
        c = np.zeros(2**n, dtype=complex)
        sizes = {len(M) for M in coeffs}
        for M, x in coeffs.items():
            c[state_index(M, n)] += x
        return cls(c, n, sizes.pop() if len(sizes) == 1 else None)

    def __getitem__(self, M: IndexSubset) -> complex:
        return complex(self.coeffs[state_index(M, self.n)])

    def __add__(self, other: "TensorVector") -> "TensorVector":
        w = self.weight if self.weight == other.weight else None
        return TensorVector(self.coeffs + other.coeffs, self.n, w)

    def __sub__(self, other: "TensorVector") -> "TensorVector":
        return self + other.scale(-1)

    def scale(self, c: complex) -> "TensorVector":
        return TensorVector(c * self.coeffs, self.n, self.weight)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def restrict(self, ell: int) -> np.ndarray:
        """Coefficients on the weight-ell block, ordered like ``subsets(n, ell)``."""
        return np.array([self[M] for M in subsets(self.n, ell)])


# -- R-matrix and qKZ operators ---------------------------------------------

def r_matrix(zratio: complex, params: ModelParams) -> np.ndarray:
    """4x4 trigonometric R-matrix R(z) in the basis ++, +-, -+, --."""
    q = params.q
    den = q * zratio - 1 / q
    if abs(den) <= 1e-14 * max(1.0, abs(q * zratio)):
        raise SingularArgumentError(f"R(z) has a pole at z = q^-2; got z = {zratio}")
    diag = (zratio - 1) / den
    cross = (q - 1 / q) / den
    R = np.zeros((4, 4), dtype=complex)
    R[0, 0] = R[3, 3] = 1
    R[1, 1] = R[2, 2] = diag
    R[1, 2] = zratio * cross  # sigma+ (x) sigma-: v- (x) v+  ->  v+ (x) v-
    R[2, 1] = cross  # sigma- (x) sigma+
    return R


def r21(zratio: complex, params: ModelParams) -> np.ndarray:
    return SWAP @ r_matrix(zratio, params) @ SWAP


def embed(op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Dense 2^n matrix acting with ``op`` on the listed 1-based sites, in that order."""
    k = len(sites)
    T = np.asarray(op, dtype=complex).reshape((2,) * (2 * k))
    eye = np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,))
    axes = [s - 1 for s in sites]
    out = np.tensordot(T, eye, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(2**n, 2**n)


def k_operator(j: int, params: ModelParams, kappa: complex | None = None) -> np.ndarray:
    """K_j = R_{j,j-1}(p z_j/z_{j-1})...R_{j,1}(p z_j/z_1) (tau+_j + kappa tau-_j) R_{j,n}(z_j/z_n)...R_{j,j+1}(z_j/z_{j+1})."""
    n, z, p = params.n, params.z, params.p
    kappa = params.kappa if kappa is None else kappa
    if not 1 <= j <= n:
        raise ValueError(f"site index {j} outside 1..{n}")

    def factor(i: int, arg: complex) -> np.ndarray:
        try:
            return embed(r_matrix(arg, params), (j, i), n)
        except SingularArgumentError as exc:
            raise SingularArgumentError(f"R_{{{j},{i}}} argument {arg} hits the pole q^-2", (j, i)) from exc

    K = np.eye(2**n, dtype=complex)
    for i in range(j - 1, 0, -1):
        K = K @ factor(i, p * z[j - 1] / z[i - 1])
    K = K @ embed(TAU_PLUS + kappa * TAU_MINUS, (j,), n)
    for i in range(n, j, -1):
        K = K @ factor(i, z[j - 1] / z[i - 1])
    return K


# -- U_q(sl2) action ---------------------------------------------------------

def _local(gen: str, q: complex) -> np.ndarray:
    return {
        "e": SIGMA_PLUS,
        "f": SIGMA_MINUS,
        "k": q * TAU_PLUS + TAU_MINUS / q,
        "kinv": TAU_PLUS / q + q * TAU_MINUS,
    }[gen]


def generator_matrix(gen: str, n: int, q: complex) -> np.ndarray:
    """n-fold coproduct of e, f or k (Delta(e) = k^-1 (x) e + e (x) 1, Delta(f) = f (x) k + 1 (x) f)."""
    if gen not in ("e", "f", "k"):
        raise ValueError(f"unknown generator {gen!r}")
    if gen == "k":
        return _kron_all([_local("k", q)] * n)
    total = np.zeros((2**n, 2**n), dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    for j in range(1, n + 1):
        if gen == "e":
            facs = [_local("kinv", q)] * (j - 1) + [SIGMA_PLUS] + [eye2] * (n - j)
        else:
            facs = [eye2] * (j - 1) + [SIGMA_MINUS] + [_local("k", q)] * (n - j)
        total += _kron_all(facs)
    return total


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def quantum_group_action(gen: str, v: TensorVector, params: ModelParams | complex) -> TensorVector:
    q = params.q if isinstance(params, ModelParams) else complex(params)
    shift = {"e": -1, "f": 1, "k": 0}[gen]
    w = None if v.weight is None else v.weight + shift
    if w is not None and not 0 <= w <= v.n:
        w = None
    return TensorVector(generator_matrix(gen, v.n, q) @ v.coeffs, v.n, w)


@dataclass(frozen=True)
class WeightReport:
    weights: tuple[int, ...]
    singular: bool
    trivial: bool
    defect: float


def weight_and_singular(v: TensorVector, params: ModelParams | complex, tol: float = 1e-9) -> WeightReport:
    """Nonzero weight components and whether ||e v|| <= tol ||v||."""
    c = v.coeffs
    norm = float(np.linalg.norm(c))
    if norm == 0:
        return WeightReport((), True, True, 0.0)
    present = sorted({weight_of_index(int(i)) for i in np.flatnonzero(np.abs(c) > tol * norm)})
    ev = quantum_group_action("e", v, params)
    defect = ev.norm() / norm
    return WeightReport(tuple(present), defect <= tol, False, defect)


def weight_projector(ell: int, n: int) -> np.ndarray:
    return np.diag([1.0 if weight_of_index(i) == ell else 0.0 for i in range(2**n)]).astype(complex)


# -- subset-indexed bases -----------------------------------------------------

ResidueTable = Callable[[IndexSubset, IndexSubset], complex]


def subset_basis_vector(kind: str, M: IndexSubset, params: ModelParams,
                        residues: ResidueTable | None = None) -> TensorVector:
    """v_M, its triangular partner tilde-v_M, or the rescaled bar-v_M.

    ``residues(N, M)`` must return Res w_N(z_M); when omitted it is computed
    by :func:`qkzlab.ratfun.residue_matrix`.
    """
    n = params.n
    if kind == "plain":
        return TensorVector.from_subsets(n, {M: 1.0})
    if residues is None:
        from .ratfun import residue_lookup

        residues = residue_lookup(params, len(M))
    coeffs = {N: residues(N, M) for N in subsets(n, len(M)) if M.le(N)}
    tilde = TensorVector.from_subsets(n, coeffs)
    if kind == "tilde":
        return tilde
    if kind == "bar":
        return tilde.scale(bar_prefactor(M, params))
    raise ValueError(f"unknown basis kind {kind!r}")


def bar_prefactor(M: IndexSubset, params: ModelParams) -> complex:
    q = params.q
    zm = M.point(params.z)
    out = 1.0 + 0j
    for a in range(len(zm)):
        for b in range(a + 1, len(zm)):
            den = (zm[a] / q**2 - zm[b]) * (zm[a] - zm[b] / q**2)
            if abs(den) < 1e-14 * abs(zm[a]) ** 2:
                raise SingularArgumentError(f"resonant pair ({M.members[a]}, {M.members[b]}) in bar prefactor")
            out *= (zm[a] - zm[b]) / den
    return out
