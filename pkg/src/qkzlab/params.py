"""Model parameters and index subsets shared by every layer."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates a named invariant."""

    def __init__(self, invariant: str, detail: str):
        super().__init__(f"{invariant}: {detail}")
        self.invariant = invariant
        self.detail = detail


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class ModelParams:
    """Level-zero qKZ data: q, site count n, weight ell, alpha and the points z.

    ``p`` and ``kappa`` are derived (p = q**4, kappa = alpha q**(2 ell - 2 - n)).
    Passing them explicitly is only meant for negative controls; such a
    parameter set fails the "level zero" check of :meth:`diagnostics`.
    """

    q: complex
    n: int
    ell: int
    z: tuple[complex, ...]
    alpha: complex = 1.0
    eta: float = 0.05
    p: complex | None = None
    kappa: complex | None = None
    _level_override: bool = field(default=False, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", complex(self.q))
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "z", tuple(complex(x) for x in self.z))
        if self.q == 0 or abs(self.q) >= 1:
            raise ParameterError("q range", f"need 0 < |q| < 1, got {self.q}")
        if self.n < 1:
            raise ParameterError("site count", f"n must be positive, got {self.n}")
        if not 0 <= self.ell <= self.n:
            raise ParameterError("weight range", f"need 0 <= ell <= n, got ell={self.ell}")
        if len(self.z) != self.n:
            raise ParameterError("point count", f"expected {self.n} points, got {len(self.z)}")
        if any(x == 0 for x in self.z):
            raise ParameterError("nonzero", "all z_j must be nonzero")
        if self.alpha == 0:
            raise ParameterError("alpha", "alpha must be nonzero")
        level = self.q**4
        object.__setattr__(self, "_level_override", self.p is not None and complex(self.p) != level)
        object.__setattr__(self, "p", level if self.p is None else complex(self.p))
        if self.kappa is None:
            object.__setattr__(self, "kappa", self.alpha * self.q ** (2 * self.ell - 2 - self.n))
        else:
            object.__setattr__(self, "kappa", complex(self.kappa))

    @property
    def zarr(self) -> np.ndarray:
        return np.asarray(self.z, dtype=complex)

    def with_z(self, z: Sequence[complex]) -> "ModelParams":
        """Same model at other points; an explicit kappa/p override is kept."""
        kappa = self.kappa if self.kappa_overridden else None
        p = self.p if self._level_override else None
        return replace(self, z=tuple(z), p=p, kappa=kappa)

    def shifted(self, j: int) -> "ModelParams":
        """The point set with z_j replaced by p z_j (j is 1-based)."""
        z = list(self.z)
        z[j - 1] = self.p * z[j - 1]
        return self.with_z(z)

    @property
    def kappa_overridden(self) -> bool:
        return not np.isclose(self.kappa, self.alpha * self.q ** (2 * self.ell - 2 - self.n), rtol=1e-15, atol=0)

    def contour_interval(self) -> tuple[float, float]:
        """Radii between |p| max|z_j| and |q|^2 min|z_j| (|p| = |q|^4 at level zero)."""
        mod = np.abs(self.zarr)
        aq = abs(self.q)
        return abs(self.p) * float(mod.max()), aq**2 * float(mod.min())

    def diagnostics(self) -> list[Check]:
        z = self.zarr
        q, p = self.q, self.p
        scale = float(np.abs(z).max())
        out = [
            Check("level zero", bool(np.isclose(p, q**4, rtol=1e-15, atol=0)), f"p={p}, q^4={q**4}"),
            Check("|p| < 1", abs(p) < 1, f"|p|={abs(p):.6g}"),
        ]
        diffs = [abs(z[i] - z[j]) for i in range(self.n) for j in range(i + 1, self.n)]
        gap = min(diffs) if diffs else np.inf
        out.append(Check("distinctness", bool(gap >= self.eta * scale),
                         f"min |z_i - z_j| = {gap:.3g}, need >= {self.eta * scale:.3g}"))
        reson = min(abs(q**s * z[i] - z[j]) / scale for i in range(self.n) for j in range(self.n) for s in (2, -2))
        out.append(Check("q^2 nonresonance", bool(reson > 1e-8), f"min |q^(+-2) z_i - z_j| / max|z| = {reson:.3g}"))
        worst = np.inf
        for m, s in itertools.product(range(-2, 3), repeat=2):
            d = np.abs(p**m * z[:, None] - q**2 * p**s * z[None, :]) / np.abs(p**m * z[:, None])
            worst = min(worst, float(d.min()))
        out.append(Check("pole-orbit disjointness", bool(worst > 1e-8), f"min relative gap = {worst:.3g}"))
        lo, hi = self.contour_interval()
        out.append(Check("contour feasibility", bool(lo < hi), f"radius interval ({lo:.6g}, {hi:.6g})"))
        return out

    def validate(self) -> "ModelParams":
        for c in self.diagnostics():
            if not c.ok:
                raise ParameterError(c.name, c.detail)
        return self


@dataclass(frozen=True, order=True)
class IndexSubset:
    """A subset {m_1 < ... < m_k} of {1..n}, 1-based."""

    members: tuple[int, ...]

    def __post_init__(self) -> None:
        m = tuple(int(x) for x in self.members)
        if any(a >= b for a, b in zip(m, m[1:])):
            raise ValueError(f"subset members must be strictly increasing: {m}")
        if m and m[0] < 1:
            raise ValueError(f"subset members are 1-based: {m}")
        object.__setattr__(self, "members", m)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, k: object) -> bool:
        return k in self.members

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"

    def le(self, other: "IndexSubset") -> bool:
        """Componentwise order: same size and m_a <= n_a for every a."""
        return len(self) == len(other) and all(a <= b for a, b in zip(self.members, other.members))

    def comparable(self, other: "IndexSubset") -> bool:
        return self.le(other) or other.le(self)

    def complement(self, n: int) -> "IndexSubset":
        if self.members and self.members[-1] > n:
            raise ValueError(f"{self} is not a subset of 1..{n}")
        return IndexSubset(tuple(k for k in range(1, n + 1) if k not in self.members))

    def lam(self, k: int) -> int:
        return sum(1 for m in self.members if m < k)

    def union(self, k: int) -> "IndexSubset":
        if k in self.members:
            raise ValueError(f"{k} already in {self}")
        return IndexSubset(tuple(sorted(self.members + (k,))))

    def point(self, z: Sequence[complex]) -> tuple[complex, ...]:
        return tuple(z[m - 1] for m in self.members)


def subsets(n: int, ell: int) -> list[IndexSubset]:
    """All ell-subsets of 1..n in colexicographic order."""
    combos = itertools.combinations(range(1, n + 1), ell)
    return [IndexSubset(c) for c in sorted(combos, key=lambda c: c[::-1])]


def extremal(ell: int) -> IndexSubset:
    return IndexSubset(tuple(range(1, ell + 1)))


def default_points(n: int, seed: int = 0, noise: float = 0.05) -> tuple[complex, ...]:
    """Roots of unity exp(2 pi i j / n) with seeded complex noise of the given size."""
    rng = np.random.default_rng(seed)
    base = np.exp(2j * np.pi * np.arange(1, n + 1) / n)
    kick = noise * rng.uniform(0, 1, n) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    return tuple(complex(x) for x in base + kick)
