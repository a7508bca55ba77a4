"""Solutions Psi_W of the level-zero qKZ equation and the verification suites.

Psi_W is evaluated four ways:

* ``direct``: sum_M I(w_M, W) v_M with the l-fold pairing on a tensor grid;
* ``det``: sum_M det[I(mu_M^(m_a), W_b)] tilde-v_M;
* ``detQ``: the polynomial form with Q_M^(a) and the bar-v basis (alpha = 1, W_b in F_ell);
* ``det0``: the variant for 2l = n whose last factor carries a discrepancy.

qKZ step for a general covariance ratio. The solution theorem is stated for
families with W(..p z_j..) = q^-l W. If instead the ratio is a constant rho_j,
pick a scalar gamma(z) with gamma(..p z_j..)/gamma(z) = q^-l / rho_j, e.g.
gamma = prod_j z_j^(c_j) with p^(c_j) = q^-l / rho_j. Then gamma W has the
standard covariance, and Psi is linear in W, so
gamma(..p z_j..) Psi_W(..p z_j..) = gamma(z) K_j Psi_W(z), i.e.
Psi_W(..p z_j..) = rho_j q^l K_j(z) Psi_W(z).

The Ehat factor has no constant ratio at its anchor z_k: shifting z_k gives
Ehat -> q^-2 (Ehat + Theta). The Theta part is a family with last factor
Theta, whose Psi vanishes at the shifted point, so the step identity holds
with the effective ratio q^-2 times the ratios of the other factors. The
shift law itself is measured before it is used.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import algebra, elliptic, hyperint, ratfun
from .algebra import SingularArgumentError, TensorVector, k_operator, subset_basis_vector
from .elliptic import EllipticError, WFamily, discrepancy, is_alpha_one, space_basis, w_family
from .hyperint import ContourSpec, QuadratureError, contour_spec, pair_integral, pair_integral_multi
from .params import ModelParams, ParameterError, default_points, extremal, subsets
from .ratfun import PoleError, RationalFn

METHODS = ("direct", "det", "detQ", "det0")
PAIRS = ("direct-det", "det-detQ", "det-det0")
SUITES = ("rmatrix", "res_lemma", "d1", "contour", "oracle", "i0", "id", "xi", "extremal",
          "vanishing", "qm_identity", "equivalence", "qkz", "singular")

PASS, FAIL, INCONCLUSIVE, INFO = "pass", "fail", "inconclusive", "info"


class RequestError(ValueError):
    """A solution request violates the preconditions of its method."""


# -- reports ---------------------------------------------------------------------

@dataclass(frozen=True)
class CheckRecord:
    check: str
    anchor: str
    inputs: str
    error: float
    tol: float
    status: str
    kind: str = "identity"  # identity | control | info
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "anchor": self.anchor,
            "inputs": self.inputs,
            "error": _jsonable_float(self.error),
            "tol": self.tol,
            "status": self.status,
            "kind": self.kind,
            "note": self.note,
        }


def _jsonable_float(x: float):
    return x if math.isfinite(x) else str(x)


def digest(*items) -> str:
    """Short stable hash of the inputs of a check."""
    h = hashlib.sha256()
    for it in items:
        h.update(repr(it).encode())
        h.update(b"\x1f")
    return h.hexdigest()[:12]


def params_echo(params: ModelParams) -> dict:
    c = lambda x: [float(np.real(x)), float(np.imag(x))]  # noqa: E731
    return {
        "q": c(params.q), "p": c(params.p), "n": params.n, "ell": params.ell,
        "alpha": c(params.alpha), "kappa": c(params.kappa), "eta": params.eta,
        "z": [c(x) for x in params.z],
    }


@dataclass
class VerificationReport:
    """Records of one suite. Only ``timings`` varies between identical runs."""

    suite: str
    params: list[dict] = field(default_factory=list)
    seed: int | None = None
    records: list[CheckRecord] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def add(self, check: str, anchor: str, inputs: str, error: float, tol: float,
            kind: str = "identity", note: str = "") -> CheckRecord:
        """Identity records pass when error <= tol; controls pass when error > tol."""
        error = float(error)
        if kind == "info":
            status = INFO
        elif not math.isfinite(error):
            status = FAIL
        elif kind == "control":
            status = PASS if error > tol else FAIL
        else:
            status = PASS if error <= tol else FAIL
        rec = CheckRecord(check, anchor, inputs, error, tol, status, kind, note)
        self.records.append(rec)
        return rec

    def inconclusive(self, check: str, anchor: str, inputs: str, note: str) -> CheckRecord:
        rec = CheckRecord(check, anchor, inputs, float("nan"), 0.0, INCONCLUSIVE, "identity", note)
        self.records.append(rec)
        return rec

    def extend(self, other: "VerificationReport") -> None:
        self.params.extend(p for p in other.params if p not in self.params)
        self.records.extend(other.records)
        for k, v in other.timings.items():
            self.timings[k] = self.timings.get(k, 0.0) + v

    @property
    def status(self) -> str:
        states = {r.status for r in self.records}
        if FAIL in states:
            return FAIL
        if INCONCLUSIVE in states:
            return INCONCLUSIVE
        return PASS

    @property
    def max_error(self) -> float:
        errs = [r.error for r in self.records if r.kind == "identity" and r.status in (PASS, FAIL)]
        return max(errs) if errs else 0.0

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if r.status == FAIL]

    def to_dict(self) -> dict:
        """Deterministic content; timings are kept out and reported separately."""
        return {
            "schema": 1,
            "suite": self.suite,
            "status": self.status,
            "max_error": _jsonable_float(self.max_error),
            "seed": self.seed,
            "params": self.params,
            "records": [r.to_dict() for r in self.records],
        }


# -- solution requests -------------------------------------------------------------

@dataclass(frozen=True)
class SolutionRequest:
    params: ModelParams
    family: WFamily
    method: str = "det"
    contour: ContourSpec | None = None

    def spec(self) -> ContourSpec:
        return self.contour if self.contour is not None else contour_spec(self.params)

    def validate(self) -> None:
        p, fam = self.params, self.family
        if self.method not in METHODS:
            raise RequestError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if fam.arity != p.ell:
            raise RequestError(f"family has {fam.arity} factors, weight is {p.ell}")
        if self.method in ("direct", "det"):
            return
        if not is_alpha_one(p):
            raise RequestError(f"{self.method} requires alpha = 1")
        if self.method == "detQ":
            bad = [b + 1 for b, F in enumerate(fam.factors) if not in_f_ell(F, p)]
            if bad:
                raise RequestError(f"detQ requires every factor in F_ell; slots {bad} are not")
            return
        if 2 * p.ell != p.n:
            raise RequestError("det0 requires 2 ell = n")
        bad = [b + 1 for b, F in enumerate(fam.factors[:-1]) if not in_f_ell(F, p)]
        if bad:
            raise RequestError(f"det0 requires factors 1..ell-1 in F_ell; slots {bad} carry a discrepancy")


def in_f_ell(F: Callable, params: ModelParams, tol: float = 1e-9) -> bool:
    """F(pt) = alpha F(t), measured at probe points."""
    ts = elliptic.probe_points(params, 10, seed=5)
    lhs, rhs = F(params.p * ts), params.alpha * F(ts)
    return bool(np.max(np.abs(lhs - rhs)) <= tol * max(float(np.max(np.abs(rhs))), 1e-300))


@dataclass(frozen=True)
class PsiResult:
    vector: TensorVector
    scale: float
    correction_mass: float = 0.0
    min_pivot: float = math.inf


def det_pivot(A: np.ndarray) -> tuple[complex, float]:
    """Determinant by partial-pivot elimination, with the smallest pivot modulus."""
    A = np.array(A, dtype=complex)
    k = A.shape[0]
    if k == 0:
        return 1.0 + 0j, math.inf
    det, smallest = 1.0 + 0j, math.inf
    for c in range(k):
        r = c + int(np.argmax(np.abs(A[c:, c])))
        if r != c:
            A[[c, r]] = A[[r, c]]
            det = -det
        piv = A[c, c]
        smallest = min(smallest, abs(piv))
        if piv == 0:
            return 0j, 0.0
        det *= piv
        A[c + 1:] -= np.outer(A[c + 1:, c] / piv, A[c])
    return det, smallest


def _permanent(S: np.ndarray) -> float:
    k = S.shape[0]
    return float(sum(np.prod([S[a, s[a]] for a in range(k)]) for s in itertools.permutations(range(k))))


def _pair_matrix(fs: Sequence[Callable], Fs: Sequence[Callable], spec: ContourSpec):
    vals = np.zeros((len(fs), len(Fs)), dtype=complex)
    scales = np.zeros((len(fs), len(Fs)))
    mass = 0.0
    for a, f in enumerate(fs):
        for b, F in enumerate(Fs):
            r = pair_integral(f, F, spec, detail=True)
            vals[a, b], scales[a, b] = r.value, r.scale
            worst = max((abs(m[3]) for m in r.correction_mass), default=0.0)
            mass = max(mass, worst / max(r.scale, 1e-300))
    return vals, scales, mass


def evaluate(req: SolutionRequest) -> PsiResult:
    """Psi_W by the requested method, with an integral scale for vanishing checks."""
    req.validate()
    p, fam, spec = req.params, req.family, req.spec()
    n, ell, q = p.n, p.ell, p.q
    out = TensorVector.zeros(n, ell)
    scale, mass, pivot = 0.0, 0.0, math.inf

    if req.method == "direct":
        for M in subsets(n, ell):
            w = ratfun.w_evaluator("w", M, p)
            val, sc = pair_integral_multi(w, fam, spec, detail=True)
            out = out + subset_basis_vector("plain", M, p).scale(val)
            scale += sc
        return PsiResult(out, scale)

    if req.method == "det":
        for M in subsets(n, ell):
            mus = [ratfun.mu_fn(M, m, p) for m in M]
            A, S, m_ = _pair_matrix(mus, fam.factors, spec)
            d, piv = det_pivot(A)
            vt = subset_basis_vector("tilde", M, p)
            out = out + vt.scale(d)
            scale += vt.norm() * _permanent(S)
            mass, pivot = max(mass, m_), min(pivot, piv)
        return PsiResult(out, scale, mass, pivot)

    if req.method == "detQ":
        pref = (q**-2 - 1) ** (-ell)
        k = ell
        factors = fam.factors
    else:
        pref = (q**2 - q**4) ** (-ell) * discrepancy(fam.factors[-1], p)
        k = ell - 1
        factors = fam.factors[:-1]
    for M in subsets(n, ell):
        cM = 1.0 + 0j
        for kk in M.complement(n):
            for m in M:
                cM /= q**-2 * p.z[m - 1] - p.z[kk - 1]
        Qs = [ratfun.q_polynomial(M, a, p) for a in range(1, k + 1)]
        A, S, m_ = _pair_matrix(Qs, factors, spec)
        d, piv = det_pivot(A)
        vb = subset_basis_vector("bar", M, p)
        out = out + vb.scale(pref * cM * d)
        scale += abs(pref * cM) * vb.norm() * (_permanent(S) if k else 1.0)
        mass, pivot = max(mass, m_), min(pivot, piv)
    return PsiResult(out, scale, mass, pivot)


def psi(req: SolutionRequest) -> TensorVector:
    return evaluate(req).vector


def default_family(params: ModelParams, hat: bool | None = None) -> WFamily:
    """(B_1..B_l) at generic alpha, (C_1, C_3, ...) at alpha = 1; Ehat last when ``hat``.

    By default Ehat is used when 2l = n: then Psi_W = 0 for every W in
    F_ell^l (the determinant of the polynomial form has the zero row Q^(l)).
    """
    ell = params.ell
    if not is_alpha_one(params):
        return w_family("generic_alpha", [f"B{j}" for j in range(1, ell + 1)], params)
    toks = [f"C{2 * b + 1}" if 2 * b + 1 < params.n else f"C{b + 1}" for b in range(ell)]
    if hat is None:
        hat = 2 * ell == params.n
    if hat:
        return w_family("alpha_one_hat", toks[:-1] + ["hat"], params)
    return w_family("alpha_one", toks, params)


def rel_diff(a: TensorVector | np.ndarray, b: TensorVector | np.ndarray, floor: float = 0.0) -> float:
    """||a - b|| / max(||a||, ||b||, floor)."""
    a = a.coeffs if isinstance(a, TensorVector) else np.asarray(a)
    b = b.coeffs if isinstance(b, TensorVector) else np.asarray(b)
    den = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / den) if den else 0.0


def _rel_err(lhs, rhs) -> float:
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    den = np.maximum(np.abs(lhs), np.abs(rhs))
    den = np.where(den == 0, 1.0, den)
    return float(np.max(np.abs(lhs - rhs) / den))


def _new_report(suite: str, params: ModelParams, seed: int | None) -> VerificationReport:
    return VerificationReport(suite, [params_echo(params)], seed)


def _tag(params: ModelParams) -> str:
    a = params.alpha
    return f"alpha={a.real:g}{a.imag:+g}i"


def _off_weight(v: TensorVector, ell: int) -> float:
    mask = np.array([algebra.weight_of_index(i) != ell for i in range(2**v.n)])
    return float(np.linalg.norm(v.coeffs[mask]) / max(v.norm(), 1e-300))


# -- formula equivalence, qKZ step, singular vectors ------------------------------------

VANISH = 1e-9


def verify_formula_equivalence(params: ModelParams, family: WFamily, pair: str,
                               tol: float = 1e-7, spec: ContourSpec | None = None) -> VerificationReport:
    """Componentwise comparison of two evaluations of Psi_W.

    When both vectors vanish to ``VANISH`` times the integral scale, the
    difference is measured against that scale instead (noted in the record).
    """
    if pair not in PAIRS:
        raise ValueError(f"unknown pair {pair!r}; expected one of {PAIRS}")
    rep = _new_report("equivalence", params, None)
    a_m, b_m = pair.split("-")
    spec = spec or contour_spec(params)
    anchor = "determinant forms of the solution"
    inputs = digest(params_echo(params), family.tokens, pair)
    name = f"{pair} {family.tokens} n={params.n} l={params.ell} {_tag(params)}"
    t0 = time.perf_counter()
    try:
        ra = evaluate(SolutionRequest(params, family, a_m, spec))
        rb = evaluate(SolutionRequest(params, family, b_m, spec))
    except (RequestError, QuadratureError, PoleError, EllipticError) as exc:
        rep.inconclusive(name, anchor, inputs, str(exc))
        return rep
    rep.timings[pair] = time.perf_counter() - t0
    scale = max(ra.scale, rb.scale)
    vanishing = max(ra.vector.norm(), rb.vector.norm()) <= VANISH * scale
    note = "both sides vanish; difference relative to the integral scale" if vanishing else ""
    rep.add(name, anchor, inputs, rel_diff(ra.vector, rb.vector, scale if vanishing else 0.0), tol, note=note)
    for m, r in ((a_m, ra), (b_m, rb)):
        rep.add(f"weight {m} {family.tokens} n={params.n} l={params.ell}", "solution has weight ell", inputs,
                _off_weight(r.vector, params.ell), 0.0)
    if "detQ" in (a_m, b_m):
        r = ra if a_m == "detQ" else rb
        rep.add(f"detQ corrections {family.tokens} n={params.n} l={params.ell}",
                "polynomial integrands are regular at z_j, z_j/p, p q^2 z_j", inputs, r.correction_mass, 1e-12)
    return rep


def hat_shift_defect(family: WFamily, j: int) -> float:
    """Relative defect of Ehat(t; ..p z_j..) = q^-2 (Ehat(t; z) + Theta(t; z)) at probe points."""
    p = family.params
    F = family.factors[-1]
    Fs = family.at(p.shifted(j)).factors[-1]
    ts = elliptic.probe_points(p, 10, seed=13)
    lhs = Fs(ts)
    rhs = (F(ts) + elliptic.big_theta(ts, p)) / p.q**2
    return _rel_err(lhs, rhs)


def effective_rho(family: WFamily, j: int) -> tuple[complex | None, str]:
    """Ratio used in the step identity at site j, with a note on how it was obtained."""
    rho = family.rho[j - 1]
    if rho is not None:
        return rho, ""
    last = family.tokens[-1]
    if not (last.startswith("hat") and elliptic.hat_anchor(last) == j):
        return None, f"covariance ratio in z_{j} is not constant"
    p = family.params
    if p.n % 2 or 2 * p.ell > p.n:
        return None, "Theta directions need not vanish here"
    defect = hat_shift_defect(family, j)
    if defect > 1e-9:
        return None, f"Ehat shift law fails (defect {defect:.2e})"
    others = elliptic._declared_rho(family.tokens[:-1], p, family.c)[j - 1]
    return others / p.q**2, "effective ratio: Theta part of the shifted Ehat drops out"


def verify_qkz_step(params: ModelParams, family: WFamily, j: int | Sequence[int] | None = None,
                    method: str = "det", tol: float = 1e-6, kappa: complex | None = None,
                    control: str | None = None) -> VerificationReport:
    """Psi(..p z_j..) = rho_j q^l K_j(z) Psi(z) for the requested sites.

    ``control`` labels a deliberately perturbed run; its records expect the
    identity to break (residual > 1e-2).
    """
    rep = _new_report("qkz", params, None)
    sites = range(1, params.n + 1) if j is None else ([j] if isinstance(j, int) else list(j))
    anchor = "hypergeometric solutions solve qKZ at level zero"
    base = None
    for jj in sites:
        inputs = digest(params_echo(params), family.tokens, jj, method, kappa)
        name = f"qkz step j={jj} {family.tokens} {_tag(params)}" + (f" [control: {control}]" if control else "")
        rho, note = effective_rho(family, jj)
        if rho is None:
            rep.inconclusive(name, anchor, inputs, note)
            continue
        t0 = time.perf_counter()
        try:
            if base is None:
                base = evaluate(SolutionRequest(params, family, method, contour_spec(params)))
            sp = params.shifted(jj)
            lhs = psi(SolutionRequest(sp, family.at(sp), method, contour_spec(sp)))
            K = k_operator(jj, params, kappa)
        except (ParameterError, QuadratureError, PoleError, SingularArgumentError, EllipticError) as exc:
            rep.inconclusive(name, anchor, inputs, f"shifted point set unusable: {exc}")
            continue
        if base.vector.norm() <= VANISH * base.scale:
            rep.inconclusive(name, anchor, inputs, "Psi_W vanishes; the step identity is empty")
            continue
        rhs = rho * params.q**params.ell * (K @ base.vector.coeffs)
        err = rel_diff(lhs.coeffs, rhs)
        rep.timings[f"j={jj}"] = time.perf_counter() - t0
        if control:
            rep.add(name, anchor, inputs, err, 1e-2, kind="control", note=note)
        else:
            rep.add(name, anchor, inputs, err, tol, note=note)
    return rep


def verify_singular(params: ModelParams, family: WFamily, method: str = "det", tol: float = 1e-7,
                    vanish: float = VANISH) -> VerificationReport:
    """||e Psi_W|| / ||Psi_W||; informational when alpha != 1."""
    rep = _new_report("singular", params, None)
    anchor = "alpha = 1 solutions are singular vectors"
    inputs = digest(params_echo(params), family.tokens, method)
    name = f"singular {family.tokens} {_tag(params)}"
    if 2 * params.ell > params.n:
        rep.inconclusive(name, anchor, inputs, "needs 2 ell <= n")
        return rep
    r = evaluate(SolutionRequest(params, family, method))
    if r.vector.norm() <= vanish * r.scale:
        rep.inconclusive(name, anchor, inputs, "Psi_W vanishes; singularity is trivial")
        return rep
    ev = algebra.quantum_group_action("e", r.vector, params)
    err = ev.norm() / r.vector.norm()
    if is_alpha_one(params):
        rep.add(name, anchor, inputs, err, tol)
    else:
        rep.add(name, "plumbing", inputs, err, tol, kind="info", note="generic alpha: not singular in general")
    return rep


def _random_admissible(rng: np.random.Generator, params: ModelParams, count: int) -> np.ndarray:
    """Random R-matrix arguments away from the pole q^-2."""
    out = []
    while len(out) < count:
        z = np.exp(rng.uniform(-1, 1)) * np.exp(2j * np.pi * rng.uniform())
        if abs(params.q * z - 1 / params.q) > 0.1 and abs(params.q * z * 1 - params.q) > 0.1:
            out.append(z)
    return np.array(out)


def _suite_rmatrix(params, rng, rep):
    anchor = "R-matrix unitarity and Yang-Baxter"
    zs = _random_admissible(rng, params, 50)
    ws = _random_admissible(rng, params, 50)
    inv = ybe = 0.0
    for z, w in zip(zs, ws):
        inv = max(inv, float(np.max(np.abs(algebra.r21(1 / z, params) @ algebra.r_matrix(z, params) - np.eye(4)))))
        if abs(params.q * z * w - 1 / params.q) < 0.1:
            continue
        R = lambda x, s: algebra.embed(algebra.r_matrix(x, params), s, 3)  # noqa: E731
        lhs = R(z, (1, 2)) @ R(z * w, (1, 3)) @ R(w, (2, 3))
        rhs = R(w, (2, 3)) @ R(z * w, (1, 3)) @ R(z, (1, 2))
        ybe = max(ybe, float(np.max(np.abs(lhs - rhs))))
    d = digest(params_echo(params), "rmatrix")
    rep.add("R21(1/z) R(z) = Id, 50 z", anchor, d, inv, 1e-12)
    rep.add("Yang-Baxter on V^3, 50 (z, w)", anchor, d, ybe, 1e-12)
    n = params.n
    for j in range(1, n + 1):
        K = k_operator(j, params)
        leak = 0.0
        for a in range(n + 1):
            for b in range(n + 1):
                if a != b:
                    Pa, Pb = algebra.weight_projector(a, n), algebra.weight_projector(b, n)
                    leak = max(leak, float(np.max(np.abs(Pa @ K @ Pb))))
        rep.add(f"K_{j} preserves weight", "qKZ respects the weight decomposition", d, leak, 1e-14)
        e0 = np.zeros(2**n, dtype=complex)
        e0[0] = 1
        rep.add(f"K_{j} fixes the all-plus vector", "plumbing", d, float(np.max(np.abs(K @ e0 - e0))), 1e-13)


def _suite_res_lemma(params, rng, rep):
    ell, n = params.ell, params.n
    d = digest(params_echo(params), "res_lemma")
    subs = subsets(n, ell)
    wt = ratfun.residue_matrix(params, ell, "wtilde")
    dev = max(abs(wt[(M, N)] - (1.0 if M == N else 0.0)) for M in subs for N in subs)
    rep.add(f"Res wtilde_M(z_N) = identity ({len(subs)}x{len(subs)})", "residue biorthogonality", d, dev, 1e-8)
    w = ratfun.residue_matrix(params, ell, "w")
    tri = max((abs(w[(M, N)]) for M in subs for N in subs if not N.le(M)), default=0.0)
    scale = max(abs(v) for v in w.values())
    rep.add("Res w_M(z_N) = 0 unless N <= M", "residue triangularity", d, tri / scale, 1e-8)
    diag = max(abs(w[(M, M)] - ratfun.iterated_residue(ratfun.g_evaluator(M, params), M.point(params.z)))
               / abs(w[(M, M)]) for M in subs)
    rep.add("Res w_M(z_M) = Res g_M(z_M)", "residue triangularity", d, diag, 1e-8)
    pts = [ratfun.random_points(rng, 20, params.z, params.eta) for _ in range(ell)]
    err = 0.0
    for M in subs:
        lhs = ratfun.w_eval("w", M, pts, params)
        rhs = sum(ratfun.w_eval("wtilde", N, pts, params) * w[(M, N)] for N in subs if N.le(M))
        err = max(err, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs))))
    rep.add("w_M = sum_{N<=M} wtilde_N Res w_M(z_N), 20 points", "residue expansion", d, err, 1e-8)


def _suite_d1(params, rng, rep):
    d = digest(params_echo(params), "d1")
    ell = params.ell
    if ell < 1:
        return
    for M in subsets(params.n, ell - 1):
        pts = [ratfun.random_points(rng, 20, params.z, params.eta) for _ in range(ell)]
        lhs, rhs = ratfun.d1_sides(M, pts, params)
        rep.add(f"lowering identity M={M}, 20 points", "lowering identity for w", d,
                float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))), 1e-10)


def _random_f(rng: np.random.Generator, params: ModelParams, low: int = 1, growth: int | None = None) -> RationalFn:
    """Random f in F with f = O(t^low) at 0 and f = O(t^growth) at infinity (default: bounded)."""
    n = params.n
    growth = 0 if growth is None else growth
    deg = max(n + growth - low, 0)
    coef = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
    return RationalFn(coef, low, params.z)


def _suite_contour(params, rng, rep):
    anchor = "the pairing does not depend on the contour"
    lo, hi = params.contour_interval()
    radii = [lo * (hi / lo) ** s for s in (0.2, 0.5, 0.8)]
    basis = space_basis("f_ell", params)
    Fs = basis[:]
    if params.n % 2 == 0 and is_alpha_one(params):
        Fs.append(elliptic.e_hat_fn(params))
    for i, F in enumerate(Fs):
        f = _random_f(rng, params)
        res = [pair_integral(f, F, contour_spec(params, radius=r), detail=True) for r in radii]
        vals = [r.value for r in res]
        scale = max(r.scale for r in res)
        spread = max(abs(a - b) for a in vals for b in vals) / scale
        d = digest(params_echo(params), "contour", F.label, f.num.tolist())
        rep.add(f"three radii, F={F.label}", anchor, d, spread, 1e-10)
        pq2 = max(abs(m[3]) for r in res for m in r.correction_mass if m[0] == "outer" and m[1] == 1)
        rep.add(f"mass at p q^2 z_j, F={F.label}", "plumbing", d, pq2 / scale, 0.0, kind="info",
                note="no integrand is singular at p q^2 z_j")
        hist = hyperint.convergence_history(f, F, contour_spec(params))
        errs = [e for _, e in hist]
        rep.add(f"convergence N=8..512, F={F.label}", "plumbing", d, errs[-1], 0.0, kind="info",
                note="; ".join(f"N={N}:{e:.1e}" for N, e in hist))
        # geometric decay until the floor: every halving of the error gap shrinks the error
        floor = 1e-13
        above = [e for e in errs if e > floor]
        ok = all(b < a for a, b in zip(above, above[1:])) and errs[-1] <= 1e-12
        rep.add(f"geometric convergence in N, F={F.label}", "plumbing", d, 0.0 if ok else 1.0, 0.0)


def _suite_oracle(params, rng, rep):
    anchor = "residue series of the pairing"
    Fs = space_basis("f_ell", params)
    if params.n % 2 == 0 and is_alpha_one(params):
        Fs = Fs + [elliptic.e_hat_fn(params), elliptic.theta_fn(params)]
    spec = contour_spec(params)
    for i in range(10):
        F = Fs[int(rng.integers(len(Fs)))]
        f = _random_f(rng, params, low=1, growth=int(rng.integers(0, 2)))
        r = pair_integral(f, F, spec, detail=True)
        o = hyperint.residue_series_oracle(f, F, params)
        d = digest(params_echo(params), "oracle", F.label, f.num.tolist())
        rep.add(f"quadrature vs residue series #{i}, F={F.label}", anchor, d,
                abs(r.value - o) / max(abs(o), r.scale * 1e-6), 1e-8)


def _lead(f: RationalFn, power: int) -> complex:
    """Coefficient of t^power in the expansion of f at infinity (f = O(t^power))."""
    return complex(f.num[-1]) if f.order_at_infinity() == power else 0j


def _suite_i0(params, rng, rep):
    spec = contour_spec(params)
    d = digest(params_echo(params), "i0")
    for i in range(5):
        f = _random_f(rng, params, low=1, growth=int(rng.integers(0, 3)))
        r = pair_integral(f, elliptic.constant_one(params), spec, detail=True)
        rep.add(f"I(f, 1) = 0, f = O(t) at 0, #{i}", "pairing with 1 vanishes", d, abs(r.value) / r.scale, 1e-9)
    if params.n % 2:
        return
    th = elliptic.theta_fn(params)
    half = params.n // 2
    for k in range(0, half + 1):
        for low in (0, 1):
            f = _random_f(rng, params, low=low, growth=k)
            r = pair_integral(f, th, spec, detail=True)
            name = f"I(f, Theta), f = O(t^{k}) at infinity, order {low} at 0"
            if 2 * k < params.n:
                rep.add(name + " = 0", "pairing with Theta vanishes", d, abs(r.value) / r.scale, 1e-9)
                continue
            # 2k = n: the integrand is regular outside C and ~ lead * t^-1 at infinity
            rep.add(name + " = leading coefficient", "plumbing", d,
                    abs(r.value - _lead(f, k)) / r.scale, 1e-9, note="residue at infinity")
            rep.add(name + " = 0 (bound 2k <= n)", "pairing with Theta vanishes", d, abs(r.value) / r.scale, 1e-9,
                    kind="info", note="does not vanish at 2k = n; the identity holds for 2k < n")


def theta_span_residual(params: ModelParams, probes: int = 12) -> float:
    """Relative least-squares residual of Theta against the F_ell basis at probe points."""
    basis = space_basis("f_ell", params)
    pts = elliptic.probe_points(params, probes, seed=4)
    A = np.array([[F(t) for F in basis] for t in pts])
    y = elliptic.theta_fn(params)(pts)
    c = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(np.linalg.norm(A @ c - y) / np.linalg.norm(y))


def _suite_id(params, rng, rep):
    spec = contour_spec(params)
    d = digest(params_echo(params), "id")
    for F in space_basis("f_ell", params):
        for i in range(5):
            f = _random_f(rng, params, low=int(rng.integers(0, 2)), growth=int(rng.integers(0, 3)))
            r = pair_integral(ratfun.total_difference(f, params), F, spec, detail=True)
            rep.add(f"I(Df, {F.label}) = 0, #{i}", "total differences pair to zero on F_ell", d,
                    abs(r.value) / r.scale, 1e-9)
    if params.n % 2 or not is_alpha_one(params):
        return
    half = params.n // 2
    rep.add("Theta in span F_ell basis (least-squares residual)", "plumbing", d, theta_span_residual(params), 0.0,
            kind="info", note="small residual: Theta is a combination of 1, C_1..C_(n-1)")
    for F in space_basis("f_hat", params):
        nab = discrepancy(F, params)
        for k in range(0, half + 1):
            f = _random_f(rng, params, low=int(rng.integers(0, 2)), growth=k)
            r = pair_integral(ratfun.total_difference(f, params), F, spec, detail=True)
            name = f"I(Df, {F.label}), f = O(t^{k})"
            if 2 * k < params.n:
                rep.add(name + " = 0", "total differences pair to zero on F_hat", d, abs(r.value) / r.scale, 1e-9)
                continue
            rep.add(name + " = -nabla F * leading coefficient", "plumbing", d,
                    abs(r.value + nab * _lead(f, k)) / r.scale, 1e-9, note="residue at infinity")
            rep.add(name + " = 0 (bound 2k <= n)", "total differences pair to zero on F_hat", d,
                    abs(r.value) / r.scale, 1e-9, kind="info",
                    note="vanishes only when nabla F = 0 at 2k = n; the identity holds for 2k < n")


def _suite_xi(params, rng, rep):
    if 2 * params.ell != params.n or not is_alpha_one(params):
        return
    spec = contour_spec(params)
    q, ell = params.q, params.ell
    Fs = [elliptic.e_hat_fn(params)] + [elliptic.c_fn(j, params) for j in range(1, params.n)]
    nablas = [discrepancy(F, params) for F in Fs]
    for M in subsets(params.n, ell):
        d = digest(params_echo(params), "xi", M.members)
        ts = ratfun.random_points(rng, 20, params.z, params.eta)
        xi = ratfun.xi_fn(M, params)
        rep.add(f"xi_M expansion over mu, M={M}", "xi relations", d,
                _rel_err(xi(ts), ratfun.xi_expansion(M, params)(ts)), 1e-9)
        for F, nab in zip(Fs, nablas):
            val = pair_integral(xi, F, spec)
            rep.add(f"I(xi_M, {F.label}) = -q^(-4l) nabla, M={M}", "xi relations", d,
                    abs(val + q ** (-4 * ell) * nab), 1e-8)


def _suite_extremal(params, rng, rep):
    ell = params.ell
    if ell < 1:
        return
    M = extremal(ell)
    d = digest(params_echo(params), "extremal")
    fac = ratfun.extremal_factor(ell, params)
    pts = [ratfun.random_points(rng, 20, params.z, params.eta) for _ in range(ell)]
    rep.add("w_Mext = factor * wtilde_Mext, 20 points", "extremal subset", d,
            _rel_err(ratfun.w_eval("w", M, pts, params), fac * ratfun.w_eval("wtilde", M, pts, params)), 1e-10)
    w = ratfun.residue_matrix(params, ell, "w")
    rep.add("Res w_Mext(z_Mext) = factor", "extremal subset", d, abs(w[(M, M)] - fac) / abs(fac), 1e-8)
    vt = subset_basis_vector("tilde", M, params)
    rep.add("tilde-v_Mext coefficient on v_Mext", "residue triangularity", d, abs(vt[M] - w[(M, M)]) / abs(w[(M, M)]), 1e-12)
    vb = subset_basis_vector("bar", M, params)
    # the bar prefactor times the extremal factor leaves q per pair a < b
    rep.add("bar-v_Mext coefficient on v_Mext = q^(l(l-1)/2)", "bar basis normalization", d,
            abs(vb[M] - params.q ** (ell * (ell - 1) / 2)), 1e-8)
    rep.add("bar-v_Mext coefficient on v_Mext = q^(l(l-2)/2)", "bar basis normalization", d,
            abs(vb[M] - params.q ** (ell * (ell - 2) / 2)), 1e-8, kind="info",
            note="stated exponent; the displayed prefactor gives q^(l(l-1)/2)")


def _suite_vanishing(params, rng, rep):
    if params.ell < 1 or not is_alpha_one(params):
        return
    anchor = "vanishing of Psi_W"
    n, ell = params.n, params.ell
    plain = default_family(params, hat=False)
    lasts = ["one"] + (["theta"] if n % 2 == 0 and 2 * ell <= n else [])
    for last in lasts:
        fam = w_family("alpha_one_hat", list(plain.tokens[:-1]) + [last], params)
        for method in ("det", "direct"):
            r = evaluate(SolutionRequest(params, fam, method))
            d = digest(params_echo(params), fam.tokens, method)
            rep.add(f"Psi_W = 0 for W={fam.tokens} ({method})", anchor, d, r.vector.norm() / r.scale, VANISH)
    if 2 * ell == n:
        # the polynomial form has the zero row Q^(l), so all of F_ell^l is annihilated
        for toks in itertools.islice(itertools.combinations([f"C{j}" for j in range(1, n)], ell), 3):
            fam = w_family("alpha_one", toks, params)
            r = evaluate(SolutionRequest(params, fam, "det"))
            rep.add(f"Psi_W = 0 for W={fam.tokens} in F_ell (2l = n)", "Q^(l) vanishes when 2l = n",
                    digest(params_echo(params), toks), r.vector.norm() / r.scale, VANISH)
    if ell == 2:
        fam = default_family(params)
        spec = contour_spec(params)
        rev = WFamily(fam.tag, fam.tokens[::-1], params, fam.c, fam.factors[::-1], fam.rho)
        base = evaluate(SolutionRequest(params, fam, "direct", spec)).vector
        swapped = evaluate(SolutionRequest(params, rev, "direct", spec)).vector
        rep.add(f"Psi_(Asym W) = 2 Psi_W, W={fam.tokens}", "antisymmetrization of W",
                digest(params_echo(params), fam.tokens, "asym"), rel_diff(base - swapped, base.scale(2)), 1e-7)


def _suite_qm_identity(params, rng, rep):
    if not is_alpha_one(params):
        return
    n, ell = params.n, params.ell
    for M in subsets(n, ell):
        d = digest(params_echo(params), "qm", M.members)
        for m in M:
            ts = ratfun.random_points(rng, 20, params.z, params.eta)
            lhs, rhs = ratfun.q_identity_sides(M, m, ts, params)
            rep.add(f"D-identity M={M} m={m}, 20 points", "D-identity for Q polynomials", d,
                    float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs))), 1e-9)
        for a in range(1, ell + 1):
            Q = ratfun.q_polynomial(M, a, params)
            rep.add(f"deg Q^({a})_M <= n - a, M={M}", "plumbing", d, float(max(Q.degree() - (n - a), 0)), 0.0)
        if 2 * ell == n:
            Ql = ratfun.q_polynomial(M, ell, params)
            rep.add(f"Q^(l)_M = 0, M={M}", "Q^(l) vanishes when 2l = n", d, float(np.max(np.abs(Ql.coef))), 1e-12)
            for a in range(1, ell + 1):
                g = ratfun.q_polynomial(M, a, params).coef
                s = ratfun.q_polynomial(M, a, params, simplified=True).coef
                size = max(len(g), len(s))
                g, s = np.pad(g, (0, size - len(g))), np.pad(s, (0, size - len(s)))
                scale = max(np.max(np.abs(g)), np.max(np.abs(s)), 1e-300)
                rep.add(f"general vs two-term Q^({a})_M, M={M}", "two-term form of Q when 2l = n", d,
                        float(np.max(np.abs(g - s)) / scale), 1e-12)


def auxiliary_params(params: ModelParams, seed: int) -> list[ModelParams]:
    """Nearby sizes (n, 1) and (n + 1, l) where Psi on F_ell^l does not vanish at alpha = 1."""
    out = []
    for n, ell in ((params.n, 1), (params.n + 1, params.ell)):
        if 2 * ell == n or ell > n:
            continue
        out.append(ModelParams(params.q, n, ell, default_points(n, seed), alpha=1.0, eta=params.eta).validate())
    return out


def _suite_equivalence(params, rng, rep):
    fam = default_family(params)
    rep.extend(verify_formula_equivalence(params, fam, "direct-det"))
    if is_alpha_one(params):
        rep.extend(verify_formula_equivalence(params, default_family(params, hat=False), "det-detQ"))
        for aux in auxiliary_params(params, int(rng.integers(1 << 16))):
            rep.extend(verify_formula_equivalence(aux, default_family(aux, hat=False), "det-detQ"))
        if 2 * params.ell == params.n and params.ell >= 1:
            rep.extend(verify_formula_equivalence(params, default_family(params, hat=True), "det-det0"))
    if params.ell == 2:
        # multilinearity in the first factor
        F, G = fam.factors[0], space_basis("f_ell", params)[-1]
        a, b = complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal())
        comb = lambda t: a * F(t) + b * G(t)  # noqa: E731
        mk = lambda f1: WFamily("custom", ("lin", fam.tokens[1]), params, fam.c, (f1, fam.factors[1]), fam.rho)  # noqa: E731
        lhs = psi(SolutionRequest(params, mk(comb)))
        rhs = psi(SolutionRequest(params, mk(F))).scale(a) + psi(SolutionRequest(params, mk(G))).scale(b)
        rep.add("Psi is linear in W_1", "plumbing", digest(params_echo(params), fam.tokens, a, b),
                rel_diff(lhs, rhs), 1e-10)


def _suite_qkz(params, rng, rep, sites=None, negative_controls=False):
    fam = default_family(params)
    rep.extend(verify_qkz_step(params, fam, sites))
    if negative_controls:
        rep.extend(verify_qkz_step(params, fam, sites, kappa=1.01 * params.kappa, control="kappa x 1.01"))
        off = ModelParams(params.q, params.n, params.ell, params.z, params.alpha, params.eta, p=params.q**3)
        rep.extend(verify_qkz_step(off, default_family(off), sites, control="p = q^3"))


def singular_families(params: ModelParams, limit: int = 5) -> list[WFamily]:
    """alpha = 1 families with nonvanishing Psi_W: F_ell products when 2l < n, else Ehat last."""
    n, ell = params.n, params.ell
    leads = list(itertools.combinations([f"C{j}" for j in range(1, n)], max(ell - 1, 0)))
    out = []
    if 2 * ell < n:
        out += [w_family("alpha_one", lead + (f"C{n - 1}",), params) for lead in leads if f"C{n - 1}" not in lead][:2]
    if n % 2 == 0 and 2 * ell <= n:
        out += [w_family("alpha_one_hat", lead + ("hat",), params) for lead in leads]
        out += [w_family("alpha_one_hat", leads[0] + (f"hat{k}",), params) for k in range(3, n + 1)]
    return out[:limit]


def _suite_singular(params, rng, rep, negative_controls=False):
    if is_alpha_one(params):
        for fam in singular_families(params):
            rep.extend(verify_singular(params, fam))
    else:
        rep.extend(verify_singular(params, default_family(params)))


_RUNNERS: dict[str, Callable] = {
    "rmatrix": _suite_rmatrix,
    "res_lemma": _suite_res_lemma,
    "d1": _suite_d1,
    "contour": _suite_contour,
    "oracle": _suite_oracle,
    "i0": _suite_i0,
    "id": _suite_id,
    "xi": _suite_xi,
    "extremal": _suite_extremal,
    "vanishing": _suite_vanishing,
    "qm_identity": _suite_qm_identity,
    "equivalence": _suite_equivalence,
    "qkz": _suite_qkz,
    "singular": _suite_singular,
}


def run_suite(name: str, params: ModelParams, seed: int = 0, sites: Sequence[int] | None = None,
              negative_controls: bool = False) -> VerificationReport:
    """Run one named suite. Checks that do not apply at these parameters are skipped."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    rng = np.random.default_rng([seed, SUITES.index(name)])
    rep = _new_report(name, params, seed)
    t0 = time.perf_counter()
    kwargs = {}
    if name == "qkz":
        kwargs = {"sites": sites, "negative_controls": negative_controls}
    elif name == "singular":
        kwargs = {"negative_controls": negative_controls}
    _RUNNERS[name](params, rng, rep, **kwargs)
    rep.timings["total"] = time.perf_counter() - t0
    return rep
