"""Acceptance criteria at desk scale (q = 0.6, n = 4, ell = 2, both alpha of the bundled config).

Each test prints one ``criterion N: PASS|FAIL`` line. The suites run once
per session; criterion 12 runs them a second time.
"""

from __future__ import annotations

import time

import pytest

from qkzlab import cli
from qkzlab.params import subsets

_CLOCK = {}


@pytest.fixture(scope="module")
def reports():
    cfg = cli.read_config(None)
    t0 = time.perf_counter()
    reps = cli.run_reports(cfg, negative_controls=True, jobs=1)
    _CLOCK["first"] = time.perf_counter() - t0
    return reps


def records(reports, suite, prefix="", kind=None):
    out = [r for r in reports[suite].records if r.check.startswith(prefix)]
    return [r for r in out if kind is None or r.kind == kind]


def judge(capsys, n, title, bad, detail):
    ok = not bad
    with capsys.disabled():
        print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    assert ok, "; ".join(bad[:6])


def check_all(recs, tol):
    """Failure messages for records whose error is not below ``tol``."""
    return [f"{r.check}: {r.error:.3g} >= {tol:g}" for r in recs if not r.error < tol]


def worst(recs):
    errs = [r.error for r in recs]
    return max(errs) if errs else float("nan")


def test_criterion_01_rmatrix(reports, capsys):
    recs = records(reports, "rmatrix", "R21") + records(reports, "rmatrix", "Yang-Baxter")
    bad = check_all(recs, 1e-12) + ([] if len(recs) == 4 else ["missing records"])
    judge(capsys, 1, "R-matrix inversion and Yang-Baxter, 50 z", bad, f"max error {worst(recs):.2e} < 1e-12")


def test_criterion_02_residue_biorthogonality(reports, capsys):
    recs = records(reports, "res_lemma")
    need = ["Res wtilde_M(z_N) = identity (6x6)", "Res w_M(z_N) = 0 unless N <= M",
            "w_M = sum_{N<=M} wtilde_N Res w_M(z_N), 20 points"]
    bad = check_all(recs, 1e-8) + [f"missing {c}" for c in need if c not in {r.check for r in recs}]
    judge(capsys, 2, "residue biorthogonality, triangularity, expansion", bad, f"max error {worst(recs):.2e} < 1e-8")


def test_criterion_03_lowering_identity(reports, capsys):
    recs = records(reports, "d1")
    per_alpha = {f"lowering identity M={S}, 20 points" for S in subsets(4, 1)}
    bad = check_all(recs, 1e-10)
    if {r.check for r in recs} != per_alpha or len(recs) != 2 * len(per_alpha):
        bad.append("not every 1-subset covered")
    judge(capsys, 3, "lowering identity, all 4 one-subsets x 20 points", bad, f"max error {worst(recs):.2e} < 1e-10")


def test_criterion_04_contour(reports, capsys):
    spread = records(reports, "contour", "three radii")
    geo = records(reports, "contour", "geometric convergence")
    bad = check_all(spread, 1e-10) + [r.check for r in geo if r.status != "pass"]
    logged = len(records(reports, "contour", "convergence N="))
    judge(capsys, 4, "three radii agree, geometric convergence", bad,
          f"max spread {worst(spread):.2e} < 1e-10, {logged} convergence histories logged")


def test_criterion_05_oracle(reports, capsys):
    recs = records(reports, "oracle")
    bad = check_all(recs, 1e-8) + ([] if len(recs) == 20 else [f"{len(recs)} pairs instead of 2 x 10"])
    judge(capsys, 5, "quadrature vs residue series, 10 pairs per alpha", bad, f"max error {worst(recs):.2e} < 1e-8")


def test_criterion_06_vanishing_pairings(reports, capsys):
    # every record asserting a vanishing pairing, including the stated growth bound 2k <= n
    anchors = {"pairing with 1 vanishes", "pairing with Theta vanishes",
               "total differences pair to zero on F_ell", "total differences pair to zero on F_hat"}
    recs = [r for s in ("i0", "id") for r in reports[s].records if r.anchor in anchors]
    bad = check_all(recs, 1e-9)
    interior = [r for r in recs if r.kind == "identity"]
    boundary = [r for r in recs if r.kind == "info"]
    derived = [r for s in ("i0", "id") for r in reports[s].records if r.anchor == "plumbing"]
    detail = (f"2k < n max {worst(interior):.2e}; at 2k = n max {worst(boundary):.2e} "
              f"(residue at infinity, derived value matches to {worst(derived):.2e})")
    judge(capsys, 6, "I(f,1) = 0, I(f,Theta) = 0, I(Df,F) = 0 with the stated bounds", bad, detail)


def test_criterion_07_formula_equivalence(reports, capsys):
    recs = [r for pair in ("direct-det", "det-detQ", "det-det0") for r in records(reports, "equivalence", pair)]
    bad = check_all(recs, 1e-7)
    for pair in ("direct-det", "det-detQ", "det-det0"):
        if not any(r.check.startswith(pair) and "n=4 l=2" in r.check for r in recs):
            bad.append(f"no {pair} record on (V^4)_2")
    bad += [r.check for r in records(reports, "equivalence", "weight") if r.status != "pass"]
    judge(capsys, 7, "direct/det, det/detQ, det/det0", bad, f"max rel. error {worst(recs):.2e} < 1e-7")


def test_criterion_08_q_polynomials(reports, capsys):
    ident = records(reports, "qm_identity", "D-identity")
    zero = records(reports, "qm_identity", "Q^(l)_M = 0")
    two = records(reports, "qm_identity", "general vs two-term")
    bad = check_all(ident, 1e-9) + check_all(zero, 1e-12) + check_all(two, 1e-12)
    if not (ident and len(zero) == 6 and two):
        bad.append("missing records")
    judge(capsys, 8, "D-identity, Q^(l) = 0 at 2l = n, two-term form", bad,
          f"identity {worst(ident):.2e}, Q^(l) {worst(zero):.2e}, forms {worst(two):.2e}")


def test_criterion_09_xi(reports, capsys):
    exp = records(reports, "xi", "xi_M expansion")
    pair = records(reports, "xi", "I(xi_M")
    bad = check_all(exp, 1e-9) + check_all(pair, 1e-8)
    if not any("Ehat" in r.check for r in pair):
        bad.append("no Ehat record")
    judge(capsys, 9, "xi expansion and I(xi_M, F) = -q^(-4l) nabla F", bad,
          f"expansion {worst(exp):.2e} < 1e-9, pairing {worst(pair):.2e} < 1e-8")


def test_criterion_10_qkz(reports, capsys):
    steps = records(reports, "qkz", kind="identity")
    controls = records(reports, "qkz", kind="control")
    bad = check_all(steps, 1e-6)
    if len(steps) != 8 or any(r.status != "pass" for r in steps):
        bad.append("not every step verified at both alpha")
    weak = [r for r in controls if not r.error > 1e-2]
    bad += [f"{r.check}: residual {r.error:.3g} <= 1e-2" for r in weak]
    kappa = [r.error for r in controls if "kappa" in r.check]
    level = [r.error for r in controls if "q^3" in r.check]
    judge(capsys, 10, "qKZ steps, kappa and level controls", bad,
          f"steps max {worst(steps):.2e} < 1e-6; kappa x 1.01 residuals {min(kappa):.3g}..{max(kappa):.3g}, "
          f"p = q^3 residuals {min(level):.3g}..{max(level):.3g} (need > 1e-2)")


def test_criterion_11_singular(reports, capsys):
    sing = records(reports, "singular", kind="identity")
    van = [r for r in records(reports, "vanishing", "Psi_W = 0 for W=") if "'one'" in r.check or "'theta'" in r.check]
    bad = check_all(sing, 1e-7) + check_all(van, 1e-9)
    if len(sing) < 5 or not any("hat" in r.check for r in sing):
        bad.append("fewer than 5 families or none with Ehat")
    if len(van) < 2:
        bad.append("missing vanishing records")
    judge(capsys, 11, "singular vectors at alpha = 1, vanishing cases", bad,
          f"||e Psi||/||Psi|| max {worst(sing):.2e} < 1e-7 over {len(sing)} families; vanishing {worst(van):.2e}")


def test_criterion_12_determinism(reports, capsys):
    cfg = cli.read_config(None)
    t0 = time.perf_counter()
    again = cli.run_reports(cfg, negative_controls=True, jobs=1)
    elapsed = _CLOCK.get("first", 0.0) + time.perf_counter() - t0
    bad = [s for s in reports if cli.dumps(reports[s].to_dict()) != cli.dumps(again[s].to_dict())]
    if cli.dumps(cli.summary_dict(reports)) != cli.dumps(cli.summary_dict(again)):
        bad.append("summary")
    judge(capsys, 12, "identical seed gives byte-identical JSON", bad,
          f"{len(reports)} suite reports compared, two full runs in {elapsed:.0f} s")
