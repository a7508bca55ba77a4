from __future__ import annotations

import json

import pytest

from qkzlab import cli
from qkzlab.qkz import VerificationReport

GOOD = """
[params]
q = 0.6
n = 4
ell = 2
alpha = 1
z = 1, 1i, -1, -1i
"""


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_validate_valid(tmp_path, capsys):
    assert cli.main(["validate", write(tmp_path, GOOD)]) == 0
    out = capsys.readouterr().out
    assert "kappa = alpha q^(2 ell - 2 - n) = 2.77778" in out
    assert "valid" in out and "corrections" in out


def test_validate_names_distinctness(tmp_path, capsys):
    cfg = GOOD.replace("z = 1, 1i, -1, -1i", "z = 1, 1, -1, -1i")
    assert cli.main(["validate", write(tmp_path, cfg)]) == 1
    assert "INVALID: distinctness" in capsys.readouterr().out


def test_validate_names_contour_feasibility(tmp_path, capsys):
    cfg = GOOD.replace("z = 1, 1i, -1, -1i", "z = 10, 1i, -1, -1i")
    assert cli.main(["validate", write(tmp_path, cfg)]) == 1
    assert "contour feasibility" in capsys.readouterr().out.split("INVALID:")[1]


def test_field_level_diagnostics(tmp_path, capsys):
    assert cli.main(["validate", write(tmp_path, GOOD.replace("q = 0.6", "q = abc"))]) == 1
    assert "[params.q]" in capsys.readouterr().err
    assert cli.main(["validate", write(tmp_path, GOOD.replace("ell = 2\n", ""))]) == 1
    assert "[params.ell] required" in capsys.readouterr().err
    assert cli.main(["validate", str(tmp_path / "missing.ini")]) == 1


def test_bundled_default_validates(capsys):
    assert cli.main(["validate"]) == 0
    cfg = cli.read_config(None)
    assert [complex(p.alpha) for p in cfg.params] == [1, 1.3 + 0.2j]
    assert cfg.suites == cli.SUITES


def test_run_writes_reports(tmp_path, capsys):
    out = tmp_path / "rep"
    code = cli.main(["run", write(tmp_path, GOOD), "--suite", "rmatrix", "--suite", "res_lemma", "--out", str(out)])
    assert code == 0
    assert {p.name for p in out.iterdir()} == {
        "rmatrix.json", "rmatrix.txt", "res_lemma.json", "res_lemma.txt", "summary.json", "summary.txt", "timings.json"}
    rep = json.loads((out / "rmatrix.json").read_text())
    assert rep["schema"] == 1 and rep["status"] == "pass"
    assert all(r["anchor"] for r in rep["records"])
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["suites"]) == {"rmatrix", "res_lemma"}


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = write(tmp_path, GOOD + "\n[run]\nseed = 4\n")
    monkeypatch.setenv("QKZLAB_SEED", "9")
    cli.main(["run", cfg, "--suite", "d1", "--out", str(tmp_path / "a"), "--quiet"])
    assert json.loads((tmp_path / "a" / "d1.json").read_text())["seed"] == 9
    cli.main(["run", cfg, "--suite", "d1", "--out", str(tmp_path / "b"), "--seed", "2", "--quiet"])
    assert json.loads((tmp_path / "b" / "d1.json").read_text())["seed"] == 2
    monkeypatch.setenv("QKZLAB_SEED", "x")
    assert cli.main(["run", cfg, "--suite", "d1", "--out", str(tmp_path / "c")]) == 1


def test_jobs_do_not_change_reports(tmp_path):
    cfg = write(tmp_path, GOOD.replace("alpha = 1", "alpha = 1, 1.3+0.2i"))
    for d, jobs in (("one", "1"), ("two", "2")):
        cli.main(["run", cfg, "--suite", "rmatrix", "--suite", "d1", "--jobs", jobs, "--out", str(tmp_path / d), "--quiet"])
    for name in ("rmatrix.json", "d1.json", "summary.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_unknown_suite_is_config_error(tmp_path):
    assert cli.main(["run", write(tmp_path, GOOD), "--suite", "nope", "--out", str(tmp_path)]) == 1


def test_exit_code_contract(tmp_path, monkeypatch):
    def fake(status):
        def run_suite(name, params, seed=0, sites=None, negative_controls=False):
            rep = VerificationReport(name, seed=seed)
            rep.add("ok", "plumbing", "d", 0.0, 1.0)
            if status == "inconclusive":
                rep.inconclusive("x", "plumbing", "d", "empty")
            elif status == "fail":
                rep.add("x", "plumbing", "d", 1.0, 0.0)
            return rep
        return run_suite

    cfg = write(tmp_path, GOOD)
    for status, code in (("pass", 0), ("fail", 2), ("inconclusive", 3)):
        monkeypatch.setattr(cli, "run_suite", fake(status))
        assert cli.main(["run", cfg, "--suite", "xi", "--out", str(tmp_path / status), "--quiet"]) == code


def test_baseline_regressions():
    now = {"suites": {"a": {"status": "fail", "max_error": 1e-3}, "b": {"status": "pass", "max_error": 1e-15}}}
    old = {"suites": {"a": {"status": "pass", "max_error": 1e-14}, "b": {"status": "pass", "max_error": 1e-15}}}
    got = cli.compare_baseline(now, old)
    assert got[0] == "a: pass -> fail" and len(got) == 2


@pytest.mark.parametrize("text,value", [("1.3+0.2i", 1.3 + 0.2j), ("-1i", -1j), (" 2 ", 2)])
def test_parse_complex(text, value):
    assert cli.parse_complex(text) == value
