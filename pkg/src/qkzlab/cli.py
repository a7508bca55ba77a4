"""Command-line driver: ``qkzlab validate <cfg>`` and ``qkzlab run <cfg>``.

Configuration is an INI file::

    [params]
    q = 0.6
    n = 4
    ell = 2
    alpha = 1, 1.3+0.2i     # one parameter set per value
    z = auto                # or a comma-separated list of complex numbers
    z_seed = 0              # seed and noise of the auto grid
    z_noise = 0.05
    eta = 0.05

    [run]
    seed = 0
    suites = all
    jobs = 1
    out = qkzlab-reports
    format = both           # json | text | both

Exit codes of ``run``: 0 all checks pass, 2 some check fails, 3 only
inconclusive checks besides passes, 1 configuration or usage error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .hyperint import QuadratureError, contour_spec
from .params import ModelParams, ParameterError, default_points
from .qkz import FAIL, INCONCLUSIVE, PASS, SUITES, VerificationReport, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
FORMATS = ("json", "text", "both")
DEFAULT_CONFIG = "default.ini"


class ConfigError(ValueError):
    """A config field could not be parsed; ``field`` names it."""

    def __init__(self, field_name: str, detail: str):
        super().__init__(f"[{field_name}] {detail}")
        self.field = field_name


@dataclass
class RunConfig:
    params: list[ModelParams]
    seed: int = 0
    suites: tuple[str, ...] = SUITES
    jobs: int = 1
    out: Path = Path("qkzlab-reports")
    fmt: str = "both"
    source: str = ""


def parse_complex(text: str) -> complex:
    s = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise ValueError(f"not a complex number: {text!r}") from None


def _split(text: str) -> list[str]:
    return [s for s in (x.strip() for x in text.replace("\n", ",").split(",")) if s]


def _get(section, key, conv, default, name):
    if key not in section:
        return default
    try:
        return conv(section[key])
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def read_config(path: str | Path | None) -> RunConfig:
    """Parse a config file (the bundled default when ``path`` is None).

    Parameter sets are built but not validated; ModelParams field errors
    (e.g. |q| >= 1) are reported as ConfigError on the offending field.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is None:
        text = resources.files("qkzlab").joinpath(DEFAULT_CONFIG).read_text()
        source = f"<bundled {DEFAULT_CONFIG}>"
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
        source = str(path)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("file", f"parse error: {exc}") from None
    if "params" not in cp:
        raise ConfigError("params", "missing [params] section")
    ps = cp["params"]
    for key in ("q", "n", "ell"):
        if key not in ps:
            raise ConfigError(f"params.{key}", "required")
    q = _get(ps, "q", parse_complex, None, "params.q")
    if q.imag == 0:
        q = q.real
    n = _get(ps, "n", int, None, "params.n")
    ell = _get(ps, "ell", int, None, "params.ell")
    alphas = _get(ps, "alpha", lambda s: [parse_complex(a) for a in _split(s)], [1.0], "params.alpha")
    eta = _get(ps, "eta", float, 0.05, "params.eta")
    zspec = ps.get("z", "auto").strip()
    if zspec == "auto":
        zs = _get(ps, "z_seed", int, 0, "params.z_seed")
        noise = _get(ps, "z_noise", float, 0.05, "params.z_noise")
        if n < 1:
            raise ConfigError("params.n", f"n must be positive, got {n}")
        z = default_points(n, seed=zs, noise=noise)
    else:
        z = _get(ps, "z", lambda s: tuple(parse_complex(x) for x in _split(s)), None, "params.z")
    params = []
    for a in alphas:
        try:
            params.append(ModelParams(q=q, n=n, ell=ell, z=z, alpha=a, eta=eta))
        except ParameterError as exc:
            raise ConfigError("params", str(exc)) from None

    rs = cp["run"] if "run" in cp else {}
    seed = _get(rs, "seed", int, 0, "run.seed")
    suites = _get(rs, "suites", _split, ["all"], "run.suites")
    suites = _check_suites(suites, "run.suites")
    jobs = _get(rs, "jobs", int, 1, "run.jobs")
    out = Path(rs.get("out", "qkzlab-reports").strip())
    fmt = rs.get("format", "both").strip()
    if fmt not in FORMATS:
        raise ConfigError("run.format", f"expected one of {FORMATS}, got {fmt!r}")
    return RunConfig(params, seed, suites, max(jobs, 1), out, fmt, source)


def _check_suites(names: Sequence[str], where: str) -> tuple[str, ...]:
    if list(names) == ["all"]:
        return SUITES
    bad = [s for s in names if s not in SUITES]
    if bad:
        raise ConfigError(where, f"unknown suite(s) {bad}; known: {', '.join(SUITES)}")
    return tuple(s for s in SUITES if s in names)


def _fmt_c(x: complex) -> str:
    x = complex(x)
    return f"{x.real:.6g}" if x.imag == 0 else f"{x.real:.6g}{x.imag:+.6g}i"


# -- validate --------------------------------------------------------------------

def validate_config(cfg: RunConfig, out=None) -> bool:
    out = out or sys.stdout
    ok = True
    for params in cfg.params:
        print(f"alpha = {_fmt_c(params.alpha)}", file=out)
        print(f"  p = q^4 = {_fmt_c(params.p)}", file=out)
        print(f"  kappa = alpha q^(2 ell - 2 - n) = {_fmt_c(params.kappa)}", file=out)
        lo, hi = params.contour_interval()
        print(f"  contour radius interval = ({lo:.6g}, {hi:.6g})", file=out)
        checks = params.diagnostics()
        for c in checks:
            print(f"  [{'ok' if c.ok else 'FAIL'}] {c.name}: {c.detail}", file=out)
        bad = [c.name for c in checks if not c.ok]
        if not bad:
            try:
                spec = contour_spec(params)
            except QuadratureError as exc:
                bad = ["contour feasibility"]
                print(f"  [FAIL] contour feasibility: {exc}", file=out)
            else:
                print(f"  radius = {spec.radius:.6g}, corrections = {len(spec.corrections)}", file=out)
                for c in spec.corrections:
                    sign = "+" if c.sign > 0 else "-"
                    print(f"    {sign} {c.family} shell {c.shell} site {c.site} at {_fmt_c(c.point)}", file=out)
        if bad:
            ok = False
            print(f"  INVALID: {', '.join(bad)}", file=out)
        else:
            print("  valid", file=out)
    return ok


# -- run ----------------------------------------------------------------------------

def _task(args):
    suite, params, seed, sites, negative = args
    return run_suite(suite, params, seed=seed, sites=sites, negative_controls=negative)


def run_reports(cfg: RunConfig, sites: Sequence[int] | None = None, negative_controls: bool = False,
                jobs: int | None = None, on_suite=None) -> dict[str, VerificationReport]:
    """Run every configured suite over every parameter set; one merged report per suite.

    Results are merged in a fixed order whatever the completion order, so
    the reports do not depend on ``jobs``.
    """
    for p in cfg.params:
        p.validate()
    tasks = [(s, p, cfg.seed, sites, negative_controls) for s in cfg.suites for p in cfg.params]
    jobs = cfg.jobs if jobs is None else jobs
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    merged: dict[str, VerificationReport] = {}
    k = 0
    for s in cfg.suites:
        rep = VerificationReport(s, seed=cfg.seed)
        for _ in cfg.params:
            rep.extend(results[k])
            k += 1
        merged[s] = rep
        if on_suite is not None:
            on_suite(rep)
    return merged


def overall_status(reports: dict[str, VerificationReport]) -> str:
    states = {r.status for r in reports.values()}
    if FAIL in states:
        return FAIL
    if INCONCLUSIVE in states:
        return INCONCLUSIVE
    return PASS


def exit_code(status: str) -> int:
    return {PASS: EXIT_OK, FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}[status]


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def summary_dict(reports: dict[str, VerificationReport]) -> dict:
    rows = {}
    for name, rep in reports.items():
        counts = {}
        for r in rep.records:
            counts[r.status] = counts.get(r.status, 0) + 1
        me = rep.max_error
        rows[name] = {"status": rep.status, "max_error": me if math.isfinite(me) else str(me), "counts": counts}
    return {"schema": 1, "status": overall_status(reports), "suites": rows}


def text_table(rep: VerificationReport) -> str:
    lines = [f"== {rep.suite}: {rep.status} (max error {rep.max_error:.3g})"]
    w = max([len(r.check) for r in rep.records] + [5])
    for r in rep.records:
        err = f"{r.error:.3e}" if math.isfinite(r.error) else str(r.error)
        mark = {"identity": "", "control": " (control)", "info": " (info)"}[r.kind]
        note = f"  # {r.note}" if r.note else ""
        lines.append(f"  {r.check:<{w}}  {err:>10}  tol {r.tol:<8.1e} {r.status}{mark}{note}")
    return "\n".join(lines) + "\n"


def summary_text(reports: dict[str, VerificationReport]) -> str:
    lines = [f"{'suite':<14} {'status':<13} {'max error':>10}  fail  inconcl"]
    for name, rep in reports.items():
        nf = sum(r.status == FAIL for r in rep.records)
        ni = sum(r.status == INCONCLUSIVE for r in rep.records)
        lines.append(f"{name:<14} {rep.status:<13} {rep.max_error:>10.3e}  {nf:>4}  {ni:>7}")
    lines.append(f"overall: {overall_status(reports)}")
    return "\n".join(lines) + "\n"


def compare_baseline(summary: dict, baseline: dict) -> list[str]:
    """Suites whose status got worse or whose max error grew by more than 10x."""
    rank = {PASS: 0, INCONCLUSIVE: 1, FAIL: 2}
    out = []
    for name, row in summary["suites"].items():
        old = baseline.get("suites", {}).get(name)
        if old is None:
            continue
        if rank[row["status"]] > rank.get(old["status"], 0):
            out.append(f"{name}: {old['status']} -> {row['status']}")
        a, b = row["max_error"], old["max_error"]
        if isinstance(a, float) and isinstance(b, (int, float)) and a > 10 * max(b, 1e-300) and a > 1e-12:
            out.append(f"{name}: max error {b:.3g} -> {a:.3g}")
    return out


def _write(out_dir: Path, fmt: str, rep: VerificationReport) -> None:
    if fmt in ("json", "both"):
        (out_dir / f"{rep.suite}.json").write_text(dumps(rep.to_dict()))
    if fmt in ("text", "both"):
        (out_dir / f"{rep.suite}.txt").write_text(text_table(rep))


def cmd_run(args) -> int:
    try:
        cfg = read_config(args.config)
        if args.suite:
            cfg.suites = _check_suites(args.suite, "--suite")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    env = os.environ.get("QKZLAB_SEED")
    if env is not None:
        try:
            cfg.seed = int(env)
        except ValueError:
            print(f"config error: QKZLAB_SEED={env!r} is not an integer", file=sys.stderr)
            return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = Path(args.out)
    if args.jobs is not None:
        cfg.jobs = max(args.jobs, 1)
    if args.j and "qkz" not in cfg.suites:
        print("note: --j only filters the qkz suite, which is not selected", file=sys.stderr)
    for p in cfg.params:
        try:
            p.validate()
        except ParameterError as exc:
            print(f"invalid parameters (alpha = {_fmt_c(p.alpha)}): {exc}", file=sys.stderr)
            return EXIT_CONFIG
    cfg.out.mkdir(parents=True, exist_ok=True)

    def flush(rep):
        _write(cfg.out, cfg.fmt, rep)
        if not args.quiet:
            print(f"{rep.suite:<14} {rep.status:<13} max error {rep.max_error:.3e}", flush=True)

    reports = run_reports(cfg, sites=args.j or None, negative_controls=args.negative_controls, on_suite=flush)
    summary = summary_dict(reports)
    timings = {name: rep.timings for name, rep in reports.items()}
    (cfg.out / "summary.json").write_text(dumps(summary))
    (cfg.out / "timings.json").write_text(dumps(timings))
    table = summary_text(reports)
    (cfg.out / "summary.txt").write_text(table)
    print(table, end="")
    if args.baseline:
        try:
            base = json.loads(Path(args.baseline).read_text())
        except (OSError, ValueError) as exc:
            print(f"cannot read baseline {args.baseline}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for line in compare_baseline(summary, base):
            print(f"regression: {line}")
    return exit_code(summary["status"])


def cmd_validate(args) -> int:
    try:
        cfg = read_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"config: {cfg.source}")
    return EXIT_OK if validate_config(cfg) else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qkzlab", description="Verify hypergeometric solutions of the level-zero qKZ equation.")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", help="check a config and echo derived quantities")
    v.add_argument("config", nargs="?", help="INI config (default: bundled)")
    v.set_defaults(func=cmd_validate)
    r = sub.add_parser("run", help="run verification suites and write reports")
    r.add_argument("config", nargs="?", help="INI config (default: bundled)")
    r.add_argument("--suite", action="append", metavar="S", help=f"suite to run, repeatable ({', '.join(SUITES)})")
    r.add_argument("--j", action="append", type=int, metavar="J", help="qkz suite: only verify step j (repeatable)")
    r.add_argument("--jobs", type=int, metavar="K", help="worker processes (default: config, else 1)")
    r.add_argument("--out", metavar="DIR", help="report directory")
    r.add_argument("--seed", type=int, help="override config seed and QKZLAB_SEED")
    r.add_argument("--negative-controls", action="store_true", help="add perturbed-kappa and p = q^3 controls")
    r.add_argument("--baseline", metavar="SUMMARY", help="earlier summary.json to compare against")
    r.add_argument("--quiet", action="store_true", help="only print the summary table")
    r.set_defaults(func=cmd_run)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
