"""Command-line front end.

Four subcommands drive the toolkit from declarative configuration:

    cell       solve cell problems, report the effective model
    solve      one fine-vs-homogenized comparison with error metrics
    sweep      D-sweep at fixed l with fitted convergence rates
    example1d  compare the solvers against the 1D closed-form benchmark

Configuration is a flat INI file with one section per command; every key
can be overridden by a command-line flag. Reports embed the fully resolved
configuration and are byte-identical across reruns of the same config.
Exit codes: 0 pass, 1 validation error, 2 convergence failure,
3 acceptance tolerance exceeded.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench, reports
from .cell import build_effective_model, mass_balance_check, voigt_reuss_bounds
from .corrector import ErrorReport
from .errors import (CrossCheckFailure, EllipticityViolation, HomflowError,
                     NoConvergence, ResolutionError, ValidationError)
from .fields import FIELD_CATALOG, catalog_field, validate as validate_field
from .macro import boundary_flux_balance

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONVERGENCE = 2
EXIT_ACCEPTANCE = 3

# flag name -> (type, default); None defaults mean "required or contextual"
COMMAND_KEYS = {
    "cell": {
        "field": (str, "cosine1d"),
        "n": (int, 256),
        "dim": (int, None),
        "value": (float, None),
        "k1": (float, None),
        "k2": (float, None),
        "out": (str, "."),
    },
    "solve": {
        "field": (str, "cosine1d"),
        "source": (str, "example1d"),
        "dim": (int, None),
        "value": (float, None),
        "f-value": (float, 1.0),
        "l": (float, 1.0),
        "d-over-l": (float, 32.0),
        "cells-per-period": (int, 16),
        "n-cell": (int, 256),
        "out": (str, "."),
    },
    "sweep": {
        "field": (str, "cosine1d"),
        "source": (str, "example1d"),
        "dim": (int, 1),
        "value": (float, None),
        "f-value": (float, 1.0),
        "l": (float, 1.0),
        "ratios": (str, "16,32,64,128"),
        "cells-per-period": (int, 16),
        "n-cell": (int, 256),
        "workers": (int, 0),
        "out": (str, "."),
    },
    "example1d": {
        "l": (float, 1.0),
        "d-over-l": (float, 64.0),
        "cells-per-period": (int, 16),
        "n-cell": (int, 256),
        "out": (str, "."),
    },
}


def _read_config_file(path: str, command: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValidationError(f"config file {path!r} not found")
    if not parser.has_section(command):
        return {}
    allowed = COMMAND_KEYS[command]
    out = {}
    for key, raw in parser.items(command):
        if key not in allowed:
            raise ValidationError(
                f"unknown key {key!r} in [{command}] of {path}"
            )
        out[key] = allowed[key][0](raw)
    return out


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """defaults < config file < command-line flags."""
    spec = COMMAND_KEYS[command]
    resolved = {k: d for k, (_, d) in spec.items()}
    if args.config:
        resolved.update(_read_config_file(args.config, command))
    for key in spec:
        cli_val = getattr(args, key.replace("-", "_"), None)
        if cli_val is not None:
            resolved[key] = cli_val
    return resolved


def _field_params(cfg: dict) -> dict:
    params = {}
    if cfg["field"] == "constant":
        params["dim"] = int(cfg.get("dim") or 1)
        if cfg.get("value") is not None:
            params["value"] = cfg["value"]
    if cfg["field"] == "checkerboard":
        for k in ("k1", "k2"):
            if cfg.get(k) is not None:
                params[k] = cfg[k]
    return params


def _json_config(command: str, cfg: dict) -> dict:
    # the output directory is not part of the computation; leaving it out
    # keeps reports byte-identical wherever they are written
    out = {"command": command}
    out.update({k: v for k, v in cfg.items() if v is not None and k != "out"})
    return out


def cmd_cell(cfg: dict) -> int:
    field = catalog_field(cfg["field"], **_field_params(cfg))
    n = cfg["n"]
    report = validate_field(field, n)
    model, cellsol, _ = build_effective_model(field, n)
    reuss, voigt = voigt_reuss_bounds(field, n)
    eig_K0 = np.linalg.eigvalsh(model.K0)
    vr_ok = bool(
        np.all(eig_K0 >= np.linalg.eigvalsh(reuss) - 1e-8)
        and np.all(eig_K0 <= np.linalg.eigvalsh(voigt) + 1e-8)
    )
    balances = []
    for j in range(field.dim):
        eta = np.zeros(field.dim)
        eta[j] = 1.0
        balances.append(mass_balance_check(field, n, eta).defect)

    doc = model.to_json_dict()
    doc.update({
        "config": _json_config("cell", cfg),
        "lambda_est": report.lambda_est,
        "Lambda_est": report.Lambda_est,
        "mass_balance_defects": balances,
        "voigt_reuss": {
            "reuss": [float(v) for v in reuss.ravel()],
            "voigt": [float(v) for v in voigt.ravel()],
            "pass": vr_ok,
        },
    })
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports.write_json(out / "report.json", doc)
    print(f"K0 = {model.K0.tolist()}")
    print(f"report written to {out / 'report.json'}")
    if not vr_ok:
        raise ValidationError("effective tensor violates the Voigt-Reuss bounds")
    return EXIT_OK


def _build_case(cfg: dict):
    l = cfg["l"]
    D = l * cfg["d-over-l"]
    dim = int(cfg.get("dim") or (1 if cfg["source"] == "example1d" else 2))
    if cfg["source"] == "example1d":
        oracle = bench.AnalyticOracle1D(l, D)
        field = oracle.field()
        if cfg["field"] not in ("cosine1d",):
            raise ValidationError("the example1d source runs on the cosine1d field")
        source = oracle.source()
    else:
        field = catalog_field(cfg["field"], **_field_params({**cfg, "dim": dim}))
        if cfg["source"] == "constant":
            from .fields import TwoScaleSource
            source = TwoScaleSource.constant(field.dim, cfg["f-value"])
        elif cfg["source"] == "none":
            from .fields import TwoScaleSource
            source = TwoScaleSource.zero(field.dim)
        else:
            raise ValidationError(f"unknown source {cfg['source']!r}")
    return field, source, l, D


def _fields_csv_rows(case) -> tuple:
    grid = case.p.grid
    if grid.dim == 1:
        header = ["x", "p", "p0", "p1"]
        x = grid.axis_coords()
        rows = [[x[i], case.p.values[i], case.p0.values[i], case.p1.values[i]]
                for i in range(grid.m)]
        return header, rows
    header = ["x1", "x2", "p", "p0", "p1"]
    pts = grid.node_points().reshape(-1, 2)
    rows = [
        [pts[k, 0], pts[k, 1], case.p.values.ravel()[k],
         case.p0.values.ravel()[k], case.p1.values.ravel()[k]]
        for k in range(pts.shape[0])
    ]
    return header, rows


def _report_doc(rep: ErrorReport) -> dict:
    doc = {c: getattr(rep, c) for c in ErrorReport.CSV_COLUMNS}
    doc["e_H1_uncorrected"] = rep.e_H1_uncorrected
    return doc


def cmd_solve(cfg: dict) -> int:
    field, source, l, D = _build_case(cfg)
    case = bench.run_case(field, source, l, D, cfg["cells-per-period"], cfg["n-cell"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    header, rows = _fields_csv_rows(case)
    reports.write_csv(out / "fields.csv", header, rows)
    reports.write_csv(out / "sweep.csv", ErrorReport.CSV_COLUMNS,
                      [case.report.csv_row()])
    doc = {
        "config": _json_config("solve", cfg),
        "K0": [float(v) for v in case.model.K0.ravel()],
        "report": _report_doc(case.report),
        "flux_balance_defect": boundary_flux_balance(case.problem, case.p),
    }
    reports.write_json(out / "report.json", doc)
    r = case.report
    print(f"e_L2 = {r.e_L2:.6e}  e_H1 = {r.e_H1:.6e}  e_energy = {r.e_energy:.6e}")
    print(f"reports written to {out}")
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    try:
        ratios = tuple(int(tok) for tok in str(cfg["ratios"]).split(",") if tok.strip())
    except ValueError:
        raise ValidationError(
            f"ratios must be a comma-separated list of integers, got {cfg['ratios']!r}"
        )
    plan = bench.SweepPlan(
        dim=int(cfg["dim"]), field_name=cfg["field"], ratios=ratios, l=cfg["l"],
        cells_per_period=cfg["cells-per-period"], n_cell=cfg["n-cell"],
        source=cfg["source"], f_value=cfg["f-value"],
        field_params=_field_params(cfg),
    )
    workers = cfg["workers"] or (os.cpu_count() or 1)
    field = plan.build_field()

    def run_point(ratio: int):
        D = plan.l * ratio
        return bench.run_case(field, plan.build_source(D), plan.l, D,
                              plan.cells_per_period, plan.n_cell).report

    rows, failures = [], []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(r, pool.submit(run_point, r)) for r in plan.ratios]
        for ratio, fut in futures:  # gathered in plan order: deterministic
            try:
                rows.append(fut.result())
            except (NoConvergence, ResolutionError) as exc:
                failures.append({"ratio": ratio, "error": str(exc)})

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports.write_csv(out / "sweep.csv", ErrorReport.CSV_COLUMNS,
                      [r.csv_row() for r in rows])

    result = bench.SweepResult(plan, rows, {})
    verdicts = []
    if len(rows) >= 3 and not failures:
        for metric in ("e_L2", "e_H1", "e_energy"):
            try:
                result.fits[metric] = bench.fit_rate(
                    [(r.eps, getattr(r, metric)) for r in rows])
            except HomflowError:
                result.fits[metric] = None
        verdicts = bench.sweep_verdicts(result)

    doc = {
        "config": _json_config("sweep", cfg),
        "workers": workers,
        "points": [_report_doc(r) for r in rows],
        "failed_points": failures,
        "verdicts": verdicts,
        "pass": bool(verdicts) and all(v["pass"] for v in verdicts) and not failures,
    }
    reports.write_json(out / "report.json", doc)
    for v in verdicts:
        print(f"{v['metric']}: rate {v.get('fitted_rate'):.4f} "
              f"(expected {v.get('expected_rate')}) -> {'pass' if v['pass'] else 'FAIL'}")
    print(f"reports written to {out}")
    if failures:
        raise NoConvergence("sweep had failed points; partial results written",
                            float("nan"), 0)
    if not doc["pass"]:
        return EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_example1d(cfg: dict) -> int:
    l = cfg["l"]
    D = l * cfg["d-over-l"]
    cpp = cfg["cells-per-period"]
    oracle = bench.AnalyticOracle1D(l, D)
    case = bench.run_case(oracle.field(), oracle.source(), l, D, cpp, cfg["n-cell"])
    grid = case.p.grid
    x = grid.axis_coords()

    checks = []

    def check(name, value, bound, predicate):
        checks.append({"check": name, "value": value, "bound": bound,
                       "pass": bool(predicate)})

    ptol = 5e-3 * D**2 / (cpp / 16.0) ** 2
    perr = float(np.abs(case.p.values - oracle.p(x)).max())
    check("pointwise |p - oracle|", perr, ptol, perr < ptol)

    p0err = float(np.abs(case.p0.values - oracle.p0(x)).max())
    check("pointwise |p0 - oracle|", p0err, 1e-8 * D**2, p0err < 1e-8 * D**2)

    k0err = float(abs(case.model.K0[0, 0] - oracle.K0))
    check("effective coefficient |K0 - 1/2|", k0err, 1e-6, k0err < 1e-6)

    integer_ratio = abs(D / l - round(D / l)) < 1e-9
    rep = case.report
    if integer_ratio:
        # all three metrics behave as c_X / D^2; at l = 1 this is c_X (l/D)^2
        c = bench.predicted_constants(l, D)
        for name, got, pred, lo, hi in (
            ("e_L2 / predicted", rep.e_L2, c["c_L2"] / D**2, 0.95, 1.05),
            ("e_H1 / predicted", rep.e_H1, c["c_H1"] / D**2, 0.95, 1.05),
            ("e_energy / predicted", rep.e_energy, c["c_E"] / D**2, 0.9, 1.1),
        ):
            ratio = got / pred
            check(name, ratio, (lo, hi), lo <= ratio <= hi)

    doc = {
        "config": _json_config("example1d", cfg),
        "C": oracle.C,
        "integer_ratio": integer_ratio,
        "report": _report_doc(rep),
        "checks": checks,
    }
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports.write_json(out / "report.json", doc)

    width = max(len(c["check"]) for c in checks)
    for c in checks:
        status = "pass" if c["pass"] else "FAIL"
        print(f"{c['check']:<{width}}  {c['value']:.6e}  [{status}]")
    if not integer_ratio:
        print(f"non-integer D/l: boundary constant C = {oracle.C:.6e}")
    if not all(c["pass"] for c in checks):
        return EXIT_ACCEPTANCE
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems as validation errors (exit 1)."""

    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="homflow",
        description="effective coefficients and convergence verification "
                    "for flow in periodic media",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "cell": "solve unit-cell problems and export the effective model",
        "solve": "run one fine-vs-homogenized comparison",
        "sweep": "run a D-sweep and fit convergence rates",
        "example1d": "verify the solvers against the closed-form 1D benchmark",
    }
    for command, keys in COMMAND_KEYS.items():
        p = sub.add_parser(command, help=helps[command])
        p.add_argument("--config", help="INI config file with a [%s] section" % command)
        for key, (typ, default) in keys.items():
            p.add_argument(f"--{key}", type=typ, default=None, dest=key.replace("-", "_"),
                           help=f"default: {default}")
    return parser


HANDLERS = {
    "cell": cmd_cell,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "example1d": cmd_example1d,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args.command, args)
        field_names = set(FIELD_CATALOG)
        if "field" in cfg and cfg["field"] not in field_names:
            raise ValidationError(
                f"unknown field {cfg['field']!r}; catalog has: {sorted(field_names)}"
            )
        return HANDLERS[args.command](cfg)
    except (ValidationError, EllipticityViolation, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ResolutionError):
            print("hint: increase cells per period", file=sys.stderr)
        return EXIT_VALIDATION
    except (NoConvergence, CrossCheckFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
