"""Command-line front end.

Subcommands::

    netreduce reduce   --case ieee14 --zones ieee14 --method opt --out out/
    netreduce evaluate --case ieee14 --zones ieee14 --n 3000 --seed 0 --format csv --out out/
    netreduce compare  --case six_bus --zones six_bus --case ieee14 --zones ieee14 --out out/

``--case`` and ``--zones`` take a file path or a bundled case name; ``--zones
identity`` puts every bus in its own zone. Exit status is 0 on success, 1 for
unreadable or invalid input, 2 when a solver fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .b_fit import FitConfig, SusceptanceSolution, reduced_network
from .case_io import CaseFormatError, Network, ZonalAssignment, read_case, read_zones, write_reduced_case
from .dc_network import PtdfMatrix, SingularNetworkError
from .pipeline import EVAL_METHODS, FIT_METHODS, Reduction, objective_table, reduce_network
from .scenario_eval import QUANTILES, ErrorReport, ScenarioSpec, evaluate, sample_injections

__all__ = ["main", "build_parser", "cmd_reduce", "cmd_evaluate", "cmd_compare"]

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2

_REDUCE_ALIASES = {
    "opt": "opt_frobenius", "opt_frobenius": "opt_frobenius", "B_opt": "opt_frobenius",
    "oh": "eigen_oh", "eigen_oh": "eigen_oh", "B_oh": "eigen_oh",
    "shi": "ls_shi", "ls_shi": "ls_shi", "B_shi": "ls_shi",
    "phys": "physical", "physical": "physical", "B_phys": "physical",
}


class _InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _jnum(v) -> float | None:
    """JSON-safe float: NaN and infinities become null, the rest keep full precision."""
    v = float(v)
    return v if math.isfinite(v) else None


def _jvec(a) -> list:
    return [_jnum(v) for v in np.asarray(a, dtype=float).ravel()]


def _jmat(H: PtdfMatrix | None) -> dict | None:
    if H is None:
        return None
    return {
        "rows": list(H.row_labels),
        "cols": [int(c) for c in H.col_labels],
        "values": [_jvec(r) for r in H.values],
    }


def _cnum(v) -> str:
    v = float(v)
    return repr(v) if math.isfinite(v) else "nan"


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _write_csv(rows: list[list], header: list[str], path: Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def _fit_config(args) -> FitConfig:
    return FitConfig(M=args.eigen_M, convergence_tol=args.tol, max_iterations=args.max_iter)


def _scenario_spec(args) -> ScenarioSpec:
    return ScenarioSpec(mean=args.mean, relative_sigma=args.sigma_rel, absolute_sigma_floor=args.sigma_floor)


def _methods(text: str) -> list[str]:
    out = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in EVAL_METHODS]
    if bad or not out:
        raise _InputError(f"unknown method(s) {', '.join(bad) or '(none)'}; valid methods: {', '.join(EVAL_METHODS)}")
    return out


def _config_echo(args, **extra) -> dict[str, Any]:
    echo = {
        "case": str(args.case) if not isinstance(args.case, list) else [str(c) for c in args.case],
        "zones": str(args.zones) if not isinstance(args.zones, list) else [str(z) for z in args.zones],
        "eigen_M": args.eigen_M,
        "tol": args.tol,
        "max_iter": args.max_iter,
    }
    echo.update(extra)
    return echo


def _provenance(config: dict) -> dict:
    return {"tool": "netreduce", "version": __version__, "config": config}


def _load(case: str, zones: str) -> tuple[Network, ZonalAssignment]:
    try:
        net = read_case(case)
        za = ZonalAssignment.identity(net) if zones == "identity" else read_zones(zones, net)
    except (OSError, CaseFormatError, ValueError) as exc:
        raise _InputError(str(exc)) from exc
    return net, za


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _solution_json(sol: SusceptanceSolution) -> dict:
    return {
        "b": _jvec(sol.b),
        "anchor_index": sol.anchor_index,
        "anchor_value": _jnum(sol.anchor_value),
        "objective": _jnum(sol.objective_value),
        "status": sol.status,
        "warnings": list(sol.warnings),
        "iterations": sol.iterations,
        "rectified": list(sol.rectified),
    }


def _sidecar(red: Reduction, config: dict) -> dict:
    maps = red.maps
    return {
        "provenance": _provenance(config),
        "grid": {"name": red.net.name, "n_b": red.net.n_b, "n_z": red.za.n_z,
                 "n_l": red.net.n_l, "n_lr": maps.n_lr},
        "connections": list(maps.connection_labels),
        "zones": [int(z) for z in maps.zones],
        "slack_zone": int(maps.slack_zone),
        "anchor": {"index": red.anchor.index, "connection": maps.connection_labels[red.anchor.index],
                   "value": _jnum(red.anchor.value)},
        "H_ind": _jmat(red.H_ind),
        "H_dep": _jmat(red.H_dep),
        "solutions": {name: _solution_json(sol) for name, sol in sorted(red.solutions.items())},
        "objectives_vs_H_ind": {k: _jnum(v) for k, v in sorted(objective_table(red).items())},
        "errors": dict(sorted(red.errors.items())),
    }


def _report_json(rep: ErrorReport, config: dict, per_scenario: bool = False) -> dict:
    g = rep.grid
    out = {
        "provenance": _provenance(config),
        "grid": {"name": g.name, "n_b": g.n_b, "n_z": g.n_z, "n_l": g.n_l, "n_lr": g.n_lr,
                 "bus_reduction_ratio": _jnum(g.bus_reduction_ratio)},
        "scenarios": {"n": rep.n_scenarios, "seed": rep.seed, "mean": rep.spec.mean,
                      "relative_sigma": rep.spec.relative_sigma,
                      "absolute_sigma_floor": rep.spec.absolute_sigma_floor},
        "methods": {},
    }
    for m, s in rep.methods.items():
        entry = {
            "mean": _jnum(s.mean),
            "quantiles": {f"{q:g}": _jnum(v) for q, v in s.quantiles.items()},
            "failures": s.failures,
            "note": s.note,
        }
        if per_scenario:
            entry["values"] = _jvec(s.values)
        out["methods"][m] = entry
    return out


_Q_COLS = [f"q{int(round(q * 100)):02d}" for q in QUANTILES]


def _report_rows(rep: ErrorReport) -> list[list]:
    return [[m, _cnum(s.mean), *[_cnum(s.quantiles[q]) for q in QUANTILES], s.failures, s.note]
            for m, s in rep.methods.items()]


def _per_scenario_rows(rep: ErrorReport) -> list[list]:
    rows = []
    for m, s in rep.methods.items():
        rows.extend([m, i, _cnum(v)] for i, v in enumerate(s.values))
    return rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_reduce(args) -> int:
    net, za = _load(args.case, args.zones)
    cfg = _fit_config(args)
    method = _REDUCE_ALIASES.get(args.method)
    if method is None:
        raise _InputError(f"unknown method {args.method!r}; valid: {', '.join(sorted(_REDUCE_ALIASES))}")
    try:
        red = reduce_network(net, za, cfg, methods=[m for m in EVAL_METHODS if m.startswith("B_")])
    except (CaseFormatError, ValueError) as exc:
        raise _InputError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _config_echo(args, method=method)
    _dump_json(_sidecar(red, config), out / f"{net.name}_reduction.json")

    sol = red.solutions.get(method)
    if sol is None:
        print(f"error: {method} failed: {red.errors.get({v: k for k, v in FIT_METHODS.items()}[method])}",
              file=sys.stderr)
        return EXIT_SOLVER
    try:
        reduced = reduced_network(red.net, za, red.maps, sol)
        write_reduced_case(reduced, out / f"{net.name}_reduced.m")
    except (SingularNetworkError, ValueError, ZeroDivisionError) as exc:
        print(f"error: cannot export {method} solution: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for w in sol.warnings:
        print(f"warning: {method}: {w}", file=sys.stderr)
    return EXIT_OK


def _run_evaluate(case: str, zones: str, methods: list[str], args) -> tuple[ErrorReport, Reduction]:
    net, za = _load(case, zones)
    try:
        red = reduce_network(net, za, _fit_config(args), methods)
    except (CaseFormatError, ValueError) as exc:
        raise _InputError(str(exc)) from exc
    scen = sample_injections(red.net, args.n, args.seed, _scenario_spec(args))
    return evaluate(red.net, za, methods, scen, reduction=red), red


def _scenario_echo(args) -> dict:
    return {"n": args.n, "seed": args.seed, "mean": args.mean,
            "sigma_rel": args.sigma_rel, "sigma_floor": args.sigma_floor}


def cmd_evaluate(args) -> int:
    methods = _methods(args.methods)
    rep, _ = _run_evaluate(args.case, args.zones, methods, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _config_echo(args, methods=methods, **_scenario_echo(args))
    stem = rep.grid.name
    if args.format == "json":
        _dump_json(_report_json(rep, config, args.per_scenario), out / f"{stem}_report.json")
    else:
        _write_csv(_report_rows(rep), ["method", "mean", *_Q_COLS, "failures", "note"],
                   out / f"{stem}_report.csv")
    if args.per_scenario:
        _write_csv(_per_scenario_rows(rep), ["method", "scenario", "nrmse"], out / f"{stem}_scenarios.csv")
    for m, s in rep.methods.items():
        if s.note:
            print(f"warning: {m}: {s.note}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.case) != len(args.zones):
        raise _InputError("--case and --zones must be given the same number of times")
    methods = _methods(args.methods)
    rows, failed = [], []
    for case, zones in zip(args.case, args.zones):
        try:
            rep, red = _run_evaluate(case, zones, methods, args)
        except _InputError as exc:
            failed.append({"case": str(case), "zones": str(zones), "error": str(exc)})
            print(f"error: {case}: {exc}", file=sys.stderr)
            continue
        g = rep.grid
        row = {"grid": g.name, "n_b": g.n_b, "n_z": g.n_z, "n_l": g.n_l, "n_lr": g.n_lr,
               "bus_reduction_ratio": _jnum(g.bus_reduction_ratio),
               "mean_nrmse": {m: _jnum(s.mean) for m, s in rep.methods.items()},
               "failures": {m: s.failures for m, s in rep.methods.items()}}
        if not args.no_timings:
            row["fit_seconds"] = {m: _jnum(red.fit_seconds[FIT_METHODS[m]])
                                  for m in methods if FIT_METHODS.get(m) in red.fit_seconds}
        rows.append(row)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _config_echo(args, methods=methods, **_scenario_echo(args))
    if args.format == "json":
        _dump_json({"provenance": _provenance(config), "grids": rows, "failed": failed}, out / "compare.json")
    else:
        fit_ms = [m for m in methods if m in FIT_METHODS] if not args.no_timings else []
        header = ["grid", "n_b", "n_z", "n_l", "n_lr", "bus_reduction_ratio",
                  *[f"nrmse_{m}" for m in methods], *[f"seconds_{m}" for m in fit_ms]]
        table = []
        for r in rows:
            secs = r.get("fit_seconds", {})
            table.append([r["grid"], r["n_b"], r["n_z"], r["n_l"], r["n_lr"], _cnum(r["bus_reduction_ratio"]),
                          *[_cnum(_nan(r["mean_nrmse"][m])) for m in methods],
                          *[_cnum(_nan(secs.get(m))) for m in fit_ms]])
        _write_csv(table, header, out / "compare.csv")
        if failed:
            _write_csv([[f["case"], f["zones"], f["error"]] for f in failed], ["case", "zones", "error"],
                       out / "compare_failed.csv")
    return EXIT_SOLVER if failed else EXIT_OK


def _nan(v):
    return float("nan") if v is None else v


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, multi: bool = False) -> None:
    action = "append" if multi else "store"
    p.add_argument("--case", required=True, action=action, help="case file or bundled case name")
    p.add_argument("--zones", required=True, action=action, help="zone file, bundled name, or 'identity'")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--eigen-M", dest="eigen_M", type=float, default=1.0, help="norm of the eigen solution")
    p.add_argument("--tol", type=float, default=1e-8, help="optimizer gradient tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500, help="optimizer iteration cap")


def _scenarios(p: argparse.ArgumentParser) -> None:
    p.add_argument("--methods", default=",".join(EVAL_METHODS), help="comma-separated method ids")
    p.add_argument("--n", type=int, default=3000, help="number of scenarios")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean", choices=("zero", "base"), default="zero", help="scenario mean")
    p.add_argument("--sigma-rel", dest="sigma_rel", type=float, default=1.0)
    p.add_argument("--sigma-floor", dest="sigma_floor", type=float, default=1.0, help="MW")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netreduce", description="Zonal reduction of DC networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="fit a zonal equivalent and write it as a case file")
    _common(p)
    p.add_argument("--method", default="opt", help="opt, oh, shi or phys (default opt)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("evaluate", help="scenario NRMSE report for one grid")
    _common(p)
    _scenarios(p)
    p.add_argument("--per-scenario", action="store_true", help="also write per-scenario NRMSE (long CSV)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="one summary row per grid")
    _common(p, multi=True)
    _scenarios(p)
    p.add_argument("--no-timings", action="store_true", help="omit wall times (byte-stable output)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "n", 1) < 1:
        print("error: --n must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularNetworkError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
