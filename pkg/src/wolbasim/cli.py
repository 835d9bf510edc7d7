"""Command-line front end.

Subcommands: simulate (run one scenario file, write trajectory CSV + report
JSON), equilibria (print the four equilibria with stability tags),
check-gains (validate gain/output matrices, per-condition table), sweep
(Cartesian parameter grid over a base scenario, one report per cell plus a
deterministic summary CSV).

Exit codes: 0 success, 2 validation/schema failure, 3 integrator failure,
4 gain-check failure.  When --out is omitted, the WOLBASIM_OUT_DIR
environment variable supplies the output directory (default: current
directory).
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import IntegrationError, SchemaError, ValidationError
from .model import ModelParams, equilibria
from .observer import GainSpec, OutputMap, default_output_map, validate_gains
from .scenario import run_scenario
from .scenario_io import (
    load_scenario,
    scenario_from_dict,
    write_report_json,
    write_trajectory_csv,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INTEGRATION = 3
EXIT_GAINS = 4

_OUT_DIR_ENV = "WOLBASIM_OUT_DIR"


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare strings (e.g. method names) need no quotes


def _apply_override(doc: dict, dotted: str, value) -> None:
    """Set doc[a][b][c] = value for dotted path 'a.b.c', creating missing
    intermediate objects; a non-object on the way is a schema error."""
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if key not in node or node[key] is None:
            node[key] = {}
        node = node[key]
        if not isinstance(node, dict):
            raise SchemaError(
                f"override {dotted!r}: {key!r} is not an object in the scenario document"
            )
    node[keys[-1]] = value


def _resolve_out_dir(out) -> str:
    out_dir = out if out is not None else os.environ.get(_OUT_DIR_ENV, ".")
    if not os.path.isdir(out_dir):
        raise ValidationError(f"output directory does not exist: {out_dir}")
    return out_dir


def _scenario_from_file(path, overrides):
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a JSON object at the top level")
    for dotted, value in overrides:
        _apply_override(doc, dotted, value)
    return scenario_from_dict(doc, path=str(path))


def cmd_simulate(args) -> int:
    try:
        overrides = [
            (dotted, _parse_override_value(text))
            for dotted, _, text in (item.partition("=") for item in args.set or [])
        ]
        for dotted, _ in overrides:
            if not dotted:
                raise SchemaError("--set expects KEY.PATH=VALUE")
        s = _scenario_from_file(args.scenario, overrides)
        out_dir = _resolve_out_dir(args.out)
    except (SchemaError, ValidationError) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    try:
        traj, report = run_scenario(s)
    except IntegrationError as exc:
        return _fail(str(exc), EXIT_INTEGRATION)
    csv_path = os.path.join(out_dir, f"{s.name}.csv")
    report_path = os.path.join(out_dir, f"{s.name}.report.json")
    write_trajectory_csv(traj, csv_path)
    write_report_json(report, report_path)
    print(f"scenario '{s.name}': converged={report.converged} "
          f"enclosure_violations={report.enclosure_violations}")
    print(f"final state: ({', '.join(f'{v:.6g}' for v in report.final_state)})")
    print(f"total release: u_L={report.total_release_L:.6g} u_A={report.total_release_A:.6g}")
    print(f"wrote {csv_path}")
    print(f"wrote {report_path}")
    return EXIT_OK


def cmd_equilibria(args) -> int:
    try:
        if args.params_file is not None:
            doc = _load_json(args.params_file)
            if not isinstance(doc, dict):
                raise SchemaError(f"{args.params_file}: expected a JSON object")
            unknown = sorted(set(doc) - {"gamma_U", "gamma_W", "R0_U", "R0_W"})
            if unknown:
                raise SchemaError(
                    f"{args.params_file}: unknown key(s) {', '.join(map(repr, unknown))}"
                )
            p = ModelParams(**doc)
        else:
            missing = [
                flag
                for flag, v in (
                    ("--gamma-U", args.gamma_U),
                    ("--gamma-W", args.gamma_W),
                    ("--R0-U", args.R0_U),
                    ("--R0-W", args.R0_W),
                )
                if v is None
            ]
            if missing:
                raise SchemaError(
                    f"missing {', '.join(missing)} (or use --params-file)"
                )
            p = ModelParams(
                gamma_U=args.gamma_U,
                gamma_W=args.gamma_W,
                R0_U=args.R0_U,
                R0_W=args.R0_W,
            )
        eq = equilibria(p, tol=args.tol)
    except (SchemaError, ValidationError) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    for name, e in eq.items():
        vec = ", ".join(f"{v:12.6f}" for v in e.state.as_array())
        tag = "stable" if e.stable else "unstable"
        print(f"{name:<22s} ({vec})  {tag}")
    return EXIT_OK


def cmd_check_gains(args) -> int:
    try:
        doc = _load_json(args.file)
        if not isinstance(doc, dict):
            raise SchemaError(f"{args.file}: expected a JSON object")
        unknown = sorted(set(doc) - {"M_minus", "M_plus", "epsilon", "C"})
        if unknown:
            raise SchemaError(f"{args.file}: unknown key(s) {', '.join(map(repr, unknown))}")
        for key in ("M_minus", "M_plus"):
            if key not in doc:
                raise SchemaError(f"{args.file}: missing required key {key!r}")
        g = GainSpec(
            M_minus=np.asarray(doc["M_minus"], dtype=np.float64),
            M_plus=np.asarray(doc["M_plus"], dtype=np.float64),
            epsilon=float(doc.get("epsilon", 1e-5)),
        )
        C = (
            OutputMap(np.asarray(doc["C"], dtype=np.float64))
            if "C" in doc
            else default_output_map()
        )
        report = validate_gains(g, C)
    except (SchemaError, ValidationError) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except (TypeError, ValueError) as exc:
        return _fail(f"{args.file}: {exc}", EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    for cond in report.conditions:
        if cond.passed:
            print(f"{cond.name:<16s} PASS")
        else:
            entries = "; ".join(
                f"(row {i + 1}, col {j + 1}) = {v:g}" for i, j, v in cond.violations
            )
            print(f"{cond.name:<16s} FAIL at {entries}")
    return EXIT_OK if report.all_ok else EXIT_GAINS


def _run_sweep_cell(payload):
    """Worker: build the scenario for one grid cell and run it."""
    doc, path_values = payload
    doc = json.loads(json.dumps(doc))  # deep copy; workers never share state
    for dotted, value in path_values:
        _apply_override(doc, dotted, value)
    s = scenario_from_dict(doc, path="sweep-cell")
    _, report = run_scenario(s)
    return report.to_dict()


def cmd_sweep(args) -> int:
    try:
        base_doc = _load_json(args.scenario)
        if not isinstance(base_doc, dict):
            raise SchemaError(f"{args.scenario}: expected a JSON object at the top level")
        grid_doc = _load_json(args.grid)
        if not isinstance(grid_doc, dict) or not grid_doc:
            raise SchemaError(f"{args.grid}: expected a non-empty JSON object "
                              "mapping dotted scenario paths to value lists")
        for key, values in grid_doc.items():
            if not isinstance(values, list) or not values:
                raise SchemaError(f"{args.grid}: {key!r} must map to a non-empty list")
        paths = sorted(grid_doc)
        cells = [
            list(zip(paths, combo))
            for combo in itertools.product(*(grid_doc[k] for k in paths))
        ]
        # validate every cell before any work: bad field paths or values
        # must fail the whole sweep up front
        for cell in cells:
            doc = json.loads(json.dumps(base_doc))
            for dotted, value in cell:
                _apply_override(doc, dotted, value)
            scenario_from_dict(doc, path=f"{args.scenario} (sweep cell)")
        out_dir = _resolve_out_dir(args.out)
    except (SchemaError, ValidationError) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_VALIDATION)

    payloads = [(base_doc, cell) for cell in cells]
    try:
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                reports = list(pool.map(_run_sweep_cell, payloads))
        else:
            reports = [_run_sweep_cell(p) for p in payloads]
    except IntegrationError as exc:
        return _fail(str(exc), EXIT_INTEGRATION)

    # single-writer collection keeps output deterministic for any worker count
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(
            ",".join(
                paths
                + [
                    "converged",
                    "total_release_L",
                    "total_release_A",
                    "peak_u_L",
                    "peak_u_A",
                    "enclosure_violations",
                ]
            )
            + "\n"
        )
        for idx, (cell, rep) in enumerate(zip(cells, reports)):
            report_path = os.path.join(out_dir, f"cell_{idx:04d}.report.json")
            with open(report_path, "w", encoding="utf-8") as rfh:
                json.dump(rep, rfh, indent=2, sort_keys=True)
                rfh.write("\n")
            values = [json.dumps(v) for _, v in cell]
            fh.write(
                ",".join(
                    values
                    + [
                        str(rep["converged"]).lower(),
                        "%.17g" % rep["total_release_L"],
                        "%.17g" % rep["total_release_A"],
                        "%.17g" % rep["peak_u_L"],
                        "%.17g" % rep["peak_u_A"],
                        str(rep["enclosure_violations"]),
                    ]
                )
                + "\n"
            )
    print(f"ran {len(cells)} cells; wrote {summary_path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wolbasim",
        description=(
            "Closed-loop population-replacement simulator: interval-observer "
            "based release laws on a two-population mosquito model."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario file")
    sim.add_argument("--scenario", required=True, help="scenario JSON file")
    sim.add_argument("--out", default=None,
                     help=f"output directory (default: ${_OUT_DIR_ENV} or '.')")
    sim.add_argument("--set", action="append", metavar="PATH=VALUE",
                     help="override a scenario field by dotted path "
                          "(e.g. --set solver.rel_tol=1e-7), repeatable")
    sim.set_defaults(func=cmd_simulate)

    eqp = sub.add_parser("equilibria", help="print the four equilibria with stability tags")
    eqp.add_argument("--params-file", default=None, help="JSON file with the four model constants")
    eqp.add_argument("--gamma-U", type=float, default=None, dest="gamma_U")
    eqp.add_argument("--gamma-W", type=float, default=None, dest="gamma_W")
    eqp.add_argument("--R0-U", type=float, default=None, dest="R0_U")
    eqp.add_argument("--R0-W", type=float, default=None, dest="R0_W")
    eqp.add_argument("--tol", type=float, default=1e-12, help="residual tolerance for the coexistence root")
    eqp.set_defaults(func=cmd_equilibria)

    chk = sub.add_parser("check-gains", help="validate gain/output matrices")
    chk.add_argument("--file", required=True,
                     help="JSON file with M_minus, M_plus, optional epsilon and C")
    chk.set_defaults(func=cmd_check_gains)

    swp = sub.add_parser("sweep", help="run a Cartesian parameter grid")
    swp.add_argument("--scenario", required=True, help="base scenario JSON file")
    swp.add_argument("--grid", required=True,
                     help="JSON file mapping dotted scenario paths to value lists")
    swp.add_argument("--out", default=None,
                     help=f"output directory (default: ${_OUT_DIR_ENV} or '.')")
    swp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
