"""Serialization: scenario JSON, trajectory CSV, report JSON.

The scenario document mirrors the Scenario dataclass field-for-field, with
matrices as row-major arrays of arrays.  Unknown keys are rejected at every
nesting level; missing optional keys fall back to the documented defaults
with a logged notice.  All values print as plain decimal numbers.

Trajectory CSV columns (17 significant digits, exact float round-trip):
t, L_U, A_U, L_W, A_W, LU_hi, AU_hi, LW_lo, AW_lo, LU_lo, AU_lo, LW_hi,
AW_hi, u_L, u_A, then per measured channel i: yi_lo, yi_hi.
"""

from __future__ import annotations

import json
import logging
from typing import Optional

import numpy as np

from .errors import SchemaError
from .model import ModelParams, PopulationState
from .observer import GainSpec, ObserverPair, OutputMap, default_gain_spec, default_output_map
from .control import AdultLawParams, LawChoice
from .integrate import SolverConfig
from .scenario import RunReport, Scenario, Trajectory

__all__ = [
    "scenario_to_dict",
    "scenario_from_dict",
    "load_scenario",
    "save_scenario",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_report_json",
]

logger = logging.getLogger(__name__)


def scenario_to_dict(s: Scenario) -> dict:
    law: dict = {"tag": s.law.tag, "activation_time": s.law.activation_time}
    if s.law.adult_params is not None:
        lp = s.law.adult_params
        law["adult_params"] = {
            "k": lp.k,
            "k_U": lp.k_U,
            "positive_lower_terms": lp.positive_lower_terms,
        }
    return {
        "name": s.name,
        "params": {
            "gamma_U": s.params.gamma_U,
            "gamma_W": s.params.gamma_W,
            "R0_U": s.params.R0_U,
            "R0_W": s.params.R0_W,
        },
        "law": law,
        "x0": [s.x0.L_U, s.x0.A_U, s.x0.L_W, s.x0.A_W],
        "obs0": {
            "x_minus": [float(v) for v in s.obs0.x_minus],
            "x_plus": [float(v) for v in s.obs0.x_plus],
        },
        "C": [[float(v) for v in row] for row in s.C.C],
        "gains": {
            "M_minus": [[float(v) for v in row] for row in s.gains.M_minus],
            "M_plus": [[float(v) for v in row] for row in s.gains.M_plus],
            "epsilon": s.gains.epsilon,
        },
        "noise_lo": s.noise_lo,
        "noise_hi": s.noise_hi,
        "solver": {
            "rel_tol": s.solver.rel_tol,
            "abs_tol": s.solver.abs_tol,
            "h_init": s.solver.h_init,
            "h_max": s.solver.h_max,
            "method": s.solver.method,
        },
        "t_end": s.t_end,
        "sample_dt": s.sample_dt,
        "normalized_gains": s.normalized_gains,
    }


def _require_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(d: dict, allowed, path: str):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise SchemaError(
            f"{path}: unknown key(s) {', '.join(map(repr, unknown))}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def _number(d: dict, key: str, path: str, default=None, required: bool = False):
    if key not in d:
        if required:
            raise SchemaError(f"{path}: missing required key {key!r}")
        logger.info("%s.%s not given; using default %r", path, key, default)
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _boolean(d: dict, key: str, path: str, default: bool):
    if key not in d:
        logger.info("%s.%s not given; using default %r", path, key, default)
        return default
    v = d[key]
    if not isinstance(v, bool):
        raise SchemaError(f"{path}.{key}: expected true/false, got {v!r}")
    return v


def _vector(obj, length: int, path: str) -> np.ndarray:
    if not isinstance(obj, (list, tuple)) or len(obj) != length:
        raise SchemaError(f"{path}: expected an array of {length} numbers")
    try:
        return np.array([float(v) for v in obj], dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: expected an array of {length} numbers") from None


def _matrix(obj, path: str) -> np.ndarray:
    if not isinstance(obj, (list, tuple)) or not obj or not all(
        isinstance(r, (list, tuple)) for r in obj
    ):
        raise SchemaError(f"{path}: expected an array of equal-length number rows")
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise SchemaError(f"{path}: expected an array of equal-length number rows")
    try:
        return np.array([[float(v) for v in r] for r in obj], dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: expected an array of equal-length number rows") from None


def scenario_from_dict(d: dict, path: str = "scenario") -> Scenario:
    """Build a validated Scenario from a parsed document.

    Raises:
        SchemaError: on structural problems (unknown keys, wrong types,
            missing required sections).
        ValidationError: when the document parses but violates a scenario
            invariant (propagated from the domain constructors).
    """
    d = _require_mapping(d, path)
    _reject_unknown(
        d,
        (
            "name",
            "params",
            "law",
            "x0",
            "obs0",
            "C",
            "gains",
            "noise_lo",
            "noise_hi",
            "solver",
            "t_end",
            "sample_dt",
            "normalized_gains",
        ),
        path,
    )
    for key in ("params", "law", "x0", "obs0"):
        if key not in d:
            raise SchemaError(f"{path}: missing required key {key!r}")

    pd = _require_mapping(d["params"], f"{path}.params")
    _reject_unknown(pd, ("gamma_U", "gamma_W", "R0_U", "R0_W"), f"{path}.params")
    params = ModelParams(
        gamma_U=_number(pd, "gamma_U", f"{path}.params", required=True),
        gamma_W=_number(pd, "gamma_W", f"{path}.params", required=True),
        R0_U=_number(pd, "R0_U", f"{path}.params", required=True),
        R0_W=_number(pd, "R0_W", f"{path}.params", required=True),
    )

    ld = _require_mapping(d["law"], f"{path}.law")
    _reject_unknown(ld, ("tag", "adult_params", "activation_time"), f"{path}.law")
    if "tag" not in ld:
        raise SchemaError(f"{path}.law: missing required key 'tag'")
    tag = ld["tag"]
    if not isinstance(tag, str):
        raise SchemaError(f"{path}.law.tag: expected a string, got {tag!r}")
    adult_params: Optional[AdultLawParams] = None
    if "adult_params" in ld and ld["adult_params"] is not None:
        ad = _require_mapping(ld["adult_params"], f"{path}.law.adult_params")
        _reject_unknown(ad, ("k", "k_U", "positive_lower_terms"), f"{path}.law.adult_params")
        adult_params = AdultLawParams(
            k=_number(ad, "k", f"{path}.law.adult_params", required=True),
            k_U=_number(ad, "k_U", f"{path}.law.adult_params", required=True),
            positive_lower_terms=_boolean(
                ad, "positive_lower_terms", f"{path}.law.adult_params", False
            ),
        )
    law = LawChoice(
        tag=tag,
        adult_params=adult_params,
        activation_time=_number(ld, "activation_time", f"{path}.law", default=0.0),
    )

    x0 = PopulationState.from_array(_vector(d["x0"], 4, f"{path}.x0"))

    od = _require_mapping(d["obs0"], f"{path}.obs0")
    _reject_unknown(od, ("x_minus", "x_plus"), f"{path}.obs0")
    for key in ("x_minus", "x_plus"):
        if key not in od:
            raise SchemaError(f"{path}.obs0: missing required key {key!r}")
    obs0 = ObserverPair(
        x_minus=_vector(od["x_minus"], 4, f"{path}.obs0.x_minus"),
        x_plus=_vector(od["x_plus"], 4, f"{path}.obs0.x_plus"),
    )

    if "C" in d:
        C = OutputMap(_matrix(d["C"], f"{path}.C"))
    else:
        logger.info("%s.C not given; using the default output map", path)
        C = default_output_map()

    if "gains" in d:
        gd = _require_mapping(d["gains"], f"{path}.gains")
        _reject_unknown(gd, ("M_minus", "M_plus", "epsilon"), f"{path}.gains")
        for key in ("M_minus", "M_plus"):
            if key not in gd:
                raise SchemaError(f"{path}.gains: missing required key {key!r}")
        gains = GainSpec(
            M_minus=_matrix(gd["M_minus"], f"{path}.gains.M_minus"),
            M_plus=_matrix(gd["M_plus"], f"{path}.gains.M_plus"),
            epsilon=_number(gd, "epsilon", f"{path}.gains", default=1e-5),
        )
    else:
        logger.info("%s.gains not given; using the default gain spec", path)
        gains = default_gain_spec()

    if "solver" in d:
        sd = _require_mapping(d["solver"], f"{path}.solver")
        _reject_unknown(
            sd, ("rel_tol", "abs_tol", "h_init", "h_max", "method"), f"{path}.solver"
        )
        method = sd.get("method", "adaptive_rk45")
        if not isinstance(method, str):
            raise SchemaError(f"{path}.solver.method: expected a string, got {method!r}")
        solver = SolverConfig(
            rel_tol=_number(sd, "rel_tol", f"{path}.solver", default=1e-6),
            abs_tol=_number(sd, "abs_tol", f"{path}.solver", default=1e-8),
            h_init=_number(sd, "h_init", f"{path}.solver", default=1e-3),
            h_max=_number(sd, "h_max", f"{path}.solver", default=0.03),
            method=method,
        )
    else:
        logger.info("%s.solver not given; using default solver settings", path)
        solver = SolverConfig()

    name = d.get("name", "scenario")
    if not isinstance(name, str):
        raise SchemaError(f"{path}.name: expected a string, got {name!r}")

    return Scenario(
        params=params,
        law=law,
        x0=x0,
        obs0=obs0,
        C=C,
        gains=gains,
        noise_lo=_number(d, "noise_lo", path, default=0.8),
        noise_hi=_number(d, "noise_hi", path, default=1.2),
        solver=solver,
        t_end=_number(d, "t_end", path, default=100.0),
        sample_dt=_number(d, "sample_dt", path, default=0.1),
        name=name,
        normalized_gains=_boolean(d, "normalized_gains", path, False),
    )


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    return scenario_from_dict(doc, path=str(path))


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _csv_header(p: int) -> str:
    cols = [
        "t",
        "L_U",
        "A_U",
        "L_W",
        "A_W",
        "LU_hi",
        "AU_hi",
        "LW_lo",
        "AW_lo",
        "LU_lo",
        "AU_lo",
        "LW_hi",
        "AW_hi",
        "u_L",
        "u_A",
    ]
    for i in range(1, p + 1):
        cols.append(f"y{i}_lo")
        cols.append(f"y{i}_hi")
    return ",".join(cols)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the sampled trajectory; floats carry 17 significant digits so a
    reader recovers them exactly."""
    p = traj.y_minus.shape[1]
    cols = [traj.times[:, None], traj.states, traj.obs_minus, traj.obs_plus, traj.controls]
    for i in range(p):
        cols.append(traj.y_minus[:, i : i + 1])
        cols.append(traj.y_plus[:, i : i + 1])
    table = np.hstack(cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_csv_header(p) + "\n")
        for row in table:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def read_trajectory_csv(path):
    """Read a trajectory CSV back as (column_names, data array (n, ncols))."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    names = header.split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return names, data


def write_report_json(report: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
