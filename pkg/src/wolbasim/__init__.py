"""Closed-loop simulation of mosquito population replacement.

A four-state larvae/adult model of an uninfected and an intracellularly
infected mosquito population, an interval observer that brackets the
unmeasured state between two framer systems under bounded measurement
noise, two observer-based release laws (adult and larvae introduction),
Runge-Kutta integration, scenario orchestration, and a command-line front
end.

Set the environment variable WOLBASIM_NUMBA=0 to force the pure-Python
kernel backend (default: compiled with numba when available).
"""

from ._accel import NUMBA_ENABLED
from .errors import (
    ConvergenceError,
    IntegrationError,
    SchemaError,
    ValidationError,
)
from .model import (
    ControlInput,
    Equilibrium,
    EquilibriumSet,
    ModelParams,
    PopulationState,
    auxiliary_field,
    complete_infestation,
    disease_free,
    equilibria,
    infestation_pressure_field,
    input_matrix,
    neg_part,
    order_leq,
    pos_part,
    vector_field,
)
from .observer import (
    ConditionReport,
    GainReport,
    GainSpec,
    ObserverPair,
    OutputMap,
    default_gain_spec,
    default_output_map,
    encloses,
    gain_matrix,
    observer_field,
    validate_gains,
)
from .control import (
    AdultLawParams,
    LawChoice,
    adult_release,
    control_at,
    larvae_release,
)
from .integrate import (
    KernelField,
    RawSolution,
    SolverConfig,
    SolverStats,
    integrate,
    sample_grid,
)
from .scenario import (
    RunReport,
    Scenario,
    Trajectory,
    default_scenarios,
    measurement_bounds,
    run_scenario,
)
from .scenario_io import (
    load_scenario,
    read_trajectory_csv,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_report_json,
    write_trajectory_csv,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "__version__",
    # errors
    "ValidationError",
    "SchemaError",
    "ConvergenceError",
    "IntegrationError",
    # model
    "ModelParams",
    "PopulationState",
    "ControlInput",
    "Equilibrium",
    "EquilibriumSet",
    "pos_part",
    "neg_part",
    "order_leq",
    "input_matrix",
    "vector_field",
    "disease_free",
    "complete_infestation",
    "equilibria",
    "auxiliary_field",
    "infestation_pressure_field",
    # observer
    "ObserverPair",
    "OutputMap",
    "GainSpec",
    "ConditionReport",
    "GainReport",
    "default_output_map",
    "default_gain_spec",
    "gain_matrix",
    "validate_gains",
    "observer_field",
    "encloses",
    # control
    "AdultLawParams",
    "LawChoice",
    "adult_release",
    "larvae_release",
    "control_at",
    # integrate
    "SolverConfig",
    "KernelField",
    "SolverStats",
    "RawSolution",
    "integrate",
    "sample_grid",
    # scenario
    "Scenario",
    "Trajectory",
    "RunReport",
    "measurement_bounds",
    "run_scenario",
    "default_scenarios",
    # io
    "scenario_to_dict",
    "scenario_from_dict",
    "load_scenario",
    "save_scenario",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_report_json",
]
