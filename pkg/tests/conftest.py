"""Shared fixtures: reference parameters and pre-run default scenarios.

The reference parameter set used throughout (gamma_U = 0.79365,
gamma_W = 0.99207, R0_U = 45, R0_W = 34.2) is the published field-data
calibration that both default scenarios are built from.
"""

import numpy as np
import pytest

from wolbasim import ModelParams, default_scenarios, run_scenario
from wolbasim import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile/load the numba kernels once so timed tests measure runtime only."""
    kernels.warmup()


@pytest.fixture(scope="session")
def p_ref() -> ModelParams:
    return ModelParams(gamma_U=0.79365, gamma_W=0.99207, R0_U=45.0, R0_W=34.2)


@pytest.fixture(scope="session")
def adult_run():
    """(scenario, trajectory, report) for the default adult-release experiment."""
    adult, _ = default_scenarios()
    traj, report = run_scenario(adult)
    return adult, traj, report


@pytest.fixture(scope="session")
def larvae_run():
    """(scenario, trajectory, report) for the default larvae-release experiment."""
    _, larvae = default_scenarios()
    traj, report = run_scenario(larvae)
    return larvae, traj, report


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260819)
