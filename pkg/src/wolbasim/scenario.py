"""Declarative closed-loop experiments.

A Scenario bundles model constants, a release law, initial plant and framer
states, the output map, gains, measurement-noise fractions and solver
settings.  run_scenario integrates the joint 12-dimensional system (plant +
both framers, one continuous-time ODE), then derives per-sample controls,
measurement bounds, enclosure checks and convergence/cost metrics.

Measurement noise is deterministic interval inflation: the observer
consumes only the bounds (lo*y, hi*y), ordered per channel.  No random
number source exists anywhere in the pipeline, so identical scenarios
produce bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ValidationError
from .model import (
    ControlInput,
    ModelParams,
    PopulationState,
    complete_infestation,
    disease_free,
    order_leq,
)
from .observer import (
    GainSpec,
    ObserverPair,
    OutputMap,
    default_gain_spec,
    default_output_map,
    encloses,
    validate_gains,
)
from .control import AdultLawParams, LawChoice
from .integrate import KernelField, RawSolution, SolverConfig, SolverStats, integrate
from . import kernels

__all__ = [
    "Scenario",
    "Trajectory",
    "RunReport",
    "measurement_bounds",
    "run_scenario",
    "default_scenarios",
]

# trapezoid was renamed from trapz in numpy 2.0
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class Scenario:
    """A complete closed-loop experiment description (validated on build)."""

    params: ModelParams
    law: LawChoice
    x0: PopulationState
    obs0: ObserverPair
    C: OutputMap = field(default_factory=default_output_map)
    gains: GainSpec = field(default_factory=default_gain_spec)
    noise_lo: float = 0.8
    noise_hi: float = 1.2
    solver: SolverConfig = field(default_factory=SolverConfig)
    t_end: float = 100.0
    sample_dt: float = 0.1
    name: str = "scenario"
    normalized_gains: bool = False

    def __post_init__(self):
        if not (
            math.isfinite(self.noise_lo)
            and math.isfinite(self.noise_hi)
            and 0.0 < self.noise_lo <= 1.0 <= self.noise_hi
        ):
            raise ValidationError(
                f"need 0 < noise_lo <= 1 <= noise_hi, got {self.noise_lo!r}, {self.noise_hi!r}"
            )
        if not (math.isfinite(self.t_end) and self.t_end > 0.0):
            raise ValidationError(f"t_end must be > 0, got {self.t_end!r}")
        if not (math.isfinite(self.sample_dt) and 0.0 < self.sample_dt <= self.t_end):
            raise ValidationError(
                f"need 0 < sample_dt <= t_end, got {self.sample_dt!r}"
            )
        if self.gains.p != self.C.p:
            raise ValidationError(
                f"gain spec has {self.gains.p} channels but output map has {self.C.p}"
            )
        if not encloses(self.obs0, self.x0):
            raise ValidationError(
                "obs0 must enclose x0 at t = 0: each true component must lie "
                "between its lower and upper framer estimates"
            )
        report = validate_gains(self.gains, self.C)
        if not report.required_ok:
            failed = [c.name for c in report.conditions if not c.passed and c.name != "output-sign"]
            raise ValidationError(
                f"gain sign conditions failed: {', '.join(failed)} "
                "(run the gain checker for the violating entries)"
            )
        if self.law.tag == "adult":
            self.law.adult_params.validate_against(self.params)
        if self.law.tag == "larvae" and not self.obs0.L_W_hi > 0.0:
            raise ValidationError(
                "the larvae law needs a strictly positive initial upper larval "
                f"estimate L_W^+(0), got {self.obs0.L_W_hi}"
            )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled closed-loop run: plant, framers, controls, measurement bounds.

    Array shapes: times (n,), states (n, 4), obs_minus/obs_plus (n, 4)
    in the crossed framer convention, controls (n, 2) as (u_L, u_A),
    y_minus/y_plus (n, p).  All state rows are componentwise >= 0 (the
    driver clips integration noise at -abs_tol).
    """

    times: np.ndarray
    states: np.ndarray
    obs_minus: np.ndarray
    obs_plus: np.ndarray
    controls: np.ndarray
    y_minus: np.ndarray
    y_plus: np.ndarray
    stats: SolverStats

    def __len__(self) -> int:
        return self.times.shape[0]

    def state_at(self, i: int) -> PopulationState:
        return PopulationState.from_array(self.states[i])

    def observer_at(self, i: int) -> ObserverPair:
        return ObserverPair(self.obs_minus[i].copy(), self.obs_plus[i].copy())

    def control_at_index(self, i: int) -> ControlInput:
        return ControlInput(u_L=float(self.controls[i, 0]), u_A=float(self.controls[i, 1]))


@dataclass(frozen=True)
class RunReport:
    """Convergence and cost summary of one scenario run.

    Tail statistics cover the last 20% of the horizon (t >= 0.8 t_end):
    uninfected_sup_tail = (max L_U, max A_U), infected_inf_tail =
    (min L_W, min A_W).  converged is true when every uninfected tail
    maximum is below conv_tol and every infected tail minimum reaches
    (1 - conv_margin) of its complete-infestation value.
    """

    name: str
    final_state: Tuple[float, float, float, float]
    final_obs_minus: Tuple[float, float, float, float]
    final_obs_plus: Tuple[float, float, float, float]
    uninfected_sup_tail: Tuple[float, float]
    infected_inf_tail: Tuple[float, float]
    total_release_L: float
    total_release_A: float
    peak_u_L: float
    peak_u_A: float
    enclosure_violations: int
    converged: bool
    conv_tol: float
    conv_margin: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "final_state": list(self.final_state),
            "final_obs_minus": list(self.final_obs_minus),
            "final_obs_plus": list(self.final_obs_plus),
            "uninfected_sup_tail": list(self.uninfected_sup_tail),
            "infected_inf_tail": list(self.infected_inf_tail),
            "total_release_L": self.total_release_L,
            "total_release_A": self.total_release_A,
            "peak_u_L": self.peak_u_L,
            "peak_u_A": self.peak_u_A,
            "enclosure_violations": self.enclosure_violations,
            "converged": self.converged,
            "conv_tol": self.conv_tol,
            "conv_margin": self.conv_margin,
        }


def measurement_bounds(C: OutputMap, x, lo: float, hi: float):
    """Per-channel bounds (y_minus, y_plus) around y = C x.

    y_minus_i = min(lo*y_i, hi*y_i) and y_plus_i = max(lo*y_i, hi*y_i); the
    min/max guard keeps y_minus <= y <= y_plus on channels where y_i < 0
    (the default output map has one nonpositive channel).
    """
    if not lo <= 1.0 <= hi:
        raise ValidationError(f"need lo <= 1 <= hi, got {lo!r}, {hi!r}")
    xa = x.as_array() if isinstance(x, PopulationState) else np.asarray(x, dtype=np.float64)
    y = C.C @ xa
    return np.minimum(lo * y, hi * y), np.maximum(lo * y, hi * y)


def _closed_loop_field(s: Scenario) -> KernelField:
    if s.law.tag == "adult":
        lp = s.law.adult_params
        k, k_U, positive_lower = lp.k, lp.k_U, lp.positive_lower_terms
    else:
        k, k_U, positive_lower = 0.0, 0.0, False
    pack = kernels.pack_closed_loop(
        s.params.gamma_U,
        s.params.gamma_W,
        s.params.R0_U,
        s.params.R0_W,
        s.law.law_code,
        k,
        k_U,
        s.law.activation_time,
        positive_lower,
        s.gains.epsilon,
        s.normalized_gains,
        s.noise_lo,
        s.noise_hi,
        s.C.C,
        s.gains.M_minus,
        s.gains.M_plus,
    )
    return KernelField(kernels.FIELD_CLOSED_LOOP, pack)


def _controls_at_samples(s: Scenario, times, obs_minus, obs_plus) -> np.ndarray:
    """Re-evaluate the release law at each stored sample (same formula the
    integrator used, via the shared kernel)."""
    n = times.shape[0]
    out = np.zeros((n, 2))
    if s.law.tag == "none":
        return out
    if s.law.tag == "adult":
        lp = s.law.adult_params
        k, k_U, positive_lower = lp.k, lp.k_U, lp.positive_lower_terms
    else:
        k, k_U, positive_lower = 0.0, 0.0, False
    for i in range(n):
        u_L, u_A = kernels.control_eval(
            s.law.law_code,
            s.params.gamma_U,
            s.params.gamma_W,
            k,
            k_U,
            s.law.activation_time,
            positive_lower,
            times[i],
            obs_minus[i],
            obs_plus[i],
        )
        out[i, 0] = u_L
        out[i, 1] = u_A
    return out


def _count_enclosure_violations(states, obs_minus, obs_plus, tol: float) -> int:
    ok_nonneg = (
        (states.min(axis=1) >= -tol)
        & (obs_minus.min(axis=1) >= -tol)
        & (obs_plus.min(axis=1) >= -tol)
    )
    # cone order: minus framer bounds uninfected from above / infected from
    # below, the true state sits between minus and plus
    ok_lower = (
        (obs_minus[:, 0] >= states[:, 0] - tol)
        & (obs_minus[:, 1] >= states[:, 1] - tol)
        & (obs_minus[:, 2] <= states[:, 2] + tol)
        & (obs_minus[:, 3] <= states[:, 3] + tol)
    )
    ok_upper = (
        (states[:, 0] >= obs_plus[:, 0] - tol)
        & (states[:, 1] >= obs_plus[:, 1] - tol)
        & (states[:, 2] <= obs_plus[:, 2] + tol)
        & (states[:, 3] <= obs_plus[:, 3] + tol)
    )
    return int(np.count_nonzero(~(ok_nonneg & ok_lower & ok_upper)))


def run_scenario(
    s: Scenario, conv_tol: float = 1e-3, conv_margin: float = 0.01
) -> Tuple[Trajectory, RunReport]:
    """Integrate the scenario and summarize it.

    The plant and both framers are integrated jointly as one 12-dimensional
    ODE; the law and the output-injection terms are evaluated inside the
    field from the framer states and the plant's noisy measurement bounds.
    Per-sample controls and bounds are then re-derived from the stored
    trajectory with the same formulas.

    Raises:
        IntegrationError: propagated from the driver.
    """
    cl = _closed_loop_field(s)
    z0 = np.concatenate([s.x0.as_array(), s.obs0.x_minus, s.obs0.x_plus])
    raw: RawSolution = integrate(cl, z0, (0.0, s.t_end), s.solver, s.sample_dt)

    times = raw.times
    states = raw.states[:, 0:4]
    obs_minus = raw.states[:, 4:8]
    obs_plus = raw.states[:, 8:12]

    controls = _controls_at_samples(s, times, obs_minus, obs_plus)
    Y = states @ s.C.C.T
    y_minus = np.minimum(s.noise_lo * Y, s.noise_hi * Y)
    y_plus = np.maximum(s.noise_lo * Y, s.noise_hi * Y)

    traj = Trajectory(
        times=times,
        states=states,
        obs_minus=obs_minus,
        obs_plus=obs_plus,
        controls=controls,
        y_minus=y_minus,
        y_plus=y_plus,
        stats=raw.stats,
    )

    tail = times >= 0.8 * s.t_end
    sup_u = (float(states[tail, 0].max()), float(states[tail, 1].max()))
    inf_w = (float(states[tail, 2].min()), float(states[tail, 3].min()))
    ci = complete_infestation(s.params).as_array()
    converged = bool(
        max(sup_u) < conv_tol
        and inf_w[0] >= (1.0 - conv_margin) * ci[2]
        and inf_w[1] >= (1.0 - conv_margin) * ci[3]
    )

    violations = _count_enclosure_violations(
        states, obs_minus, obs_plus, tol=10.0 * s.solver.abs_tol
    )

    report = RunReport(
        name=s.name,
        final_state=tuple(float(v) for v in states[-1]),
        final_obs_minus=tuple(float(v) for v in obs_minus[-1]),
        final_obs_plus=tuple(float(v) for v in obs_plus[-1]),
        uninfected_sup_tail=sup_u,
        infected_inf_tail=inf_w,
        total_release_L=float(_trapezoid(controls[:, 0], times)),
        total_release_A=float(_trapezoid(controls[:, 1], times)),
        peak_u_L=float(controls[:, 0].max()),
        peak_u_A=float(controls[:, 1].max()),
        enclosure_violations=violations,
        converged=converged,
        conv_tol=conv_tol,
        conv_margin=conv_margin,
    )
    return traj, report


def default_scenarios() -> Tuple[Scenario, Scenario]:
    """The two reference experiments (adult release, larvae release).

    Shared setup: reference model constants; the plant starts at the
    disease-free equilibrium; the framers start from deliberately
    conservative estimates (double the uninfected equilibrium from above,
    5% of the infestation equilibrium from below, zero elsewhere);
    reference gains and output map; measurement bounds at 80%/120%.
    """
    p = ModelParams(gamma_U=0.79365, gamma_W=0.99207, R0_U=45.0, R0_W=34.2)
    df = disease_free(p)
    ci = complete_infestation(p)
    x0 = df
    obs0 = ObserverPair(
        x_minus=np.array([2.0 * df.L_U, 2.0 * df.A_U, 0.0, 0.0]),
        x_plus=np.array([0.0, 0.0, 0.05 * ci.L_W, 0.05 * ci.A_W]),
    )
    common = dict(
        params=p,
        x0=x0,
        obs0=obs0,
        C=default_output_map(),
        gains=default_gain_spec(),
        noise_lo=0.8,
        noise_hi=1.2,
        solver=SolverConfig(),
        t_end=100.0,
        sample_dt=0.1,
    )
    adult = Scenario(
        law=LawChoice(tag="adult", adult_params=AdultLawParams.for_model(p)),
        name="adult",
        **common,
    )
    larvae = Scenario(law=LawChoice(tag="larvae"), name="larvae", **common)
    return adult, larvae
