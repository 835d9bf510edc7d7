"""Time integration with adaptive and fixed-step Runge-Kutta drivers.

The adaptive driver is an embedded Dormand-Prince 5(4) pair with
error-per-step control; the fixed-step driver is classic RK4 and serves as
an independent cross-check oracle.  Both integrate over a uniform sample
grid and never step across a sample instant, so returned states sit exactly
on the grid.

Two field representations are accepted:

* a :class:`KernelField` handle (integer field code + parameter pack),
  dispatched to the compiled drivers in :mod:`wolbasim.kernels`;
* any Python callable ``f(t, y) -> dy``, run through pure-Python mirrors of
  the same algorithms (same tableau, error control, and clipping policy).

Negative undershoot policy: accepted states with components in
[-clip_tol, 0) are clipped to 0 and counted; anything more negative aborts
with an error, so genuine model defects are never masked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, ValidationError
from . import kernels

__all__ = [
    "SolverConfig",
    "KernelField",
    "SolverStats",
    "RawSolution",
    "integrate",
]

_METHODS = ("adaptive_rk45", "fixed_rk4")


@dataclass(frozen=True)
class SolverConfig:
    """Driver settings.

    h_init seeds the adaptive step controller and is the (maximum) substep
    of the fixed-step method; h_max caps the adaptive step.
    """

    rel_tol: float = 1e-6
    abs_tol: float = 1e-8
    h_init: float = 1e-3
    h_max: float = 0.03
    method: str = "adaptive_rk45"

    def __post_init__(self):
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0.0):
            raise ValidationError(f"rel_tol must be > 0, got {self.rel_tol!r}")
        if not (math.isfinite(self.abs_tol) and self.abs_tol > 0.0):
            raise ValidationError(f"abs_tol must be > 0, got {self.abs_tol!r}")
        if not (math.isfinite(self.h_init) and self.h_init > 0.0):
            raise ValidationError(f"h_init must be > 0, got {self.h_init!r}")
        if not (math.isfinite(self.h_max) and self.h_max >= self.h_init):
            raise ValidationError(
                f"need 0 < h_init <= h_max, got h_init={self.h_init!r}, h_max={self.h_max!r}"
            )
        if self.method not in _METHODS:
            raise ValidationError(
                f"method must be one of {_METHODS}, got {self.method!r}"
            )


@dataclass(frozen=True, eq=False)
class KernelField:
    """Handle to a compiled vector field: integer code + flat parameter pack."""

    code: int
    pack: np.ndarray

    def __post_init__(self):
        if self.code not in kernels.FIELD_DIMS:
            raise ValidationError(f"unknown field code {self.code!r}")
        pack = np.asarray(self.pack, dtype=np.float64)
        object.__setattr__(self, "pack", pack)

    @property
    def dim(self) -> int:
        return kernels.FIELD_DIMS[self.code]


@dataclass(frozen=True)
class SolverStats:
    n_accepted: int
    n_rejected: int
    n_field_evals: int
    n_clips: int

    @property
    def n_steps(self) -> int:
        return self.n_accepted + self.n_rejected


@dataclass(frozen=True)
class RawSolution:
    """States on the sample grid plus driver statistics."""

    times: np.ndarray  # (n,)
    states: np.ndarray  # (n, d)
    stats: SolverStats


_STATUS_MESSAGES = {
    kernels.STATUS_STEP_UNDERFLOW: (
        "step size underflow at t={t:.6g}: the problem is too stiff for the "
        "configured tolerances"
    ),
    kernels.STATUS_NONFINITE: "non-finite derivative or state at t={t:.6g}",
    kernels.STATUS_REJECT_LIMIT: (
        "step control rejected too many consecutive attempts at t={t:.6g}"
    ),
    kernels.STATUS_NEGATIVE_STATE: (
        "a state component fell below the clipping tolerance at t={t:.6g}"
    ),
}


def _raise_for_status(status: int, t_fail: float):
    if status == kernels.STATUS_OK:
        return
    template = _STATUS_MESSAGES.get(status, "integration aborted at t={t:.6g}")
    raise IntegrationError(template.format(t=t_fail), status=status, t_fail=t_fail)


def sample_grid(t_span, sample_dt: float) -> np.ndarray:
    """Uniform instants t0, t0+dt, ... covering [t0, t1].

    When the span is not an exact multiple of sample_dt, the final instant
    t1 is appended so the horizon endpoint is always reported.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
        raise ValidationError(f"need t1 > t0, got {t_span!r}")
    if not (math.isfinite(sample_dt) and sample_dt > 0.0):
        raise ValidationError(f"sample_dt must be > 0, got {sample_dt!r}")
    span = t1 - t0
    m = int(math.floor(span / sample_dt + 1e-9))
    grid = t0 + sample_dt * np.arange(m + 1, dtype=np.float64)
    if t1 - grid[-1] > 1e-9 * max(1.0, abs(t1)):
        grid = np.append(grid, t1)
    else:
        grid[-1] = t1
    return grid


def integrate(field, x0, t_span, cfg: SolverConfig = SolverConfig(), sample_dt: float = 0.1) -> RawSolution:
    """Integrate dx/dt = field(t, x) over t_span, sampling every sample_dt.

    Args:
        field: a KernelField handle or a callable f(t, y) -> dy.
        x0: initial state (finite 1-D array).
        t_span: (t0, t1) with t1 > t0.
        cfg: tolerances, step bounds and method selection.
        sample_dt: spacing of the reported sample instants.

    Returns:
        RawSolution with states of shape (n_samples, dim).

    Raises:
        IntegrationError: on step-size underflow (stiffness), non-finite
            derivatives, persistent step rejection, or a state component
            dropping below -abs_tol.
    """
    y0 = np.asarray(x0, dtype=np.float64)
    if y0.ndim != 1 or y0.size == 0:
        raise ValidationError(f"x0 must be a 1-D state vector, got shape {y0.shape}")
    if np.any(~np.isfinite(y0)):
        raise ValidationError(f"x0 must be finite, got {y0}")
    grid = sample_grid(t_span, sample_dt)

    if isinstance(field, KernelField):
        if y0.size != field.dim:
            raise ValidationError(
                f"x0 has dimension {y0.size} but the field expects {field.dim}"
            )
        if cfg.method == "adaptive_rk45":
            states, status, t_fail, nacc, nrej, nfev, nclip = kernels.rk45_solve(
                field.code, y0, grid, cfg.rel_tol, cfg.abs_tol, cfg.h_init, cfg.h_max, field.pack
            )
        else:
            states, status, t_fail, nsteps, nfev, nclip = kernels.rk4_solve(
                field.code, y0, grid, cfg.h_init, cfg.abs_tol, field.pack
            )
            nacc, nrej = nsteps, 0
    else:
        if not callable(field):
            raise ValidationError(
                f"field must be a KernelField or a callable, got {type(field).__name__}"
            )
        if cfg.method == "adaptive_rk45":
            states, status, t_fail, nacc, nrej, nfev, nclip = _rk45_python(
                field, y0, grid, cfg.rel_tol, cfg.abs_tol, cfg.h_init, cfg.h_max
            )
        else:
            states, status, t_fail, nsteps, nfev, nclip = _rk4_python(
                field, y0, grid, cfg.h_init, cfg.abs_tol
            )
            nacc, nrej = nsteps, 0
    _raise_for_status(status, t_fail)
    stats = SolverStats(
        n_accepted=int(nacc), n_rejected=int(nrej), n_field_evals=int(nfev), n_clips=int(nclip)
    )
    return RawSolution(times=grid, states=states, stats=stats)


# ─── pure-Python mirrors of the compiled drivers ─────────────────────────
#
# Same tableau, same error norm, same acceptance/clipping rules as
# kernels.rk45_solve / kernels.rk4_solve, for arbitrary Python callables.
# Kept in lockstep with the kernels; the test suite pins their equivalence.

_K = kernels  # shorthand for tableau constants


def _rk45_python(f, y0, t_grid, rel_tol, abs_tol, h_init, h_max):
    n = t_grid.shape[0]
    d = y0.shape[0]
    out = np.full((n, d), np.nan)
    y = y0.copy()
    out[0] = y

    status = _K.STATUS_OK
    t_fail = np.nan
    naccept = nreject = nclip = 0
    consec_rej = 0

    k1 = np.asarray(f(t_grid[0], y), dtype=np.float64)
    nfev = 1
    if not np.all(np.isfinite(k1)):
        status = _K.STATUS_NONFINITE
        t_fail = t_grid[0]

    h = min(h_init, h_max)
    for jseg in range(1, n):
        t = t_grid[jseg - 1]
        t_end = t_grid[jseg]
        while status == _K.STATUS_OK and t < t_end:
            remaining = t_end - t
            capped = h >= remaining
            h_step = remaining if capped else h
            if h < _K._H_FLOOR_FACTOR * max(abs(t), 1.0) and not capped:
                status = _K.STATUS_STEP_UNDERFLOW
                t_fail = t
                break
            k2 = np.asarray(f(t + _K._C2 * h_step, y + h_step * (_K._A21 * k1)), dtype=np.float64)
            k3 = np.asarray(f(t + _K._C3 * h_step, y + h_step * (_K._A31 * k1 + _K._A32 * k2)), dtype=np.float64)
            k4 = np.asarray(f(t + _K._C4 * h_step, y + h_step * (_K._A41 * k1 + _K._A42 * k2 + _K._A43 * k3)), dtype=np.float64)
            k5 = np.asarray(f(t + _K._C5 * h_step, y + h_step * (_K._A51 * k1 + _K._A52 * k2 + _K._A53 * k3 + _K._A54 * k4)), dtype=np.float64)
            k6 = np.asarray(f(t + h_step, y + h_step * (_K._A61 * k1 + _K._A62 * k2 + _K._A63 * k3 + _K._A64 * k4 + _K._A65 * k5)), dtype=np.float64)
            ynew = y + h_step * (_K._B1 * k1 + _K._B3 * k3 + _K._B4 * k4 + _K._B5 * k5 + _K._B6 * k6)
            k7 = np.asarray(f(t + h_step, ynew), dtype=np.float64)
            nfev += 6

            e = h_step * (
                _K._E1 * k1 + _K._E3 * k3 + _K._E4 * k4 + _K._E5 * k5 + _K._E6 * k6 + _K._E7 * k7
            )
            scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(ynew))
            q = e / scale
            err_norm = float(np.sqrt(np.mean(q * q)))
            finite = bool(np.all(np.isfinite(ynew)) and np.all(np.isfinite(e)))

            if not finite or not np.isfinite(err_norm):
                nreject += 1
                consec_rej += 1
                if consec_rej > _K._MAX_CONSECUTIVE_REJECTS:
                    status = _K.STATUS_NONFINITE
                    t_fail = t
                    break
                h = 0.5 * h_step
                continue

            if err_norm <= 1.0:
                naccept += 1
                consec_rej = 0
                t_new = t_end if capped else t + h_step
                neg = ynew < 0.0
                if np.any(neg):
                    if float(ynew.min()) < -abs_tol:
                        status = _K.STATUS_NEGATIVE_STATE
                        t_fail = t_new
                        break
                    nclip += int(neg.sum())
                    ynew = np.where(neg, 0.0, ynew)
                    k1 = np.asarray(f(t_new, ynew), dtype=np.float64)
                    nfev += 1
                else:
                    k1 = k7
                y = ynew
                t = t_new
                fac = 0.9 * err_norm ** (-0.2) if err_norm > 0.0 else 5.0
                fac = min(max(fac, 0.2), 5.0)
                if capped:
                    # grid-truncated steps only shrink the working step (growth
                    # estimates from short steps are unreliable)
                    if fac < 1.0:
                        h = h_step * fac
                else:
                    h = min(h_step * fac, h_max)
            else:
                nreject += 1
                consec_rej += 1
                if consec_rej > _K._MAX_CONSECUTIVE_REJECTS:
                    status = _K.STATUS_REJECT_LIMIT
                    t_fail = t
                    break
                h = h_step * max(0.9 * err_norm ** (-0.2), 0.2)
        if status != _K.STATUS_OK:
            break
        out[jseg] = y
    return out, status, t_fail, naccept, nreject, nfev, nclip


def _rk4_python(f, y0, t_grid, h_target, clip_tol):
    n = t_grid.shape[0]
    d = y0.shape[0]
    out = np.full((n, d), np.nan)
    y = y0.copy()
    out[0] = y

    status = _K.STATUS_OK
    t_fail = np.nan
    nsteps = nfev = nclip = 0

    for jseg in range(1, n):
        t0 = t_grid[jseg - 1]
        seg = t_grid[jseg] - t0
        nsub = max(int(np.ceil(seg / h_target - 1e-12)), 1)
        h = seg / nsub
        for s in range(nsub):
            t = t0 + s * h
            k1 = np.asarray(f(t, y), dtype=np.float64)
            k2 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k1), dtype=np.float64)
            k3 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k2), dtype=np.float64)
            k4 = np.asarray(f(t + h, y + h * k3), dtype=np.float64)
            nfev += 4
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            nsteps += 1
            if not np.all(np.isfinite(y)):
                status = _K.STATUS_NONFINITE
                t_fail = t + h
            elif float(y.min()) < 0.0:
                if float(y.min()) >= -clip_tol:
                    neg = y < 0.0
                    nclip += int(neg.sum())
                    y = np.where(neg, 0.0, y)
                else:
                    status = _K.STATUS_NEGATIVE_STATE
                    t_fail = t + h
            if status != _K.STATUS_OK:
                break
        if status != _K.STATUS_OK:
            break
        out[jseg] = y
    return out, status, t_fail, nsteps, nfev, nclip
