"""Interval observer: a pair of framer systems bounding the unmeasured state.

The framer pair propagates two copies of the population model corrected by
measured output bounds, arranged so that the true state stays between them
componentwise for all time (in the cone order: the minus system carries
UPPER bounds of the uninfected components together with LOWER bounds of the
infected ones, and the plus system the mirror image).

Gain validity is a sign structure: in the cone coordinates given by
D = diag(-1, -1, 1, 1), the gains must satisfy D*K >= 0 and D*K*C*D <= 0.
A state-dependent scaling (each gain row multiplied by its own framer
component saturated at epsilon) switches the correction off at the orthant
boundary, which is what preserves nonnegativity of the framers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import ControlInput, ModelParams, PopulationState, order_leq
from . import kernels

__all__ = [
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
]

_D = np.diag([-1.0, -1.0, 1.0, 1.0])


@dataclass(frozen=True)
class ObserverPair:
    """Framer states in the crossed convention.

    x_minus holds (L_U^+, A_U^+, L_W^-, A_W^-); x_plus holds
    (L_U^-, A_U^-, L_W^+, A_W^+).  Both are nonnegative and satisfy
    x_minus <= x_plus in the cone order (which is exactly interval
    non-emptiness: each upper estimate dominates its lower partner).
    """

    x_minus: np.ndarray
    x_plus: np.ndarray

    def __post_init__(self):
        xm = np.asarray(self.x_minus, dtype=np.float64)
        xp = np.asarray(self.x_plus, dtype=np.float64)
        object.__setattr__(self, "x_minus", xm)
        object.__setattr__(self, "x_plus", xp)
        if xm.shape != (4,) or xp.shape != (4,):
            raise ValidationError(
                f"framer states must be 4-vectors, got {xm.shape} and {xp.shape}"
            )
        if np.any(~np.isfinite(xm)) or np.any(~np.isfinite(xp)):
            raise ValidationError("framer states must be finite")
        if np.any(xm < 0.0) or np.any(xp < 0.0):
            raise ValidationError(
                f"framer states must be nonnegative, got x_minus={xm}, x_plus={xp}"
            )
        if not order_leq(xm, xp):
            raise ValidationError(
                "empty framer interval: need L_U^+ >= L_U^-, A_U^+ >= A_U^-, "
                f"L_W^- <= L_W^+, A_W^- <= A_W^+; got x_minus={xm}, x_plus={xp}"
            )

    def __eq__(self, other):
        if not isinstance(other, ObserverPair):
            return NotImplemented
        return np.array_equal(self.x_minus, other.x_minus) and np.array_equal(
            self.x_plus, other.x_plus
        )

    def __hash__(self):
        return hash((self.x_minus.tobytes(), self.x_plus.tobytes()))

    # named accessors (crossed convention)
    @property
    def L_U_hi(self) -> float:
        return float(self.x_minus[0])

    @property
    def A_U_hi(self) -> float:
        return float(self.x_minus[1])

    @property
    def L_W_lo(self) -> float:
        return float(self.x_minus[2])

    @property
    def A_W_lo(self) -> float:
        return float(self.x_minus[3])

    @property
    def L_U_lo(self) -> float:
        return float(self.x_plus[0])

    @property
    def A_U_lo(self) -> float:
        return float(self.x_plus[1])

    @property
    def L_W_hi(self) -> float:
        return float(self.x_plus[2])

    @property
    def A_W_hi(self) -> float:
        return float(self.x_plus[3])


@dataclass(frozen=True)
class OutputMap:
    """Measured channels y = C x, C of shape (p, 4)."""

    C: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=np.float64))
        object.__setattr__(self, "C", C)
        if C.ndim != 2 or C.shape[1] != 4 or C.shape[0] < 1:
            raise ValidationError(f"C must have shape (p, 4) with p >= 1, got {C.shape}")
        if np.any(~np.isfinite(C)):
            raise ValidationError("C must be finite")

    def __eq__(self, other):
        if not isinstance(other, OutputMap):
            return NotImplemented
        return np.array_equal(self.C, other.C)

    def __hash__(self):
        return hash(self.C.tobytes())

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class GainSpec:
    """Constant gain matrices and the saturation threshold of the row scaling.

    Sign validity is deliberately NOT enforced at construction: build any
    spec and run validate_gains to get a per-condition report (the gain
    checker needs to be able to describe invalid specs).
    """

    M_minus: np.ndarray
    M_plus: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        Mm = np.atleast_2d(np.asarray(self.M_minus, dtype=np.float64))
        Mp = np.atleast_2d(np.asarray(self.M_plus, dtype=np.float64))
        object.__setattr__(self, "M_minus", Mm)
        object.__setattr__(self, "M_plus", Mp)
        if Mm.ndim != 2 or Mm.shape[0] != 4 or Mm.shape != Mp.shape:
            raise ValidationError(
                f"gain matrices must share shape (4, p), got {Mm.shape} and {Mp.shape}"
            )
        if np.any(~np.isfinite(Mm)) or np.any(~np.isfinite(Mp)):
            raise ValidationError("gain matrices must be finite")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon!r}")

    def __eq__(self, other):
        if not isinstance(other, GainSpec):
            return NotImplemented
        return (
            np.array_equal(self.M_minus, other.M_minus)
            and np.array_equal(self.M_plus, other.M_plus)
            and self.epsilon == other.epsilon
        )

    def __hash__(self):
        return hash((self.M_minus.tobytes(), self.M_plus.tobytes(), self.epsilon))

    @property
    def p(self) -> int:
        return self.M_minus.shape[1]


def default_output_map() -> OutputMap:
    """Larval measurement channels: y = (L_U, -L_W)."""
    return OutputMap(np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0]]))


def default_gain_spec() -> GainSpec:
    """Reference gain matrices (identical on both sides) with epsilon = 1e-5."""
    M = 0.1 * np.array(
        [[-1.0, -1.0], [-1.0, -1.0], [1.0, 1.0], [1.0, 1.0]]
    )
    return GainSpec(M_minus=M.copy(), M_plus=M.copy(), epsilon=1e-5)


def gain_matrix(g: GainSpec, side: str, x_side, normalized: bool = False) -> np.ndarray:
    """State-scaled gain: row i of M_side times max(min(x_i, epsilon), 0).

    Row i vanishes exactly when x_side_i = 0, which keeps the corrected
    framer inside the nonnegative orthant.  With normalized=True the scale
    is divided by epsilon (range [0, 1] instead of [0, epsilon]).

    Args:
        g: gain spec.
        side: "minus" or "plus".
        x_side: the corresponding framer state, componentwise >= 0.
    """
    if side == "minus":
        M = g.M_minus
    elif side == "plus":
        M = g.M_plus
    else:
        raise ValidationError(f'side must be "minus" or "plus", got {side!r}')
    x = np.asarray(x_side, dtype=np.float64)
    if x.shape != (4,):
        raise ValidationError(f"x_side must be a 4-vector, got shape {x.shape}")
    if np.any(x < 0.0):
        raise ValidationError(f"x_side must be nonnegative, got {x}")
    scale = np.minimum(x, g.epsilon)
    if normalized:
        scale = scale / g.epsilon
    return M * scale[:, None]


@dataclass(frozen=True)
class ConditionReport:
    """Pass/fail for one sign condition, with the violating entries."""

    name: str
    passed: bool
    violations: tuple  # ((i, j, value), ...) 0-based indices into the checked matrix


@dataclass(frozen=True)
class GainReport:
    conditions: tuple

    def condition(self, name: str) -> ConditionReport:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def required_ok(self) -> bool:
        """Row-sign and loop-sign conditions on both gain matrices."""
        return all(c.passed for c in self.conditions if c.name != "output-sign")

    @property
    def all_ok(self) -> bool:
        return all(c.passed for c in self.conditions)


def _sign_check(name: str, mat: np.ndarray, require_nonneg: bool) -> ConditionReport:
    bad = (mat < 0.0) if require_nonneg else (mat > 0.0)
    idx = np.argwhere(bad)
    viol = tuple((int(i), int(j), float(mat[i, j])) for i, j in idx)
    return ConditionReport(name=name, passed=not viol, violations=viol)


def validate_gains(g: GainSpec, C: OutputMap) -> GainReport:
    """Sign-structure report for a gain spec against an output map.

    Checked conditions (D = diag(-1,-1,1,1)):
      * row-sign-minus / row-sign-plus:  D*M >= 0 entrywise
        (uninfected gain rows <= 0, infected gain rows >= 0);
      * loop-sign-minus / loop-sign-plus:  D*M*C*D <= 0 entrywise
        (the output-injection loop is nonpositive in cone coordinates);
      * output-sign:  C*D <= 0 entrywise (sufficient condition on C alone;
        informational, not required when the loop-sign conditions hold).
    """
    if g.p != C.p:
        raise ValidationError(
            f"gain spec has {g.p} channels but output map has {C.p}"
        )
    conds = []
    conds.append(_sign_check("row-sign-minus", _D @ g.M_minus, require_nonneg=True))
    conds.append(_sign_check("row-sign-plus", _D @ g.M_plus, require_nonneg=True))
    conds.append(
        _sign_check("loop-sign-minus", _D @ g.M_minus @ C.C @ _D, require_nonneg=False)
    )
    conds.append(
        _sign_check("loop-sign-plus", _D @ g.M_plus @ C.C @ _D, require_nonneg=False)
    )
    conds.append(_sign_check("output-sign", C.C @ _D, require_nonneg=False))
    return GainReport(conditions=tuple(conds))


def observer_field(
    p: ModelParams,
    obs: ObserverPair,
    u,
    y_minus,
    y_plus,
    g: GainSpec,
    C: OutputMap,
    normalized: bool = False,
):
    """Framer derivatives (dx_minus, dx_plus).

    Each framer runs the population field plus the release input plus an
    output-injection correction driven by its own bound of the measurement:
    dx_s = f(x_s) + B u + K_s(x_s) (y_s - C x_s) for s in {minus, plus}.

    Args:
        p: model constants.
        obs: current framer pair.
        u: ControlInput or 2-array, componentwise >= 0.
        y_minus, y_plus: lower/upper measurement bounds, shape (p,).
        g: gain spec; C: output map.

    Returns:
        Tuple of two 4-arrays.
    """
    ua = u.as_array() if isinstance(u, ControlInput) else np.asarray(u, dtype=np.float64)
    if ua.shape != (2,) or np.any(ua < 0.0):
        raise ValidationError(f"input must be a nonnegative 2-vector, got {u!r}")
    ym = np.asarray(y_minus, dtype=np.float64)
    yp = np.asarray(y_plus, dtype=np.float64)
    if ym.shape != (C.p,) or yp.shape != (C.p,):
        raise ValidationError(
            f"measurement bounds must have shape ({C.p},), got {ym.shape}, {yp.shape}"
        )
    dxm = np.array(
        kernels._plant4(
            p.gamma_U, p.gamma_W, p.R0_U, p.R0_W, *obs.x_minus, ua[0], ua[1]
        )
    )
    dxp = np.array(
        kernels._plant4(
            p.gamma_U, p.gamma_W, p.R0_U, p.R0_W, *obs.x_plus, ua[0], ua[1]
        )
    )
    Km = gain_matrix(g, "minus", obs.x_minus, normalized=normalized)
    Kp = gain_matrix(g, "plus", obs.x_plus, normalized=normalized)
    dxm = dxm + Km @ (ym - C.C @ obs.x_minus)
    dxp = dxp + Kp @ (yp - C.C @ obs.x_plus)
    return dxm, dxp


def encloses(obs: ObserverPair, x, tol: float = 0.0) -> bool:
    """True when the framer interval contains x: x_minus <= x <= x_plus in
    the cone order and all three points are nonnegative (within tol)."""
    xa = x.as_array() if isinstance(x, PopulationState) else np.asarray(x, dtype=np.float64)
    if xa.shape != (4,):
        raise ValidationError(f"state must be a 4-vector, got shape {xa.shape}")
    if min(xa.min(), obs.x_minus.min(), obs.x_plus.min()) < -tol:
        return False
    return order_leq(obs.x_minus, xa, tol) and order_leq(xa, obs.x_plus, tol)
