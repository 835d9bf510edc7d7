"""Population model: parameters, state, vector field, equilibria, cone order.

Tracks larvae (L) and adults (A) of two mosquito subpopulations, uninfected
(U) and Wolbachia-infected (W), in normalized units.  Larval recruitment
saturates through the shared competition factor (1 + L_U + L_W), and
cytoplasmic incompatibility suppresses uninfected births by the adult
fraction A_U/(A_U + A_W).  Releases add infected larvae (u_L) or infected
adults (u_A) at constant rate between samples.

The flow is monotone for the cone order implemented by :func:`order_leq`
(uninfected components compare reversed, infected components directly).
Two scalar-pair comparison systems used by the convergence arguments are
exposed as test oracles: :func:`auxiliary_field` and
:func:`infestation_pressure_field`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConvergenceError, ValidationError

__all__ = [
    "ModelParams",
    "PopulationState",
    "ControlInput",
    "Equilibrium",
    "EquilibriumSet",
    "pos_part",
    "neg_part",
    "order_leq",
    "vector_field",
    "input_matrix",
    "disease_free",
    "complete_infestation",
    "equilibria",
    "auxiliary_field",
    "infestation_pressure_field",
]


@dataclass(frozen=True)
class ModelParams:
    """Normalized model constants.

    gamma_U/gamma_W are adult mortality rates per normalized time; R0_U/R0_W
    are basic offspring numbers.  The parameter regime of interest is
    0 < gamma_U < gamma_W and R0_U > R0_W > 1: the infection shortens adult
    life and lowers fertility, yet both isolated populations are viable.
    """

    gamma_U: float
    gamma_W: float
    R0_U: float
    R0_W: float

    def __post_init__(self):
        for name in ("gamma_U", "gamma_W", "R0_U", "R0_W"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v!r}")
        if not 0.0 < self.gamma_U < self.gamma_W:
            raise ValidationError(
                "mortality rates must satisfy 0 < gamma_U < gamma_W, got "
                f"gamma_U={self.gamma_U}, gamma_W={self.gamma_W}"
            )
        if not self.R0_U > self.R0_W > 1.0:
            raise ValidationError(
                "offspring numbers must satisfy R0_U > R0_W > 1, got "
                f"R0_U={self.R0_U}, R0_W={self.R0_W}"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.gamma_U, self.gamma_W, self.R0_U, self.R0_W)


@dataclass(frozen=True)
class PopulationState:
    """One point of the 4-dimensional state (L_U, A_U, L_W, A_W), all >= 0."""

    L_U: float
    A_U: float
    L_W: float
    A_W: float

    def __post_init__(self):
        for name in ("L_U", "A_U", "L_W", "A_W"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValidationError(f"state component {name} must be >= 0, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.L_U, self.A_U, self.L_W, self.A_W], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "PopulationState":
        a = np.asarray(arr, dtype=np.float64)
        if a.shape != (4,):
            raise ValidationError(f"state array must have shape (4,), got {a.shape}")
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class ControlInput:
    """Release rates (u_L, u_A), both nonnegative by construction."""

    u_L: float = 0.0
    u_A: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.u_L) and self.u_L >= 0.0):
            raise ValidationError(f"u_L must be >= 0, got {self.u_L!r}")
        if not (np.isfinite(self.u_A) and self.u_A >= 0.0):
            raise ValidationError(f"u_A must be >= 0, got {self.u_A!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.u_L, self.u_A], dtype=np.float64)


def pos_part(z: float) -> float:
    """max(z, 0)."""
    return z if z > 0.0 else 0.0


def neg_part(z: float) -> float:
    """-min(z, 0), so that z = pos_part(z) - neg_part(z)."""
    return -z if z < 0.0 else 0.0


def _as_state_array(x) -> np.ndarray:
    if isinstance(x, PopulationState):
        return x.as_array()
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (4,):
        raise ValidationError(f"expected a 4-component state, got shape {a.shape}")
    return a


def order_leq(x, x2, tol: float = 0.0) -> bool:
    """Cone order test: x "below" x2.

    Convention: x <= x2 holds when the UNINFECTED components of x are larger
    (L_U, A_U of x >= those of x2) and the INFECTED components are smaller
    (L_W, A_W of x <= those of x2).  The model's zero-input flow preserves
    this order.  tol relaxes every comparison by a slack for use on
    numerically integrated states.
    """
    a = _as_state_array(x)
    b = _as_state_array(x2)
    return bool(
        a[0] >= b[0] - tol
        and a[1] >= b[1] - tol
        and a[2] <= b[2] + tol
        and a[3] <= b[3] + tol
    )


def input_matrix() -> np.ndarray:
    """The 4x2 matrix B routing (u_L, u_A) into the L_W and A_W equations."""
    B = np.zeros((4, 2))
    B[2, 0] = 1.0
    B[3, 1] = 1.0
    return B


def vector_field(p: ModelParams, x, u=None) -> np.ndarray:
    """State derivative (dL_U, dA_U, dL_W, dA_W) at state x under input u.

    The uninfected birth fraction A_U/(A_U + A_W) is defined as 0 when both
    adult counts are 0, which makes extinction a genuine equilibrium.

    Args:
        p: model constants.
        x: PopulationState or 4-array, componentwise >= 0.
        u: ControlInput or 2-array, componentwise >= 0; defaults to no input.

    Raises:
        ValidationError: on negative components of x or u.
    """
    a = _as_state_array(x)
    if np.any(a < 0.0):
        raise ValidationError(f"vector_field requires a nonnegative state, got {a}")
    if u is None:
        ua = np.zeros(2)
    elif isinstance(u, ControlInput):
        ua = u.as_array()
    else:
        ua = np.asarray(u, dtype=np.float64)
        if ua.shape != (2,):
            raise ValidationError(f"input must have shape (2,), got {ua.shape}")
    if np.any(ua < 0.0):
        raise ValidationError(f"vector_field requires a nonnegative input, got {ua}")
    d = kernels._plant4(
        p.gamma_U, p.gamma_W, p.R0_U, p.R0_W, a[0], a[1], a[2], a[3], ua[0], ua[1]
    )
    return np.array(d, dtype=np.float64)


def disease_free(p: ModelParams) -> PopulationState:
    """Closed-form equilibrium with only the uninfected population present."""
    L = p.R0_U - 1.0
    return PopulationState(L, L / p.gamma_U, 0.0, 0.0)


def complete_infestation(p: ModelParams) -> PopulationState:
    """Closed-form equilibrium with only the infected population present."""
    L = p.R0_W - 1.0
    return PopulationState(0.0, 0.0, L, L / p.gamma_W)


@dataclass(frozen=True)
class Equilibrium:
    """An equilibrium point with its linearization-based stability tag."""

    state: PopulationState
    stable: bool
    eigenvalues: tuple


@dataclass(frozen=True)
class EquilibriumSet:
    extinction: Equilibrium
    disease_free: Equilibrium
    complete_infestation: Equilibrium
    coexistence: Equilibrium

    def items(self):
        return (
            ("extinction", self.extinction),
            ("disease_free", self.disease_free),
            ("complete_infestation", self.complete_infestation),
            ("coexistence", self.coexistence),
        )


def _field_raw(p: ModelParams, x: np.ndarray) -> np.ndarray:
    # clamped evaluation, no domain checks: Newton iterates and FD probes may
    # step slightly outside the orthant
    d = kernels._plant4(
        p.gamma_U, p.gamma_W, p.R0_U, p.R0_W, x[0], x[1], x[2], x[3], 0.0, 0.0
    )
    return np.array(d, dtype=np.float64)


def _fd_jacobian(p: ModelParams, x: np.ndarray, h_rel: float = 1e-6) -> np.ndarray:
    """Finite-difference Jacobian of the zero-input field at x.

    Central differences in the interior; one-sided at components close to
    the boundary of the orthant, where the clamped field would silently
    halve a central estimate.
    """
    n = x.size
    J = np.empty((n, n))
    f0 = None
    for j in range(n):
        h = h_rel * max(1.0, abs(x[j]))
        if x[j] >= h:
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (_field_raw(p, xp) - _field_raw(p, xm)) / (2.0 * h)
        else:
            if f0 is None:
                f0 = _field_raw(p, x)
            xp = x.copy()
            xp[j] += h
            J[:, j] = (_field_raw(p, xp) - f0) / h
    return J


def _newton_root(p, x0, tol, known_roots, scale, max_iter=100):
    """Damped Newton on the zero-input field, kept inside the orthant.

    The line search only accepts orthant-feasible iterates with a
    sufficient residual decrease.  Iterates entering a small neighbourhood
    of a known root abort early ("misconverged") so the caller can restart
    from a better seed.  Returns (x, None) on success, (x, reason) on
    failure.
    """
    x = np.maximum(x0.astype(np.float64), 0.0)
    f = _field_raw(p, x)
    res = float(np.abs(f).max())
    for _ in range(max_iter):
        if res <= tol:
            return x, None
        for r in known_roots:
            if np.abs(x - r).max() <= 1e-3 * scale:
                return x, "misconverged onto a boundary equilibrium"
        J = _fd_jacobian(p, x)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return x, f"singular Jacobian at residual {res:.3e}"
        lam = 1.0
        while lam > 1e-12:
            x_try = x + lam * step
            if np.all(x_try >= 0.0) and (x_try[1] + x_try[3]) > 0.0:
                f_try = _field_raw(p, x_try)
                r_try = float(np.abs(f_try).max())
                if r_try <= (1.0 - 1e-4 * lam) * res or r_try <= tol:
                    x, f, res = x_try, f_try, r_try
                    break
            lam *= 0.5
        else:
            return x, f"stalled at residual {res:.3e}"
    if res <= tol:
        return x, None
    return x, f"no convergence in {max_iter} iterations (residual {res:.3e})"


def _interior_seed(p: ModelParams) -> np.ndarray:
    """Seed from the interior balance relations.

    A strictly positive equilibrium must have larval totals summing to
    R0_W - 1 and an uninfected adult fraction of R0_W / R0_U; solving those
    two linear relations together with the adult balances gives a point at
    (or numerically near) the coexistence root.
    """
    phi = p.R0_W / p.R0_U
    A_W = (p.R0_W - 1.0) / (p.gamma_W + p.gamma_U * phi / (1.0 - phi))
    A_U = phi * A_W / (1.0 - phi)
    return np.array([p.gamma_U * A_U, A_U, p.gamma_W * A_W, A_W])


def equilibria(p: ModelParams, tol: float = 1e-12) -> EquilibriumSet:
    """All four equilibria of the zero-input model with stability tags.

    Extinction, disease-free and complete-infestation come from closed
    forms.  The coexistence point is found numerically by damped Newton
    iteration on the zero-input field, started at the componentwise
    midpoint of the two single-population equilibria; when that run drifts
    into the basin of a boundary equilibrium (which the midpoint often
    does), it aborts early and restarts from a seed built from the interior
    balance relations.  The returned root has residual max-norm <= tol and
    is strictly positive.  Stability is tagged from the eigenvalue real
    parts of a finite-difference Jacobian (relative step 1e-6).

    Raises:
        ConvergenceError: if no strictly positive root distinct from the
            boundary equilibria is found (never silently returns a guess).
    """
    ext = np.zeros(4)
    df = disease_free(p).as_array()
    ci = complete_infestation(p).as_array()
    known = (ext, df, ci)
    scale = max(df.max(), ci.max())

    def acceptable(x):
        return bool(
            np.all(x > 0.0)
            and all(np.abs(x - r).max() > 1e-8 * scale for r in known)
        )

    co, fail = _newton_root(p, 0.5 * (df + ci), tol, known, scale)
    if fail is not None or not acceptable(co):
        co, fail = _newton_root(p, _interior_seed(p), tol, known, scale)
        if fail is not None:
            raise ConvergenceError(f"coexistence root-finding failed: {fail}")
        if not acceptable(co):
            raise ConvergenceError(
                "coexistence iteration converged onto a boundary equilibrium"
            )

    def tag(x: np.ndarray) -> Equilibrium:
        eig = np.linalg.eigvals(_fd_jacobian(p, x))
        return Equilibrium(
            state=PopulationState.from_array(np.maximum(x, 0.0)),
            stable=bool(np.max(eig.real) < 0.0),
            eigenvalues=tuple(eig),
        )

    return EquilibriumSet(
        extinction=tag(ext),
        disease_free=tag(df),
        complete_infestation=tag(ci),
        coexistence=tag(co),
    )


def auxiliary_field(gamma: float, R: float, delta: float, LA) -> np.ndarray:
    """Comparison system (dL, dA) = (gamma*R*A - (1+delta+L)*L, L - gamma*A).

    With delta = 0 this is the single-population model whose trajectories
    bound the infected subsystem; delta > 0 adds a constant extra
    competition term.  Used as a numerical test oracle.
    """
    if not (gamma > 0.0 and R > 0.0 and delta >= 0.0):
        raise ValidationError(
            f"need gamma > 0, R > 0, delta >= 0; got {gamma}, {R}, {delta}"
        )
    a = np.asarray(LA, dtype=np.float64)
    if a.shape != (2,) or np.any(a < 0.0):
        raise ValidationError(f"LA must be a nonnegative 2-vector, got {LA!r}")
    out = np.empty(2)
    kernels.field_eval(kernels.FIELD_AUX, 0.0, a, kernels.pack_aux(gamma, R, delta), out)
    return out


def infestation_pressure_field(p: ModelParams, A_W_star: float, L_W_star: float, LA) -> np.ndarray:
    """Uninfected dynamics under full competitive pressure from level (L_W*, A_W*).

    Returns (gamma_U*R0_U*A^2/(A + A_W*) - (1 + L_W* + L)*L, L - gamma_U*A).
    Every trajectory converges to (0,0); used as a numerical test oracle.
    """
    if not (A_W_star > 0.0 and L_W_star > 0.0):
        raise ValidationError(
            f"carrying levels must be positive, got {A_W_star}, {L_W_star}"
        )
    a = np.asarray(LA, dtype=np.float64)
    if a.shape != (2,) or np.any(a < 0.0):
        raise ValidationError(f"LA must be a nonnegative 2-vector, got {LA!r}")
    out = np.empty(2)
    kernels.field_eval(
        kernels.FIELD_PRESSURE,
        0.0,
        a,
        kernels.pack_pressure(p.gamma_U, p.R0_U, A_W_star, L_W_star),
        out,
    )
    return out
