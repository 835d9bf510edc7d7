"""Numerical kernels: vector fields and Runge-Kutta drivers.

Everything here is nopython-compatible and compiled with numba when the
backend is enabled (see :mod:`wolbasim._accel`).  The same source runs as
plain Python on numpy scalars otherwise, so both backends produce the same
arithmetic.

Vector fields are selected by an integer code and parameterized by a flat
float64 "pack" built by the ``pack_*`` helpers.  This keeps the drivers
monomorphic, which lets numba cache the compiled code across processes.

Field codes
-----------
* ``FIELD_PLANT`` (dim 4): larvae/adult dynamics of the uninfected and
  infected populations under constant input (u_L, u_A).
* ``FIELD_AUX`` (dim 2): single-population larvae/adult system with an
  extra constant larval competition term delta.
* ``FIELD_PRESSURE`` (dim 2): uninfected population under full competitive
  pressure from an established infected population.
* ``FIELD_CLOSED_LOOP`` (dim 12): plant + lower/upper framer copies with
  output injection and the release law evaluated from the framer states.

State layout for the closed loop: ``z[0:4]`` plant, ``z[4:8]`` the
minus-side framer, ``z[8:12]`` the plus-side framer, each ordered
(L_U, A_U, L_W, A_W).  The minus side carries the upper bounds of the
uninfected components and the lower bounds of the infected ones; the plus
side is the mirror image.
"""

from __future__ import annotations

import numpy as np

from ._accel import NUMBA_ENABLED, jit

FIELD_PLANT = 0
FIELD_AUX = 1
FIELD_PRESSURE = 2
FIELD_CLOSED_LOOP = 3

LAW_NONE = 0
LAW_ADULT = 1
LAW_LARVAE = 2

FIELD_DIMS = {FIELD_PLANT: 4, FIELD_AUX: 2, FIELD_PRESSURE: 2, FIELD_CLOSED_LOOP: 12}

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_REJECT_LIMIT = 3
STATUS_NEGATIVE_STATE = 4

_MAX_CONSECUTIVE_REJECTS = 60
_H_FLOOR_FACTOR = 1e-13

# Dormand-Prince 5(4) tableau; the 5th-order solution propagates and the
# first-same-as-last stage seeds the next step.
_A21 = 1.0 / 5.0
_A31 = 3.0 / 40.0
_A32 = 9.0 / 40.0
_A41 = 44.0 / 45.0
_A42 = -56.0 / 15.0
_A43 = 32.0 / 9.0
_A51 = 19372.0 / 6561.0
_A52 = -25360.0 / 2187.0
_A53 = 64448.0 / 6561.0
_A54 = -212.0 / 729.0
_A61 = 9017.0 / 3168.0
_A62 = -355.0 / 33.0
_A63 = 46732.0 / 5247.0
_A64 = 49.0 / 176.0
_A65 = -5103.0 / 18656.0
_B1 = 35.0 / 384.0
_B3 = 500.0 / 1113.0
_B4 = 125.0 / 192.0
_B5 = -2187.0 / 6784.0
_B6 = 11.0 / 84.0
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0
_C2 = 1.0 / 5.0
_C3 = 3.0 / 10.0
_C4 = 4.0 / 5.0
_C5 = 8.0 / 9.0


@jit
def _plant4(gamma_U, gamma_W, R0_U, R0_W, lU, aU, lW, aW, u_L, u_A):
    """Population derivative at one point; negative inputs clamp to 0."""
    if lU < 0.0:
        lU = 0.0
    if aU < 0.0:
        aU = 0.0
    if lW < 0.0:
        lW = 0.0
    if aW < 0.0:
        aW = 0.0
    denom = aU + aW
    if denom > 0.0:
        frac = aU / denom
    else:
        frac = 0.0  # no adults at all: no uninfected births
    comp = 1.0 + lU + lW
    d0 = gamma_U * R0_U * frac * aU - comp * lU
    d1 = lU - gamma_U * aU
    d2 = gamma_W * R0_W * aW - comp * lW + u_L
    d3 = lW - gamma_W * aW + u_A
    return d0, d1, d2, d3


@jit
def control_eval(law_code, gamma_U, gamma_W, k, k_U, t_activate, positive_lower, t, xm, xp):
    """Release rates (u_L, u_A) from the framer states at time t.

    xm is the minus-side framer (L_U^+, A_U^+, L_W^-, A_W^-), xp the
    plus side (L_U^-, A_U^-, L_W^+, A_W^+).  Inactive before t_activate.
    """
    if law_code == 0 or t < t_activate:
        return 0.0, 0.0
    if law_code == 2:
        lUp = xm[0] if xm[0] > 0.0 else 0.0
        lWp = xp[2] if xp[2] > 0.0 else 0.0
        return lUp * lWp, 0.0
    # adult release: linear bound on the worst-case uninfected pressure
    dkU = k - gamma_U
    pos_kU = dkU if dkU > 0.0 else 0.0
    neg_kU = -dkU if dkU < 0.0 else 0.0
    dWk = gamma_W - k
    pos_Wk = dWk if dWk > 0.0 else 0.0
    neg_Wk = -dWk if dWk < 0.0 else 0.0
    sgn = 1.0 if positive_lower else -1.0
    raw = (
        k_U * xm[0]
        + k_U * pos_kU * xm[1]
        + sgn * k_U * neg_kU * xp[1]
        - xm[2]
        + pos_Wk * xp[3]
        + sgn * neg_Wk * xm[3]
    )
    if raw < 0.0:
        raw = 0.0
    return 0.0, raw


@jit
def field_eval(code, t, y, pack, out):
    """Evaluate the selected vector field in place (see module docstring)."""
    if code == 0:
        d0, d1, d2, d3 = _plant4(
            pack[0], pack[1], pack[2], pack[3], y[0], y[1], y[2], y[3], pack[4], pack[5]
        )
        out[0] = d0
        out[1] = d1
        out[2] = d2
        out[3] = d3
    elif code == 1:
        g = pack[0]
        R = pack[1]
        delta = pack[2]
        L = y[0] if y[0] > 0.0 else 0.0
        A = y[1] if y[1] > 0.0 else 0.0
        out[0] = g * R * A - (1.0 + delta + L) * L
        out[1] = L - g * A
    elif code == 2:
        gamma_U = pack[0]
        R0_U = pack[1]
        aW_star = pack[2]
        lW_star = pack[3]
        L = y[0] if y[0] > 0.0 else 0.0
        A = y[1] if y[1] > 0.0 else 0.0
        out[0] = gamma_U * R0_U * A * A / (A + aW_star) - (1.0 + lW_star + L) * L
        out[1] = L - gamma_U * A
    else:
        gamma_U = pack[0]
        gamma_W = pack[1]
        R0_U = pack[2]
        R0_W = pack[3]
        law_code = int(pack[4])
        k = pack[5]
        k_U = pack[6]
        t_activate = pack[7]
        positive_lower = pack[8] > 0.5
        eps = pack[9]
        normalized = pack[10] > 0.5
        lo = pack[11]
        hi = pack[12]
        p = int(pack[13])
        off_C = 14
        off_Mm = off_C + 4 * p
        off_Mp = off_Mm + 4 * p

        u_L, u_A = control_eval(
            law_code, gamma_U, gamma_W, k, k_U, t_activate, positive_lower, t, y[4:8], y[8:12]
        )
        d0, d1, d2, d3 = _plant4(
            gamma_U, gamma_W, R0_U, R0_W, y[0], y[1], y[2], y[3], u_L, u_A
        )
        out[0] = d0
        out[1] = d1
        out[2] = d2
        out[3] = d3
        d0, d1, d2, d3 = _plant4(
            gamma_U, gamma_W, R0_U, R0_W, y[4], y[5], y[6], y[7], u_L, u_A
        )
        out[4] = d0
        out[5] = d1
        out[6] = d2
        out[7] = d3
        d0, d1, d2, d3 = _plant4(
            gamma_U, gamma_W, R0_U, R0_W, y[8], y[9], y[10], y[11], u_L, u_A
        )
        out[8] = d0
        out[9] = d1
        out[10] = d2
        out[11] = d3
        # output injection: row i of the gain is the constant row scaled by
        # its own framer component, saturated at eps and floored at 0
        for i in range(4):
            sm = y[4 + i]
            if sm < 0.0:
                sm = 0.0
            elif sm > eps:
                sm = eps
            sp = y[8 + i]
            if sp < 0.0:
                sp = 0.0
            elif sp > eps:
                sp = eps
            if normalized:
                sm /= eps
                sp /= eps
            acc_m = 0.0
            acc_p = 0.0
            for m in range(p):
                ym = 0.0
                cxm = 0.0
                cxp = 0.0
                for j in range(4):
                    c = pack[off_C + m * 4 + j]
                    ym += c * y[j]
                    cxm += c * y[4 + j]
                    cxp += c * y[8 + j]
                ya = lo * ym
                yb = hi * ym
                if ya <= yb:
                    y_lo = ya
                    y_hi = yb
                else:
                    y_lo = yb
                    y_hi = ya
                acc_m += pack[off_Mm + i * p + m] * (y_lo - cxm)
                acc_p += pack[off_Mp + i * p + m] * (y_hi - cxp)
            out[4 + i] += sm * acc_m
            out[8 + i] += sp * acc_p


@jit
def rk45_solve(code, y0, t_grid, rel_tol, abs_tol, h_init, h_max, pack):
    """Adaptive Dormand-Prince 5(4) integration over a fixed sample grid.

    Steps never cross a sample instant, so the returned states sit exactly
    on t_grid.  Accepted states with components in [-abs_tol, 0) are
    clipped to 0 and counted; anything more negative aborts.

    Returns (states (n,d), status, t_fail, n_accepted, n_rejected,
    n_field_evals, n_clips).
    """
    n = t_grid.shape[0]
    d = y0.shape[0]
    out = np.empty((n, d))
    y = np.empty(d)
    for i in range(d):
        y[i] = y0[i]
        out[0, i] = y0[i]
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    k5 = np.empty(d)
    k6 = np.empty(d)
    k7 = np.empty(d)
    ytmp = np.empty(d)
    ynew = np.empty(d)

    status = STATUS_OK
    t_fail = np.nan
    naccept = 0
    nreject = 0
    nclip = 0
    consec_rej = 0

    field_eval(code, t_grid[0], y, pack, k1)
    nfev = 1
    for i in range(d):
        if not np.isfinite(k1[i]):
            status = STATUS_NONFINITE
            t_fail = t_grid[0]

    h = h_init if h_init < h_max else h_max
    for jseg in range(1, n):
        t = t_grid[jseg - 1]
        t_end = t_grid[jseg]
        while status == STATUS_OK and t < t_end:
            remaining = t_end - t
            capped = h >= remaining
            h_step = remaining if capped else h
            if h < _H_FLOOR_FACTOR * (abs(t) if abs(t) > 1.0 else 1.0) and not capped:
                status = STATUS_STEP_UNDERFLOW
                t_fail = t
                break
            for i in range(d):
                ytmp[i] = y[i] + h_step * _A21 * k1[i]
            field_eval(code, t + _C2 * h_step, ytmp, pack, k2)
            for i in range(d):
                ytmp[i] = y[i] + h_step * (_A31 * k1[i] + _A32 * k2[i])
            field_eval(code, t + _C3 * h_step, ytmp, pack, k3)
            for i in range(d):
                ytmp[i] = y[i] + h_step * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            field_eval(code, t + _C4 * h_step, ytmp, pack, k4)
            for i in range(d):
                ytmp[i] = y[i] + h_step * (
                    _A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i]
                )
            field_eval(code, t + _C5 * h_step, ytmp, pack, k5)
            for i in range(d):
                ytmp[i] = y[i] + h_step * (
                    _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
                )
            field_eval(code, t + h_step, ytmp, pack, k6)
            for i in range(d):
                ynew[i] = y[i] + h_step * (
                    _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
                )
            field_eval(code, t + h_step, ynew, pack, k7)
            nfev += 6

            err_sq = 0.0
            finite = True
            for i in range(d):
                e = h_step * (
                    _E1 * k1[i]
                    + _E3 * k3[i]
                    + _E4 * k4[i]
                    + _E5 * k5[i]
                    + _E6 * k6[i]
                    + _E7 * k7[i]
                )
                ay = abs(y[i])
                an = abs(ynew[i])
                scale = abs_tol + rel_tol * (ay if ay > an else an)
                q = e / scale
                err_sq += q * q
                if not np.isfinite(ynew[i]) or not np.isfinite(e):
                    finite = False
            err_norm = np.sqrt(err_sq / d)

            if not finite or not np.isfinite(err_norm):
                nreject += 1
                consec_rej += 1
                if consec_rej > _MAX_CONSECUTIVE_REJECTS:
                    status = STATUS_NONFINITE
                    t_fail = t
                    break
                h = 0.5 * h_step
                continue

            if err_norm <= 1.0:
                naccept += 1
                consec_rej = 0
                t_new = t_end if capped else t + h_step
                clipped = False
                for i in range(d):
                    if ynew[i] < 0.0:
                        if ynew[i] >= -abs_tol:
                            ynew[i] = 0.0
                            nclip += 1
                            clipped = True
                        else:
                            status = STATUS_NEGATIVE_STATE
                            t_fail = t_new
                if status != STATUS_OK:
                    break
                if clipped:
                    field_eval(code, t_new, ynew, pack, k1)
                    nfev += 1
                else:
                    for i in range(d):
                        k1[i] = k7[i]
                for i in range(d):
                    y[i] = ynew[i]
                t = t_new
                if err_norm > 0.0:
                    fac = 0.9 * err_norm ** (-0.2)
                else:
                    fac = 5.0
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
                if capped:
                    # a grid-truncated step may only shrink the working step:
                    # growth estimates from short steps are unreliable, but a
                    # near-reject error must still pull h out of the unstable
                    # hover that capped stepping can otherwise sustain
                    if fac < 1.0:
                        h = h_step * fac
                else:
                    h_next = h_step * fac
                    h = h_next if h_next < h_max else h_max
            else:
                nreject += 1
                consec_rej += 1
                if consec_rej > _MAX_CONSECUTIVE_REJECTS:
                    status = STATUS_REJECT_LIMIT
                    t_fail = t
                    break
                fac = 0.9 * err_norm ** (-0.2)
                if fac < 0.2:
                    fac = 0.2
                h = h_step * fac
        if status != STATUS_OK:
            for r in range(jseg, n):
                for i in range(d):
                    out[r, i] = np.nan
            break
        for i in range(d):
            out[jseg, i] = y[i]
    return out, status, t_fail, naccept, nreject, nfev, nclip


@jit
def rk4_solve(code, y0, t_grid, h_target, clip_tol, pack):
    """Classic fixed-step RK4 over a sample grid.

    Each grid segment is split into equal substeps no longer than h_target.
    Clipping policy matches rk45_solve with clip_tol as the threshold.

    Returns (states (n,d), status, t_fail, n_steps, n_field_evals, n_clips).
    """
    n = t_grid.shape[0]
    d = y0.shape[0]
    out = np.empty((n, d))
    y = np.empty(d)
    for i in range(d):
        y[i] = y0[i]
        out[0, i] = y0[i]
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    ytmp = np.empty(d)

    status = STATUS_OK
    t_fail = np.nan
    nsteps = 0
    nfev = 0
    nclip = 0

    for jseg in range(1, n):
        t0 = t_grid[jseg - 1]
        seg = t_grid[jseg] - t0
        nsub = int(np.ceil(seg / h_target - 1e-12))
        if nsub < 1:
            nsub = 1
        h = seg / nsub
        for s in range(nsub):
            t = t0 + s * h
            field_eval(code, t, y, pack, k1)
            for i in range(d):
                ytmp[i] = y[i] + 0.5 * h * k1[i]
            field_eval(code, t + 0.5 * h, ytmp, pack, k2)
            for i in range(d):
                ytmp[i] = y[i] + 0.5 * h * k2[i]
            field_eval(code, t + 0.5 * h, ytmp, pack, k3)
            for i in range(d):
                ytmp[i] = y[i] + h * k3[i]
            field_eval(code, t + h, ytmp, pack, k4)
            nfev += 4
            for i in range(d):
                y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            nsteps += 1
            for i in range(d):
                if not np.isfinite(y[i]):
                    status = STATUS_NONFINITE
                    t_fail = t + h
                elif y[i] < 0.0:
                    if y[i] >= -clip_tol:
                        y[i] = 0.0
                        nclip += 1
                    else:
                        status = STATUS_NEGATIVE_STATE
                        t_fail = t + h
            if status != STATUS_OK:
                break
        if status != STATUS_OK:
            for r in range(jseg, n):
                for i in range(d):
                    out[r, i] = np.nan
            break
        for i in range(d):
            out[jseg, i] = y[i]
    return out, status, t_fail, nsteps, nfev, nclip


# ─── pack builders (plain Python) ────────────────────────────────────────


def pack_plant(gamma_U, gamma_W, R0_U, R0_W, u_L=0.0, u_A=0.0):
    return np.array([gamma_U, gamma_W, R0_U, R0_W, u_L, u_A], dtype=np.float64)


def pack_aux(gamma, R, delta=0.0):
    return np.array([gamma, R, delta], dtype=np.float64)


def pack_pressure(gamma_U, R0_U, A_W_star, L_W_star):
    return np.array([gamma_U, R0_U, A_W_star, L_W_star], dtype=np.float64)


def pack_closed_loop(
    gamma_U,
    gamma_W,
    R0_U,
    R0_W,
    law_code,
    k,
    k_U,
    t_activate,
    positive_lower,
    epsilon,
    normalized,
    noise_lo,
    noise_hi,
    C,
    M_minus,
    M_plus,
):
    C = np.asarray(C, dtype=np.float64)
    M_minus = np.asarray(M_minus, dtype=np.float64)
    M_plus = np.asarray(M_plus, dtype=np.float64)
    p = C.shape[0]
    if C.shape != (p, 4) or M_minus.shape != (4, p) or M_plus.shape != (4, p):
        raise ValueError("C must be (p,4) and the gain matrices (4,p)")
    head = np.array(
        [
            gamma_U,
            gamma_W,
            R0_U,
            R0_W,
            float(law_code),
            k,
            k_U,
            t_activate,
            1.0 if positive_lower else 0.0,
            epsilon,
            1.0 if normalized else 0.0,
            noise_lo,
            noise_hi,
            float(p),
        ],
        dtype=np.float64,
    )
    return np.concatenate([head, C.ravel(), M_minus.ravel(), M_plus.ravel()])


def warmup():
    """Trigger JIT compilation of every kernel (no-op on the Python backend)."""
    if not NUMBA_ENABLED:
        return
    t_grid = np.array([0.0, 0.01])
    pk = pack_plant(0.5, 0.9, 10.0, 5.0, 0.0, 0.0)
    rk45_solve(FIELD_PLANT, np.ones(4), t_grid, 1e-6, 1e-8, 1e-3, 1.0, pk)
    rk4_solve(FIELD_PLANT, np.ones(4), t_grid, 1e-2, 1e-8, pk)
    pa = pack_aux(0.5, 2.0, 0.0)
    rk45_solve(FIELD_AUX, np.ones(2), t_grid, 1e-6, 1e-8, 1e-3, 1.0, pa)
    rk4_solve(FIELD_AUX, np.ones(2), t_grid, 1e-2, 1e-8, pa)
    pp = pack_pressure(0.5, 10.0, 3.0, 2.0)
    rk45_solve(FIELD_PRESSURE, np.ones(2), t_grid, 1e-6, 1e-8, 1e-3, 1.0, pp)
    rk4_solve(FIELD_PRESSURE, np.ones(2), t_grid, 1e-2, 1e-8, pp)
    C = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0]])
    M = 0.1 * np.array([[-1.0, -1.0], [-1.0, -1.0], [1.0, 1.0], [1.0, 1.0]])
    pc = pack_closed_loop(
        0.5, 0.9, 10.0, 5.0, LAW_ADULT, 0.9, 12.0, 0.0, False, 1e-5, False, 0.8, 1.2, C, M, M
    )
    rk45_solve(FIELD_CLOSED_LOOP, np.ones(12), t_grid, 1e-6, 1e-8, 1e-3, 1.0, pc)
    rk4_solve(FIELD_CLOSED_LOOP, np.ones(12), t_grid, 1e-2, 1e-8, pc)
