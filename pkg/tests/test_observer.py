"""Interval observer: framer pairs, gain schedules, validity checks, enclosure.

The framer convention is crossed: x_minus holds the UPPER bounds of the
uninfected components and the LOWER bounds of the infected ones; x_plus the
reverse.  Every expected matrix below is written out by hand.
"""

import numpy as np
import pytest

from wolbasim import (
    GainSpec,
    ModelParams,
    ObserverPair,
    OutputMap,
    Scenario,
    LawChoice,
    ValidationError,
    default_gain_spec,
    default_output_map,
    default_scenarios,
    disease_free,
    encloses,
    gain_matrix,
    input_matrix,
    observer_field,
    run_scenario,
    validate_gains,
    vector_field,
)

_D = np.diag([-1.0, -1.0, 1.0, 1.0])


# ─── framer pair construction ────────────────────────────────────────────


def test_pair_slot_properties():
    obs = ObserverPair(
        x_minus=np.array([88.0, 110.0, 1.0, 2.0]),
        x_plus=np.array([3.0, 4.0, 10.0, 20.0]),
    )
    assert obs.L_U_hi == 88.0 and obs.A_U_hi == 110.0
    assert obs.L_W_lo == 1.0 and obs.A_W_lo == 2.0
    assert obs.L_U_lo == 3.0 and obs.A_U_lo == 4.0
    assert obs.L_W_hi == 10.0 and obs.A_W_hi == 20.0


def test_pair_rejects_negative_components():
    with pytest.raises(ValidationError):
        ObserverPair(np.array([-1.0, 0, 0, 0]), np.zeros(4))
    with pytest.raises(ValidationError):
        ObserverPair(np.zeros(4), np.array([0, 0, 0, -1.0]))


def test_pair_rejects_empty_interval():
    # lower uninfected bound above the upper one -> no state can be inside
    with pytest.raises(ValidationError):
        ObserverPair(np.array([1.0, 1, 5, 5]), np.array([2.0, 1, 5, 5]))
    with pytest.raises(ValidationError):
        ObserverPair(np.array([1.0, 1, 5, 5]), np.array([1.0, 1, 4, 5]))


def test_pair_equality_and_hash():
    a = ObserverPair(np.array([2.0, 2, 0, 0]), np.array([0.0, 0, 2, 2]))
    b = ObserverPair(np.array([2.0, 2, 0, 0]), np.array([0.0, 0, 2, 2]))
    c = ObserverPair(np.array([3.0, 2, 0, 0]), np.array([0.0, 0, 2, 2]))
    assert a == b and hash(a) == hash(b)
    assert a != c


# ─── defaults ─────────────────────────────────────────────────────────────


def test_default_output_map_measures_larvae():
    C = default_output_map()
    np.testing.assert_array_equal(C.C, [[1, 0, 0, 0], [0, 0, -1, 0]])
    assert C.p == 2


def test_default_gain_spec_values():
    g = default_gain_spec()
    expected = 0.1 * np.array([[-1, -1], [-1, -1], [1, 1], [1, 1]], dtype=float)
    np.testing.assert_array_equal(g.M_minus, expected)
    np.testing.assert_array_equal(g.M_plus, expected)
    assert g.epsilon == 1e-5
    assert g.p == 2


def test_gain_spec_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        GainSpec(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValidationError):
        GainSpec(np.zeros((4, 2)), np.zeros((4, 3)))
    with pytest.raises(ValidationError):
        GainSpec(np.zeros((4, 2)), np.zeros((4, 2)), epsilon=0.0)


# ─── gain scheduling ──────────────────────────────────────────────────────


def test_gain_matrix_is_zero_at_zero_state():
    g = default_gain_spec()
    np.testing.assert_array_equal(gain_matrix(g, "minus", np.zeros(4)), np.zeros((4, 2)))


def test_gain_matrix_saturates_at_epsilon():
    g = default_gain_spec()
    x = np.array([1.0, 2.0, 3.0, 4.0])  # all well above epsilon
    np.testing.assert_allclose(gain_matrix(g, "minus", x), g.epsilon * g.M_minus, rtol=1e-15)
    np.testing.assert_allclose(gain_matrix(g, "plus", x), g.epsilon * g.M_plus, rtol=1e-15)


def test_gain_matrix_scales_small_components_linearly():
    g = default_gain_spec()
    x = np.array([1.0, 1.0, g.epsilon / 2.0, 1.0])
    K = gain_matrix(g, "minus", x)
    np.testing.assert_allclose(K[2], (g.epsilon / 2.0) * g.M_minus[2], rtol=1e-15)
    for i in (0, 1, 3):
        np.testing.assert_allclose(K[i], g.epsilon * g.M_minus[i], rtol=1e-15)


def test_gain_matrix_normalized_variant():
    g = default_gain_spec()
    x = np.array([1.0, 1.0, g.epsilon / 2.0, 1.0])
    K = gain_matrix(g, "minus", x, normalized=True)
    np.testing.assert_allclose(K[0], g.M_minus[0], rtol=1e-15)
    np.testing.assert_allclose(K[2], 0.5 * g.M_minus[2], rtol=1e-15)


def test_gain_matrix_rejects_negative_state():
    with pytest.raises(ValidationError):
        gain_matrix(default_gain_spec(), "minus", np.array([-1.0, 0, 0, 0]))
    with pytest.raises(ValidationError):
        gain_matrix(default_gain_spec(), "sideways", np.zeros(4))


def test_gain_matrix_row_nullity(rng):
    g = default_gain_spec()
    for _ in range(20):
        x = rng.uniform(0.0, 1.0, size=4)
        x[rng.integers(0, 4)] = 0.0
        K = gain_matrix(g, "plus", x)
        for i in range(4):
            if x[i] == 0.0:
                np.testing.assert_array_equal(K[i], np.zeros(2))


# ─── sign-condition validation ────────────────────────────────────────────


def test_reference_gains_pass_all_conditions():
    report = validate_gains(default_gain_spec(), default_output_map())
    assert report.all_ok and report.required_ok
    names = {c.name for c in report.conditions}
    assert names == {
        "row-sign-minus",
        "row-sign-plus",
        "loop-sign-minus",
        "loop-sign-plus",
        "output-sign",
    }
    for c in report.conditions:
        assert c.passed and c.violations == ()


def test_sign_flip_in_gain_row_is_caught():
    M = 0.1 * np.array([[-1, -1], [-1, -1], [1, 1], [1, 1]], dtype=float)
    M_bad = M.copy()
    M_bad[0, 0] = +0.1
    report = validate_gains(GainSpec(M_bad, M.copy()), default_output_map())
    assert not report.required_ok

    row = report.condition("row-sign-minus")
    assert not row.passed
    assert (0, 0, -0.1) in [(i, j, round(v, 12)) for i, j, v in row.violations]

    # the same flipped entry also breaks the loop condition on that side
    assert not report.condition("loop-sign-minus").passed
    assert report.condition("row-sign-plus").passed
    assert report.condition("loop-sign-plus").passed
    assert report.condition("output-sign").passed


def test_output_map_sign_violation_is_caught():
    C_bad = OutputMap(np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]))
    report = validate_gains(default_gain_spec(), C_bad)
    out = report.condition("output-sign")
    assert not out.passed
    assert (1, 2, 1.0) in out.violations
    # C enters the loop condition, so both loop checks break as well
    assert not report.condition("loop-sign-minus").passed
    assert not report.condition("loop-sign-plus").passed
    assert report.condition("row-sign-minus").passed
    assert report.condition("row-sign-plus").passed
    assert not report.all_ok and not report.required_ok


def test_validate_gains_rejects_channel_mismatch():
    g = default_gain_spec()  # two channels
    C1 = OutputMap(np.array([[1.0, 0.0, 0.0, 0.0]]))  # one channel
    with pytest.raises(ValidationError):
        validate_gains(g, C1)


# ─── framer dynamics ──────────────────────────────────────────────────────


def test_framer_field_exact_knowledge_reduces_to_plant(p_ref):
    x = np.array([10.0, 20.0, 5.0, 8.0])
    obs = ObserverPair(x.copy(), x.copy())
    C = default_output_map()
    y = C.C @ x
    dxm, dxp = observer_field(p_ref, obs, (0.0, 0.0), y, y, default_gain_spec(), C)
    f = vector_field(p_ref, x)
    np.testing.assert_array_equal(dxm, f)
    np.testing.assert_array_equal(dxp, f)


def test_framer_field_zero_gains_are_open_loop_copies(p_ref):
    obs = ObserverPair(np.array([30.0, 40.0, 1.0, 2.0]), np.array([3.0, 4.0, 11.0, 12.0]))
    g0 = GainSpec(np.zeros((4, 2)), np.zeros((4, 2)))
    C = default_output_map()
    u = (2.0, 3.0)
    Bu = input_matrix() @ np.asarray(u)
    y_lo = np.array([-100.0, -100.0])
    y_hi = np.array([100.0, 100.0])
    dxm, dxp = observer_field(p_ref, obs, u, y_lo, y_hi, g0, C)
    np.testing.assert_allclose(dxm, vector_field(p_ref, obs.x_minus) + Bu, atol=1e-12)
    np.testing.assert_allclose(dxp, vector_field(p_ref, obs.x_plus) + Bu, atol=1e-12)


def _hand_framer_side(p, x, u, y, M, eps, C):
    """Term-by-term evaluation of one framer derivative."""
    L_U, A_U, L_W, A_W = x
    frac = A_U / (A_U + A_W) if A_U + A_W > 0 else 0.0
    f = np.array(
        [
            p.gamma_U * p.R0_U * frac * A_U - (1 + L_U + L_W) * L_U,
            L_U - p.gamma_U * A_U,
            p.gamma_W * p.R0_W * A_W - (1 + L_U + L_W) * L_W + u[0],
            L_W - p.gamma_W * A_W + u[1],
        ]
    )
    K = M * np.minimum(np.maximum(x, 0.0), eps)[:, None]
    return f + K @ (y - C @ x)


def test_framer_field_matches_hand_evaluation(p_ref):
    adult, _ = default_scenarios()
    obs = adult.obs0
    x0 = adult.x0.as_array()
    C = adult.C
    y = C.C @ x0
    y_lo = np.minimum(0.8 * y, 1.2 * y)
    y_hi = np.maximum(0.8 * y, 1.2 * y)
    dxm, dxp = observer_field(p_ref, obs, (0.0, 0.0), y_lo, y_hi, adult.gains, C)
    exp_m = _hand_framer_side(p_ref, obs.x_minus, (0, 0), y_lo, adult.gains.M_minus, adult.gains.epsilon, C.C)
    exp_p = _hand_framer_side(p_ref, obs.x_plus, (0, 0), y_hi, adult.gains.M_plus, adult.gains.epsilon, C.C)
    assert np.all(np.isfinite(dxm)) and np.all(np.isfinite(dxp))
    np.testing.assert_allclose(dxm, exp_m, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(dxp, exp_p, rtol=1e-12, atol=1e-12)


def test_framer_field_rejects_negative_components(p_ref):
    obs = ObserverPair(np.array([1.0, 1, 0, 0]), np.array([0.0, 0, 1, 1]))
    with pytest.raises(ValidationError):
        observer_field(p_ref, obs, (-1.0, 0.0), np.zeros(2), np.zeros(2),
                       default_gain_spec(), default_output_map())


# ─── enclosure test ───────────────────────────────────────────────────────


def test_encloses_degenerate_interval():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert encloses(ObserverPair(x.copy(), x.copy()), x)


def test_encloses_reference_initialization(p_ref):
    L_U, A_U = 44.0, 44.0 / 0.79365
    L_W, A_W = 33.2, 33.2 / 0.99207
    obs = ObserverPair(
        np.array([2 * L_U, 2 * A_U, 0.0, 0.0]),
        np.array([0.0, 0.0, 0.05 * L_W, 0.05 * A_W]),
    )
    assert encloses(obs, disease_free(p_ref).as_array())


def test_encloses_detects_violated_bound():
    obs = ObserverPair(np.array([10.0, 10, 0, 0]), np.array([0.0, 0, 10, 10]))
    assert encloses(obs, np.array([5.0, 5, 5, 5]))
    assert not encloses(obs, np.array([11.0, 5, 5, 5]))  # above the upper estimate
    assert not encloses(obs, np.array([5.0, 5, 11.0, 5]))  # above the infected cap
    # slack recovers a bound violated within tolerance
    assert encloses(obs, np.array([10.0 + 1e-9, 5, 5, 5]), tol=1e-8)


# ─── exactness propagation through a full run ─────────────────────────────


def test_exact_initialization_stays_exact(p_ref):
    x0 = disease_free(p_ref)
    obs0 = ObserverPair(x0.as_array(), x0.as_array())
    s = Scenario(
        params=p_ref,
        law=LawChoice("none"),
        x0=x0,
        obs0=obs0,
        noise_lo=1.0,
        noise_hi=1.0,
        t_end=20.0,
        name="exactness",
    )
    traj, _ = run_scenario(s)
    assert np.abs(traj.obs_minus - traj.states).max() <= 1e-9
    assert np.abs(traj.obs_plus - traj.states).max() <= 1e-9
