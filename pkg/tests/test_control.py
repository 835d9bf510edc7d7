"""Release laws: adult-introduction and larvae-introduction feedback rules.

The adult law reads the framer bounds; with contraction rate k equal to the
infected mortality gamma_W it collapses to
u_A = max(0, k_U*L_U_hi + k_U*(gamma_W - gamma_U)*A_U_hi - L_W_lo).
Expected values below are hand-evaluated from that expression.
"""

import numpy as np
import pytest

from wolbasim import (
    AdultLawParams,
    LawChoice,
    ModelParams,
    ObserverPair,
    ValidationError,
    adult_release,
    control_at,
    larvae_release,
    neg_part,
    pos_part,
)


def _pair(xm, xp):
    return ObserverPair(np.asarray(xm, float), np.asarray(xp, float))


# ─── adult law parameters ─────────────────────────────────────────────────


def test_adult_params_reject_nonpositive_rate():
    with pytest.raises(ValidationError):
        AdultLawParams(k=0.0, k_U=48.4)
    with pytest.raises(ValidationError):
        AdultLawParams(k=-1.0, k_U=48.4)
    with pytest.raises(ValidationError):
        AdultLawParams(k=float("nan"), k_U=48.4)


def test_adult_params_threshold_checked_against_model(p_ref):
    # the gain must exceed R0_U - 1 = 44; equality is rejected
    AdultLawParams(k=0.99207, k_U=44.0 + 1e-9).validate_against(p_ref)
    with pytest.raises(ValidationError):
        AdultLawParams(k=0.99207, k_U=44.0).validate_against(p_ref)
    with pytest.raises(ValidationError):
        AdultLawParams(k=0.99207, k_U=10.0).validate_against(p_ref)


def test_adult_params_for_model_defaults(p_ref):
    lp = AdultLawParams.for_model(p_ref)
    assert lp.k == p_ref.gamma_W
    assert lp.k_U == 1.1 * 44.0
    lp2 = AdultLawParams.for_model(p_ref, margin=1.5)
    assert lp2.k_U == 1.5 * 44.0


# ─── adult law values ─────────────────────────────────────────────────────


def test_adult_release_reference_value(p_ref):
    lp = AdultLawParams(k=0.99207, k_U=48.4)
    obs = _pair([44.0, 55.44, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
    u = adult_release(lp, p_ref, obs)
    expected = 48.4 * 44.0 + 48.4 * (0.99207 - 0.79365) * 55.44
    assert u.u_L == 0.0
    np.testing.assert_allclose(u.u_A, expected, rtol=1e-12)
    assert abs(u.u_A - 2662.1) < 0.1  # published rounded value


def test_adult_release_clamps_negative_demand(p_ref):
    # uninfected estimates at zero, infected larvae already present:
    # the raw expression is -L_W_lo < 0 and must clamp to zero
    lp = AdultLawParams(k=0.99207, k_U=48.4)
    obs = _pair([0.0, 0.0, 33.2, 33.47], [0.0, 0.0, 33.2, 33.47])
    u = adult_release(lp, p_ref, obs)
    assert u.u_A == 0.0 and u.u_L == 0.0


def test_adult_release_zero_observer_state(p_ref):
    lp = AdultLawParams(k=0.99207, k_U=48.4)
    u = adult_release(lp, p_ref, _pair(np.zeros(4), np.zeros(4)))
    assert u.u_A == 0.0 and u.u_L == 0.0


def test_adult_release_general_rate_hand_value(p_ref):
    # k below both mortality rates exercises every term of the rule
    k, k_U = 0.5, 50.0
    lp = AdultLawParams(k=k, k_U=k_U)
    xm = np.array([10.0, 20.0, 3.0, 4.0])   # upper uninfected, lower infected
    xp = np.array([5.0, 6.0, 7.0, 8.0])     # lower uninfected, upper infected
    obs = _pair(xm, xp)
    raw = (
        k_U * xm[0]
        + k_U * pos_part(k - p_ref.gamma_U) * xm[1]
        - k_U * neg_part(k - p_ref.gamma_U) * xp[1]
        - xm[2]
        + pos_part(p_ref.gamma_W - k) * xp[3]
        - neg_part(p_ref.gamma_W - k) * xm[3]
    )
    u = adult_release(lp, p_ref, obs)
    np.testing.assert_allclose(u.u_A, max(0.0, raw), rtol=1e-12)


def test_adult_release_sign_variants_agree_when_k_matches_mortality(p_ref, rng):
    # with k = gamma_W every term whose sign is disputed carries a zero
    # coefficient, so the two variants must agree exactly
    base = dict(k=p_ref.gamma_W, k_U=48.4)
    proof = AdultLawParams(**base)
    displayed = AdultLawParams(**base, positive_lower_terms=True)
    for _ in range(50):
        lo = rng.uniform(0.0, 100.0, size=4)
        hi = rng.uniform(0.0, 100.0, size=4)
        xm = np.array([max(lo[0], hi[0]), max(lo[1], hi[1]), min(lo[2], hi[2]), min(lo[3], hi[3])])
        xp = np.array([min(lo[0], hi[0]), min(lo[1], hi[1]), max(lo[2], hi[2]), max(lo[3], hi[3])])
        obs = _pair(xm, xp)
        assert adult_release(proof, p_ref, obs).u_A == adult_release(displayed, p_ref, obs).u_A


def test_adult_release_sign_variants_differ_for_small_k(p_ref):
    # k < gamma_U makes the lower-adult-estimate coefficient nonzero;
    # the displayed variant adds where the default subtracts
    k, k_U = 0.5, 50.0
    obs = _pair([10.0, 20.0, 0.0, 0.0], [5.0, 6.0, 7.0, 8.0])
    u_proof = adult_release(AdultLawParams(k=k, k_U=k_U), p_ref, obs)
    u_disp = adult_release(
        AdultLawParams(k=k, k_U=k_U, positive_lower_terms=True), p_ref, obs
    )
    gap = 2.0 * k_U * neg_part(k - p_ref.gamma_U) * 6.0  # A_U_lo = 6
    assert u_disp.u_A > u_proof.u_A
    np.testing.assert_allclose(u_disp.u_A - u_proof.u_A, gap, rtol=1e-12)


# ─── larvae law ───────────────────────────────────────────────────────────


def test_larvae_release_reference_value():
    obs = _pair([44.0, 55.44, 0.0, 0.0], [0.0, 0.0, 1.66, 1.6733])
    u = larvae_release(obs)
    np.testing.assert_allclose(u.u_L, 44.0 * 1.66, rtol=1e-12)
    assert u.u_A == 0.0


def test_larvae_release_zero_and_unit_products():
    assert larvae_release(_pair([0.0, 0, 0, 0], [0.0, 0, 1, 1])).u_L == 0.0
    assert larvae_release(_pair([1.0, 1, 0, 0], [1.0, 1, 1, 1])).u_L == 1.0


# ─── law choice and dispatch ──────────────────────────────────────────────


def test_law_choice_validation(p_ref):
    lp = AdultLawParams.for_model(p_ref)
    with pytest.raises(ValidationError):
        LawChoice("adult")  # adult law needs its parameters
    with pytest.raises(ValidationError):
        LawChoice("larvae", adult_params=lp)  # parameters forbidden elsewhere
    with pytest.raises(ValidationError):
        LawChoice("none", adult_params=lp)
    with pytest.raises(ValidationError):
        LawChoice("adult", adult_params=lp, activation_time=-1.0)
    with pytest.raises(ValidationError):
        LawChoice("spray")


def test_dispatch_none_is_always_zero(p_ref):
    obs = _pair([44.0, 55.44, 0, 0], [0.0, 0, 1.66, 1.6733])
    for t in (0.0, 1.0, 100.0):
        u = control_at(LawChoice("none"), p_ref, obs, t)
        assert u.u_L == 0.0 and u.u_A == 0.0


def test_dispatch_respects_activation_time(p_ref):
    lp = AdultLawParams.for_model(p_ref)
    choice = LawChoice("adult", adult_params=lp, activation_time=5.0)
    obs = _pair([44.0, 55.44, 0, 0], [0.0, 0, 0, 0])
    assert control_at(choice, p_ref, obs, 4.999).u_A == 0.0
    active = control_at(choice, p_ref, obs, 5.0)
    assert active.u_A == adult_release(lp, p_ref, obs).u_A > 0.0


def test_dispatch_larvae_matches_direct_call(p_ref):
    choice = LawChoice("larvae", activation_time=0.0)
    obs = _pair([44.0, 55.44, 0, 0], [0.0, 0, 1.66, 1.6733])
    assert control_at(choice, p_ref, obs, 7.0).u_L == larvae_release(obs).u_L


def test_dispatch_rejects_negative_time(p_ref):
    obs = _pair(np.zeros(4), np.zeros(4))
    with pytest.raises(ValidationError):
        control_at(LawChoice("none"), p_ref, obs, -0.1)


def test_control_outputs_always_nonnegative(p_ref, rng):
    laws = [
        LawChoice("none"),
        LawChoice("larvae"),
        LawChoice("adult", adult_params=AdultLawParams(k=0.3, k_U=50.0)),
        LawChoice("adult", adult_params=AdultLawParams(k=2.0, k_U=48.4)),
    ]
    for _ in range(100):
        lo = rng.uniform(0.0, 200.0, size=4)
        hi = rng.uniform(0.0, 200.0, size=4)
        xm = np.array([max(lo[0], hi[0]), max(lo[1], hi[1]), min(lo[2], hi[2]), min(lo[3], hi[3])])
        xp = np.array([min(lo[0], hi[0]), min(lo[1], hi[1]), max(lo[2], hi[2]), max(lo[3], hi[3])])
        obs = _pair(xm, xp)
        t = float(rng.uniform(0.0, 50.0))
        for law in laws:
            u = control_at(law, p_ref, obs, t)
            assert u.u_L >= 0.0 and u.u_A >= 0.0
