import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjdecay.errors import CertificationError, DomainError, InvariantError, UnsupportedRegimeError
from hjdecay.hamiltonian import (
    AuditPlan,
    GrowthEnvelope,
    NullH,
    PCertificate,
    PowerPlusShifted,
    PowerSum,
    PurePower,
    certify,
    derived_envelopes,
    eval_h,
    eval_phi_eta,
    eval_theta_eta,
    power_constants,
    regime_exponent,
    running_max_h,
    shifted_audit,
    spec_from_dict,
    spec_to_dict,
    speed,
    speed_bound,
)

exponents = st.one_of(st.floats(0.1, 0.95), st.floats(1.05, 6.0))


# --- closed forms -----------------------------------------------------------


def test_eval_h_examples():
    assert eval_h(PurePower(2.0), 3.0) == 9.0
    assert eval_h(PowerSum(((1, 0.5), (2, 0.75))), 1.0) == 3.0
    assert eval_h(PurePower(2.0), 0.0) == 0.0
    assert eval_h(NullH(), 5.0) == 0.0


def test_eval_h_rejects_negative_r():
    with pytest.raises(DomainError):
        eval_h(PurePower(2.0), -1.0)


def test_phi_examples():
    assert eval_phi_eta(PurePower(2.0), 0.1, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert eval_phi_eta(PurePower(0.5), 0.01, 1.0) == pytest.approx(0.900025, abs=1e-6)
    assert eval_phi_eta(NullH(), 0.1, 1.0) == 0.0


@pytest.mark.parametrize("spec", [PurePower(0.5), PurePower(3.0), PowerSum(((1, 2), (2, 3))),
                                  PowerPlusShifted(2.0, 3.0, 1.0)])
def test_phi_vanishes_at_zero(spec):
    for eta in (1e-1, 1e-3):
        assert eval_phi_eta(spec, eta, 0.0) == 0.0


def test_phi_rejects_bad_eta():
    with pytest.raises(DomainError):
        eval_phi_eta(PurePower(2.0), 0.0, 1.0)
    with pytest.raises(DomainError):
        eval_theta_eta(PurePower(2.0), -1.0, 1.0)


def test_theta_examples():
    assert eval_theta_eta(PurePower(2.0), 0.1, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert eval_theta_eta(PurePower(4.0), 0.1, 1.0) == pytest.approx(3.0200, abs=1e-4)
    r = np.array([0.5, 2.0, 7.0])
    assert np.allclose(eval_theta_eta(PurePower(4.0), 1e-8, r), 3 * r**2, rtol=1e-10)


@pytest.mark.parametrize("spec", [PurePower(0.5), PurePower(1.5), PurePower(2.0), PurePower(3.0),
                                  PowerSum(((1, 1.5), (0.5, 3))), PowerSum(((1, 0.3), (2, 0.7))),
                                  PowerPlusShifted(2.0, 3.0, 1.0, 2.0)])
def test_theta_matches_centered_difference(spec):
    # Theta(s) = 2 s Phi'(s) - Phi(s); compare with a centred difference of Phi
    eta, h = 0.1, 1e-5
    s = np.geomspace(0.01, 100, 60)
    if isinstance(spec, PowerPlusShifted):
        s = s[np.abs(np.sqrt(s) - spec.r0) > 1e-2]
    dphi = (eval_phi_eta(spec, eta, s + h * s) - eval_phi_eta(spec, eta, s - h * s)) / (2 * h * s)
    fd = 2 * s * dphi - eval_phi_eta(spec, eta, s)
    th = eval_theta_eta(spec, eta, s)
    assert np.max(np.abs(fd - th) / np.maximum(np.abs(th), 1e-3)) <= 1e-6


@pytest.mark.parametrize("spec", [PurePower(0.5), PurePower(2.0), PowerSum(((1, 2), (1, 3)))])
def test_regularization_converges(spec):
    r = np.linspace(0, 5, 101)
    errs = [np.max(np.abs(eval_phi_eta(spec, eta, r**2) - eval_h(spec, r))) for eta in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    # the gap is of order eta^min(p, 1) near r = 0
    assert errs[-1] <= 2 * 1e-4 ** min(regime_exponent(spec), 1.0)


@given(p=exponents, r=st.floats(0, 50), eta=st.floats(1e-4, 1))
def test_phi_is_nonnegative_and_increasing(p, r, eta):
    spec = PurePower(p)
    a = eval_phi_eta(spec, eta, r)
    b = eval_phi_eta(spec, eta, r + 0.5)
    assert a >= 0
    assert b >= a


# --- invariants of the Hamiltonian types--------------------------------------


def test_invalid_specs():
    with pytest.raises(InvariantError):
        PurePower(1.0)
    with pytest.raises(InvariantError):
        PurePower(-2.0)
    with pytest.raises(InvariantError):
        PowerSum(((1, 0.5), (1, 2.0)))
    with pytest.raises(InvariantError):
        PowerSum(((0, 2.0),))
    with pytest.raises(InvariantError):
        PowerPlusShifted(2.0, 1.5, 1.0)
    with pytest.raises(InvariantError):
        PowerPlusShifted(0.5, 2.0, 1.0)


def test_regime_exponent():
    assert regime_exponent(PowerSum(((1, 2), (1, 3)))) == 2
    assert regime_exponent(PowerSum(((1, 0.3), (1, 0.7)))) == 0.7
    assert regime_exponent(NullH()) is None


@pytest.mark.parametrize("spec", [PurePower(2.5), PowerSum(((1, 2), (3, 4))), PowerPlusShifted(2, 3, 1, 0.5), NullH()])
def test_spec_dict_round_trip(spec):
    assert spec_from_dict(json.loads(json.dumps(spec_to_dict(spec)))) == spec


def test_shifted_term_keeps_theta_nonnegative():
    spec = PowerPlusShifted(2.0, 3.0, 1.0, 5.0)
    assert shifted_audit(spec)


# --- certificates ------------------------------------------------------------


@pytest.mark.parametrize("p,expected", [
    (2.0, (1.0, 1.0, 2.0)),
    (3.0, (1.0, 2.0, 2.5)),
    (0.5, (0.5, 1.0, 0.5)),
    (1.5, (0.5, 0.5, 1.5)),
])
def test_certificate_constants(p, expected):
    c = certify(PurePower(p))
    assert (c.a, c.b, c.gamma) == pytest.approx(expected, abs=1e-15)
    assert c.direction == ("lower" if p > 1 else "upper")
    assert c.audited


def test_certificate_records_both_readings_of_b():
    c = certify(PurePower(4.0))
    assert c.b == pytest.approx(2 * 2.0 ** 1.0)
    assert c.b_summary == pytest.approx(2 * 2.0 ** 0.5)
    assert c.to_dict()["b_summary"] == pytest.approx(c.b_summary)


def test_certificate_json_round_trip():
    c = certify(PurePower(3.0))
    d = json.loads(c.to_json())
    assert {"p", "a", "b", "gamma", "direction", "audited"} <= set(d)
    assert PCertificate.from_dict(d) == c


def test_certificate_direction_invariant():
    with pytest.raises(InvariantError):
        PCertificate(p=2.0, a=1, b=1, gamma=2, direction="upper", audited=True)


def test_certify_null_is_unsupported():
    with pytest.raises(UnsupportedRegimeError):
        certify(NullH())


def test_power_constants_excludes_p_one():
    with pytest.raises(UnsupportedRegimeError):
        power_constants(1.0)


def test_power_sum_certificates():
    c = certify(PowerSum(((1, 2), (1, 3))))
    assert (c.p, c.a, c.b, c.gamma) == (2.0, 1.0, 1.0, 2.0)
    c = certify(PowerSum(((1, 0.5), (2, 0.75))))
    assert c.p == 0.75 and c.direction == "upper"


def test_certificate_error_carries_offending_sample(monkeypatch):
    import hjdecay.hamiltonian as hm

    monkeypatch.setattr(hm, "_certificate_constants", lambda spec: (2.0, 10.0, 1.0, 2.0, None))
    with pytest.raises(CertificationError) as info:
        certify(PurePower(2.0))
    assert info.value.r is not None and info.value.eta is not None and info.value.theta is not None


@settings(max_examples=40, deadline=None)
@given(p=exponents)
def test_certificate_holds_on_audit_grid(p):
    spec = PurePower(p)
    c = certify(spec, AuditPlan(n_r=50))
    r = np.geomspace(1e-4, 1e4, 97)
    for eta in (1e-1, 1e-3):
        th = eval_theta_eta(spec, eta, r)
        lhs = c.a * r ** (p / 2) - c.b * eta**c.gamma
        scale = np.abs(th) + c.a * r ** (p / 2) + c.b * eta**c.gamma
        if p > 1:
            assert np.all(th - lhs >= -1e-10 * scale)
        else:
            assert np.all(-c.a * r ** (p / 2) + c.b * eta**c.gamma - th >= -1e-10 * scale)


@settings(max_examples=30, deadline=None)
@given(mus=st.lists(st.floats(0.1, 5), min_size=1, max_size=3),
       ps=st.lists(st.floats(1.1, 4), min_size=3, max_size=3))
def test_power_sum_superlinear_certifies(mus, ps):
    certify(PowerSum(tuple(zip(mus, ps))), AuditPlan(n_r=40))


# --- envelopes ---------------------------------------------------------------


def test_envelope_examples():
    env, audit = derived_envelopes(PurePower(2.0), certify(PurePower(2.0)))
    assert (env.g_H, env.kappa0, env.kappa_inf) == (1.0, 2.0, 2.0)
    assert audit.ok and audit.subadditive_ok is None
    spec = PowerSum(((1, 2), (1, 3)))
    env, audit = derived_envelopes(spec, certify(spec))
    assert (env.g_H, env.kappa0, env.kappa_inf) == (2.0, 3.0, 2.0)
    assert audit.ok


def test_sublinear_power_is_subadditive():
    env, audit = derived_envelopes(PurePower(0.5), certify(PurePower(0.5)))
    assert audit.subadditive_ok is True
    assert eval_h(PurePower(0.5), 2.0) <= 2 * eval_h(PurePower(0.5), 1.0)


def test_envelope_preconditions():
    with pytest.raises(DomainError):
        derived_envelopes(PurePower(2.0), certify(PurePower(2.0)), r_max=0.0)
    with pytest.raises(InvariantError):
        GrowthEnvelope(1.0, 1.0, 2.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_integrated_lower_bound(p):
    c = certify(PurePower(p))
    r = np.geomspace(1e-3, 1e3, 200)
    assert np.all(c.a / (p - 1) * r ** (p - 1) <= eval_h(PurePower(p), r) / r * (1 + 1e-12))


def test_running_max_of_monotone_h():
    assert running_max_h(PurePower(2.0), 3.0) == pytest.approx(9.0)


# --- speeds ------------------------------------------------------------------


@given(p=exponents, rmax=st.floats(0.01, 20))
def test_speed_bound_dominates_samples(p, rmax):
    spec = PurePower(p)
    eta = 1e-2
    r = np.linspace(0, rmax, 400)
    assert np.max(speed(spec, eta, r)) <= speed_bound(spec, eta, rmax) * (1 + 1e-9)


def test_speed_bound_pure_power_two():
    assert speed_bound(PurePower(2.0), 0.0, 3.0) == pytest.approx(6.0)
    assert math.isclose(speed_bound(NullH(), 0.1, 3.0), 0.0)
