import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sitfeedback.control import (
    EM,
    Constant,
    EMMs,
    QuadratureError,
    Zero,
    adaptive_simpson,
    closed_form_Ms_EMMs,
    evaluate_control,
    evaluate_control_batch,
    law_diagnostics,
    law_from_dict,
)
from sitfeedback.model import ModelParams, ParameterError, SitState, gain_threshold, persistence_state

P = ModelParams()
R = P.R
densities = st.floats(0.0, 1e5, allow_nan=False)
states = st.tuples(densities, densities, densities, densities, densities)


def test_emms_at_persistence_equilibrium():
    # rational oracle; the stated approximation 154038 has an arithmetic slip
    Rq = Fraction(245, 4)
    E = 50000 * (1 - 1 / Rq)
    M = Fraction(51, 100) * Fraction(5, 100) / Fraction(1, 10) * E
    u = 2 * Rq * Fraction(51, 100) * Fraction(5, 100) * E + Fraction(2, 100) * M
    got = evaluate_control(EMMs(psi=2 * R), P, persistence_state(P))
    assert got == pytest.approx(float(u), rel=1e-12)
    assert got == pytest.approx(153888.34, rel=1e-7)


def test_em_on_unit_male_state():
    law = EM(alpha=4 * R * P.delta_hat, sigma=2 * R)
    assert evaluate_control(law, P, (0, 0, 1, 0, 0)) == pytest.approx(4.9)


def test_zero_and_constant():
    x = (10.0, 1.0, 2.0, 3.0, 4.0)
    assert evaluate_control(Zero(), P, x) == 0.0
    assert evaluate_control(Constant(7.5), P, x) == 7.5


@given(x=states, y=states, a=st.floats(0, 10), b=st.floats(0, 10))
def test_emms_and_em_are_linear(x, y, a, b):
    xa, ya = np.array(x), np.array(y)
    for law in (EMMs(psi=3.0), EM(alpha=1.0, sigma=70.0)):
        lhs = evaluate_control(law, P, a * xa + b * ya)
        rhs = a * evaluate_control(law, P, xa) + b * evaluate_control(law, P, ya)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


@given(x=states)
def test_batch_matches_scalar(x):
    X = np.array([x, x])
    for law in (Zero(), Constant(2.0), EMMs(psi=122.5), EM(alpha=4.9, sigma=122.5)):
        assert np.allclose(evaluate_control_batch(law, P, X), evaluate_control(law, P, x), rtol=1e-15)


@pytest.mark.parametrize("data", [
    {"law": "emms"}, {"law": "emms", "psi": -1.0}, {"law": "em", "alpha": 0.0, "sigma": 1.0},
    {"law": "em", "alpha": 1.0, "sigma": float("nan")}, {"law": "bang"}, {"law": "zero", "psi": 1.0},
    {"law": "constant", "rate": -2.0},
])
def test_invalid_laws(data):
    with pytest.raises(ParameterError):
        law_from_dict(data)


@pytest.mark.parametrize("law", [Zero(), Constant(3.0), EMMs(psi=12.0), EM(alpha=2.0, sigma=5.0)])
def test_law_dict_round_trip(law):
    assert law_from_dict(law.to_dict()) == law


def test_negative_state_rejected():
    with pytest.raises(ParameterError):
        evaluate_control(EMMs(psi=1.0), P, (-1.0, 0, 0, 0, 0))


def test_emms_diagnostics():
    d = law_diagnostics(EMMs(psi=2 * R), P)
    assert d.dominance_time == pytest.approx(6125.0)
    assert d.stabilizing
    assert d.threshold == pytest.approx(60.25)
    assert d.uniqueness_threshold == pytest.approx(60.05)
    assert not law_diagnostics(EMMs(psi=gain_threshold(P)), P).stabilizing


def test_em_diagnostics():
    law = EM(alpha=4 * R * P.delta_hat, sigma=2 * R)
    d = law_diagnostics(law, P)
    assert d.stabilizing
    assert d.alpha_floor == pytest.approx(2 * R * 0.02)
    assert d.dominance_time == pytest.approx(math.log(2) / 4.9, rel=1e-12)
    assert d.dominance_time == pytest.approx(0.14146, abs=1e-5)
    assert d.guaranteed_dominance_time == pytest.approx(math.log(2) / 0.02, rel=1e-12)


def test_em_alpha_at_floor_is_not_stabilizing():
    law = EM(alpha=2 * R * P.delta_hat, sigma=2 * R)
    d = law_diagnostics(law, P)
    assert not d.stabilizing
    assert d.dominance_time is None


def test_diagnostics_need_linear_law():
    with pytest.raises(ParameterError):
        law_diagnostics(Zero(), P)


def test_adaptive_simpson():
    assert adaptive_simpson(lambda x: x ** 3 - 2 * x, 0.0, 2.0) == pytest.approx(0.0, abs=1e-13)
    assert adaptive_simpson(math.exp, 0.0, 3.0, 1e-12) == pytest.approx(math.expm1(3.0), abs=1e-11)
    assert adaptive_simpson(math.sin, 1.0, 1.0) == 0.0
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda x: math.sqrt(abs(x - 0.3)), 0.0, 1.0, abs_tol=1e-300, max_depth=10)


def test_closed_form_initial_sterile_stock():
    # E = 0 and M0 = 0: the sterile stock decays at the wild-male rate
    x0 = SitState(Ms=500.0)
    for t in (0.0, 1.0, 10.0):
        v = closed_form_Ms_EMMs(P, 122.5, x0, lambda s: 0.0, t)
        assert v == pytest.approx(500.0 * math.exp(-P.delta_M * t), rel=1e-14)


def test_closed_form_initial_males():
    x0 = SitState(M=100.0)
    t = 7.0
    v = closed_form_Ms_EMMs(P, 122.5, x0, lambda s: 0.0, t)
    assert v == pytest.approx(P.delta_hat * 100.0 * t * math.exp(-P.delta_M * t), rel=1e-14)


def test_closed_form_constant_eggs():
    # E = c: closed-form antiderivatives of both integrals
    c, psi, t, dM = 250.0, 80.0, 12.0, P.delta_M
    b = (1 - P.nu) * P.nu_E
    conv = c * (1 - math.exp(-dM * t)) / dM
    ramp = c * (1 - math.exp(-dM * t) * (1 + dM * t)) / dM ** 2
    expected = P.delta_hat * b * ramp + psi * b * conv
    v = closed_form_Ms_EMMs(P, psi, SitState(E=c), lambda s: c, t)
    assert v == pytest.approx(expected, rel=1e-10)


def test_closed_form_rejects_negative_time():
    with pytest.raises(ValueError):
        closed_form_Ms_EMMs(P, 1.0, SitState(), lambda s: 0.0, -1.0)
