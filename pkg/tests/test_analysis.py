import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sitfeedback.analysis import (
    LyapunovSpec,
    envelope_constant,
    fit_exponential_rate,
    lyapunov_spec,
    lyapunov_value,
    predicted_rates,
    scan_equilibria,
    stability_report,
    verify_bound_chain,
    verify_dominance,
    verify_lyapunov_decay,
    wild_mating_fraction,
)
from sitfeedback.control import EM, EMMs, Zero
from sitfeedback.integrator import IntegratorConfig, Trajectory, integrate
from sitfeedback.model import ModelParams, ParameterError, derived_quantities, gain_threshold, persistence_state

P = ModelParams()
R = P.R
FIG1 = EMMs(psi=2 * R)
FIG2 = EM(alpha=4 * R * P.delta_hat, sigma=2 * R)

# rational oracle for H(2R) and the derived rate terms
Rq = Fraction(245, 4)
Hq = Rq / (1 + 2 * Rq)


def synthetic(times, states):
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    return Trajectory(times, states, np.zeros(len(times)))


def test_lyapunov_weights():
    spec = lyapunov_spec(P, 2 * R)
    assert spec.H_value == pytest.approx(float(Hq), rel=1e-14)
    assert spec.coeff_E == pytest.approx(float((1 + Hq) / (1 - Hq)), rel=1e-13)
    assert spec.coeff_E == pytest.approx(2.967871, abs=1e-6)
    assert spec.coeff_F == pytest.approx(float(2 * 8 / (Fraction(4, 100) * (1 - Hq))), rel=1e-13)
    v = lyapunov_value(spec, (1.0, 1.0, 1.0))
    assert v == pytest.approx(float((1 + Hq) / (1 - Hq) + 1 + 16 / (Fraction(4, 100) * (1 - Hq))), rel=1e-13)
    assert v == pytest.approx(797.54, abs=0.01)


def test_lyapunov_weights_limit_H_zero():
    spec = LyapunovSpec.from_H(P, 0.0)
    assert (spec.coeff_E, spec.coeff_M, spec.coeff_F) == (1.0, 1.0, 2 * P.beta_E / P.delta_F)


def test_lyapunov_needs_H_below_one():
    with pytest.raises(ParameterError):
        lyapunov_spec(P, gain_threshold(P) / 2)


@given(z=st.tuples(*(st.floats(0, 1e6) for _ in range(3))), psi=st.floats(60.3, 1e4))
def test_lyapunov_sandwich(z, psi):
    spec = lyapunov_spec(P, psi)
    n1 = sum(z)
    v = lyapunov_value(spec, z)
    assert spec.Q1 * n1 * (1 - 1e-12) <= v <= spec.Q2 * n1 * (1 + 1e-12)


def test_predicted_rates_fig1():
    rates = predicted_rates(P, 2 * R, "emms")
    lead = [
        Fraction(49, 100) * Fraction(5, 100) * (1 - Hq) / (1 + Hq),
        Fraction(1, 10),
        8 * Fraction(4, 100) * (1 - Hq) / 2,
    ]
    for got, want in zip(rates.terms[:3], lead):
        assert got == pytest.approx(float(want), rel=1e-13)
    assert rates.c_a == pytest.approx(float(min(lead)), rel=1e-13)
    assert rates.c_a == pytest.approx(0.0082551, abs=1e-7)
    assert rates.c_bound == rates.c_a
    assert predicted_rates(P, 2 * R, "em") == rates


def test_predicted_rates_large_gain_limit():
    rates = predicted_rates(P, 1e15)
    assert rates.c_a == pytest.approx(P.nu * P.nu_E, rel=1e-10)


@given(p1=st.floats(60.3, 1e5), dp=st.floats(1.0, 1e5))
def test_rates_monotone_and_ordered(p1, dp):
    a = predicted_rates(P, p1)
    b = predicted_rates(P, p1 + dp)
    assert b.c_a >= a.c_a
    assert a.c_bound <= a.c_a


def test_rates_need_gain_above_threshold():
    with pytest.raises(ParameterError):
        predicted_rates(P, gain_threshold(P))
    with pytest.raises(ParameterError):
        predicted_rates(P, 100.0, "zero")


def test_lyapunov_decay_checks():
    spec = lyapunov_spec(P, 2 * R)
    zero = synthetic([0, 1, 2], np.zeros((3, 5)))
    res = verify_lyapunov_decay(zero, spec, 0.01, 0.0)
    assert res.status == "pass" and res.worst_margin == 0.0
    flat = synthetic([0, 1, 2], np.ones((3, 5)))
    res = verify_lyapunov_decay(flat, spec, 0.01, 0.0)
    assert res.status == "fail" and res.first_violation == 1.0
    assert verify_lyapunov_decay(flat, spec, 0.01, 1.5).status == "inconclusive"


def test_dominance_checks():
    t = [0, 1, 2]
    X = np.zeros((3, 5))
    X[:, 2] = 1.0
    X[:, 4] = [0.0, 2.0, 3.0]
    traj = synthetic(t, X)
    assert verify_dominance(traj, 2.0, 0.0).first_violation == 0.0
    assert verify_dominance(traj, 2.0, 0.5).status == "pass"
    assert verify_dominance(traj, 2.0, 5.0).status == "inconclusive"


def test_dominance_without_initial_males():
    # M0 = 0 and the emms law: Ms >= psi M holds from t = 0
    x0 = (P.K / 2, 0.0, 0.0, 0.0, 0.0)
    traj = integrate(P, FIG1, x0, IntegratorConfig(t_max=300.0, record_stride=0.5))
    assert verify_dominance(traj, FIG1.psi, 0.0).status == "pass"


def test_dominance_bounds_mating_fraction(fig1_run):
    _, traj = fig1_run
    mask = traj.times >= 6125.0
    w = wild_mating_fraction(P, traj.states[mask])
    assert np.all(w <= 1.0 / (1.0 + P.gamma * FIG1.psi) + 1e-9)


def test_fig2_dominance_holds_from_guaranteed_time(fig2_run):
    _, traj = fig2_run
    assert verify_dominance(traj, FIG2.sigma, math.log(2) / P.delta_hat).status == "pass"


def test_fit_recovers_synthetic_rate():
    t = np.linspace(0, 100, 201)
    X = np.outer(np.exp(-0.05 * t), [3.0, 4.0, 0, 0, 0])
    fit = fit_exponential_rate(synthetic(t, X), (10, 100), c_r=0.045)
    assert fit.rate == pytest.approx(0.05, abs=1e-6)
    assert fit.envelope_ok and fit.envelope_C == pytest.approx(1.0)


def test_fit_rejects_zero_state_and_short_window():
    t = [0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        fit_exponential_rate(synthetic(t, np.zeros((3, 5))), (0, 2))
    with pytest.raises(ValueError):
        fit_exponential_rate(synthetic(t, np.ones((3, 5))), (0.5, 0.9))


def test_uncontrolled_run_fails_envelope():
    traj = integrate(P, Zero(), persistence_state(P), IntegratorConfig(t_max=12000.0, record_stride=10.0))
    assert envelope_constant(traj, 0.01) > 1e6
    fit = fit_exponential_rate(traj, c_r=0.01)
    assert fit.envelope_ok is False
    assert abs(fit.rate) < 1e-6


def test_bound_chain_from_twice_capacity():
    x0 = (2 * P.K, 0.0, 0.0, 0.0, 0.0)
    traj = integrate(P, Zero(), x0, IntegratorConfig(t_max=100.0, record_stride=0.1))
    res = verify_bound_chain(traj, P)
    assert {"E_before_K_crossing", "F_before_K_crossing", "M_before_K_crossing",
            "Fs_before_K_crossing"} <= set(res.checks)
    assert res.ok


def test_bound_chain_fig1(fig1_run):
    _, traj = fig1_run
    rates = predicted_rates(P, FIG1.psi)
    res = verify_bound_chain(traj, P, FIG1.psi, "emms", rates.c_a)
    assert res.checks["Fs_envelope"].status == "pass"
    assert res.checks["Ms_envelope"].status == "pass"
    assert not res.resonant


def test_bound_chain_resonant_branch():
    # delta_M below the other rate terms makes c_a = delta_M exactly
    p = P.with_(delta_M=0.001)
    psi = 2 * p.R
    rates = predicted_rates(p, psi)
    assert rates.c_a == p.delta_M
    traj = integrate(p, EMMs(psi=psi), (1000.0, 500.0, 200.0, 0.0, 0.0),
                     IntegratorConfig(t_max=500.0, record_stride=1.0))
    res = verify_bound_chain(traj, p, psi, "emms", rates.c_a)
    assert res.resonant
    assert res.checks["Ms_envelope"].status == "pass"


def test_scan_uncontrolled_finds_both_equilibria():
    found = [c for c in scan_equilibria(P, Zero()) if c.refined]
    states = sorted(c.state for c in found)
    assert len(states) == 2
    assert np.allclose(states[0], 0.0)
    star = persistence_state(P).as_array()
    np.testing.assert_allclose(states[1], star, rtol=1e-9)


@pytest.mark.parametrize("factor", [1 + 1e-6, 2.0, 4.0])
def test_scan_above_threshold_only_origin(factor):
    found = [c for c in scan_equilibria(P, EMMs(psi=factor * gain_threshold(P))) if c.refined]
    assert len(found) == 1
    assert np.allclose(found[0].state, 0.0)


def test_scan_below_uniqueness_threshold_matches_analytic_point():
    psi = 0.5 * gain_threshold(P)
    f = 1.0 / (1.0 + P.gamma * (psi + P.delta_hat / P.delta_M))
    E = P.K * (1.0 - 1.0 / (P.R * f))
    found = [c for c in scan_equilibria(P, EMMs(psi=psi)) if c.refined and c.state[0] > 1.0]
    assert len(found) == 1
    assert found[0].state[0] == pytest.approx(E, rel=1e-9)


def test_report_fig1(fig1_run):
    cfg, traj = fig1_run
    rep = stability_report(traj, cfg.params, cfg.law)
    d = rep.to_dict()
    assert d["dominance_ok"] and d["lyapunov_decay_ok"]
    assert rep.dominance_time == pytest.approx(6125.0)
    assert d["c_a"] == pytest.approx(0.0082551, abs=1e-7)
    assert rep.extinction_time == pytest.approx(771.28, abs=0.05)
    assert "Lyapunov decay" in rep.summary()


def test_report_zero_law():
    traj = integrate(P, Zero(), persistence_state(P), IntegratorConfig(t_max=200.0))
    d = stability_report(traj, P, Zero()).to_dict()
    assert d["gain"] is None and d["stabilizing_predicted"] is None
    assert d["dominance"]["status"] == "not_applicable"
