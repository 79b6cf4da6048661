import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitfeedback import kernels
from sitfeedback.control import EM, Constant, EMMs, Zero, evaluate_control, kernel_encoding
from sitfeedback.integrator import IntegrationError, IntegratorConfig, integrate
from sitfeedback.model import ModelParams, controlled_vector_field, persistence_state

P = ModelParams()
LAWS = [Zero(), Constant(40.0), EMMs(psi=122.5), EM(alpha=4.9, sigma=122.5)]
BACKENDS = sorted(kernels.BACKENDS)
densities = st.floats(0.0, 1e5, allow_nan=False)
states = st.tuples(densities, densities, densities, densities, densities)


def test_compiled_backend_is_built():
    assert "compiled" in kernels.BACKENDS
    assert kernels.BACKEND == ("python" if os.environ.get("SITFEEDBACK_PURE_PYTHON") else "compiled")


@pytest.mark.parametrize("name", BACKENDS)
@given(x=states)
def test_kernel_rhs_matches_model(name, x):
    kern = kernels.get_backend(name)
    y = np.array(x, dtype=float)
    for law in LAWS:
        code, args = kernel_encoding(law)
        expected = controlled_vector_field(P, x, evaluate_control(law, P, x))
        got = np.asarray(kern.rhs(y, P.as_array(), code, args[0], args[1]))
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-9)


@pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")
@pytest.mark.parametrize("method", ["rk45", "rk4"])
@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.kind)
def test_backends_agree(method, law):
    cfg = IntegratorConfig(method=method, dt_init=0.05, t_max=300.0)
    x0 = persistence_state(P)
    a = integrate(P, law, x0, cfg, backend="compiled")
    b = integrate(P, law, x0, cfg, backend="python")
    np.testing.assert_allclose(a.states, b.states, rtol=1e-10, atol=1e-9)
    assert [e.kind for e in a.events] == [e.kind for e in b.events]
    for ea, eb in zip(a.events, b.events):
        assert ea.time == pytest.approx(eb.time, abs=2e-6)


def test_pure_python_selected_by_environment():
    env = dict(os.environ, SITFEEDBACK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from sitfeedback import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
def test_negativity_abort(name):
    # a 10-day rk4 step on a female-only state overshoots E far below zero
    cfg = IntegratorConfig(method="rk4", dt_init=10.0, t_max=100.0, record_stride=10.0)
    with pytest.raises(IntegrationError) as info:
        integrate(P, Zero(), (0.0, 1e4, 0.0, 0.0, 0.0), cfg, backend=name)
    assert info.value.kind == "negativity"
    assert info.value.time == 10.0


@pytest.mark.parametrize("name", BACKENDS)
def test_step_underflow(name):
    cfg = IntegratorConfig(rel_tol=1e-300, abs_tol=1e-300, t_max=10.0)
    with pytest.raises(IntegrationError) as info:
        integrate(P, EMMs(psi=122.5), persistence_state(P), cfg, backend=name)
    assert info.value.kind == "step_underflow"


@pytest.mark.parametrize("name", BACKENDS)
def test_nonfinite_detected(name):
    p = ModelParams(beta_E=1e300, K=1e300)
    cfg = IntegratorConfig(t_max=10.0)
    with pytest.raises(IntegrationError) as info:
        integrate(p, Zero(), (1e300, 1e300, 1e300, 0.0, 0.0), cfg, backend=name)
    assert info.value.kind in ("model_evaluation", "step_underflow")
