import pytest

from sitfeedback.config import preset
from sitfeedback.integrator import integrate

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def fig1_run():
    cfg = preset("fig1")
    traj = integrate(cfg.params, cfg.law, cfg.initial_state(), cfg.integrator)
    return cfg, traj


@pytest.fixture(scope="session")
def fig2_run():
    cfg = preset("fig2")
    traj = integrate(cfg.params, cfg.law, cfg.initial_state(), cfg.integrator)
    return cfg, traj


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
