"""Simulation and stability checks for linear sterile-male release feedback.

The closed loop couples the five-compartment mosquito model in
:mod:`sitfeedback.model` with a release law from :mod:`sitfeedback.control`;
:mod:`sitfeedback.integrator` produces sampled trajectories and
:mod:`sitfeedback.analysis` checks dominance, Lyapunov decay, decay rates
and equilibrium uniqueness on them.
"""

from .analysis import (
    LyapunovSpec,
    StabilityReport,
    fit_exponential_rate,
    lyapunov_spec,
    lyapunov_value,
    predicted_rates,
    scan_equilibria,
    stability_report,
    verify_bound_chain,
    verify_dominance,
    verify_lyapunov_decay,
)
from .control import EM, EMMs, Constant, Zero, closed_form_Ms_EMMs, evaluate_control, law_diagnostics
from .integrator import IntegrationError, IntegratorConfig, Trajectory, convergence_order_check, integrate
from .kernels import BACKEND
from .model import (
    H,
    ModelParams,
    SitState,
    caption_params,
    controlled_vector_field,
    derived_quantities,
    in_B_K,
    persistence_state,
    uncontrolled_vector_field,
)

__version__ = "0.1.0"
