"""Numerical checks of the stabilization claims along sampled trajectories.

Inequalities are checked sample-wise with a relative slack ``eps`` matched
to the integrator tolerance. The Lyapunov sandwich uses the 1-norm
``E + F + M`` (where the coefficient min/max bound is exact); rate fitting
and the envelope check use the Euclidean norm of the full 5-vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .control import EM, EMMs, Constant, ControlLaw, evaluate_control_batch, law_diagnostics
from .integrator import Trajectory
from .model import H, ModelParams, ParameterError, gain_threshold, vector_field_batch

EPS_TOL = 1e-6
C_CAP = 1e6
RESONANCE_TOL = 1e-12


@dataclass(frozen=True)
class LyapunovSpec:
    coeff_E: float
    coeff_M: float
    coeff_F: float
    H_value: float

    @classmethod
    def from_H(cls, params: ModelParams, H_value: float) -> "LyapunovSpec":
        if not 0.0 <= H_value < 1.0:
            raise ParameterError(f"Lyapunov weights need 0 <= H < 1, got {H_value!r}")
        return cls(
            coeff_E=(1.0 + H_value) / (1.0 - H_value),
            coeff_M=1.0,
            coeff_F=2.0 * params.beta_E / (params.delta_F * (1.0 - H_value)),
            H_value=H_value,
        )

    @property
    def Q1(self) -> float:
        return min(self.coeff_E, self.coeff_M, self.coeff_F)

    @property
    def Q2(self) -> float:
        return max(self.coeff_E, self.coeff_M, self.coeff_F)


def lyapunov_spec(params: ModelParams, gain: float) -> LyapunovSpec:
    """Weights built from ``H(gain)``; the gain must exceed ``(R - 1) / gamma``."""
    return LyapunovSpec.from_H(params, H(params, gain))


def lyapunov_value(spec: LyapunovSpec, z) -> float | np.ndarray:
    """``V(E, F, M)``; accepts a 3-vector or an array whose last axis is ``(E, F, M)``."""
    z = np.asarray(z, dtype=float)
    v = spec.coeff_E * z[..., 0] + spec.coeff_M * z[..., 2] + spec.coeff_F * z[..., 1]
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True)
class RatePrediction:
    c_a: float
    c_bound: float
    terms: tuple[float, ...]


def predicted_rates(params: ModelParams, gain: float, law_kind: str = "emms") -> RatePrediction:
    """Lyapunov decay rate ``c_a`` and the overall guaranteed rate.

    For both law families the overall bound is the same seven-term minimum,
    with ``H`` evaluated at ``psi`` (emms) or ``sigma`` (em).
    """
    if law_kind not in ("emms", "em"):
        raise ParameterError(f"law_kind must be 'emms' or 'em', got {law_kind!r}")
    if not gain > gain_threshold(params):
        raise ParameterError(
            f"gain {gain!r} must exceed (R - 1)/gamma = {gain_threshold(params)!r}; H >= 1 otherwise"
        )
    p = params
    h = H(p, gain)
    lead = (
        p.nu * p.nu_E * (1.0 - h) / (1.0 + h),
        p.delta_M,
        p.beta_E * p.delta_F * (1.0 - h) / 2.0,
    )
    terms = lead + (p.delta_F, p.delta_s, p.nu_E + p.delta_E, p.delta_F)
    return RatePrediction(c_a=min(lead), c_bound=min(terms), terms=terms)


@dataclass(frozen=True)
class CheckResult:
    status: str  # "pass" | "fail" | "inconclusive" | "not_applicable"
    worst_margin: float | None = None
    first_violation: float | None = None
    checked_samples: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "worst_margin": _finite_or_none(self.worst_margin),
            "first_violation": self.first_violation,
            "checked_samples": self.checked_samples,
        }


def verify_lyapunov_decay(traj: Trajectory, spec: LyapunovSpec, c_a: float, T0: float,
                          eps: float = EPS_TOL) -> CheckResult:
    """Discrete decay ``V(t_{i+1}) <= V(t_i) exp(-c_a dt) (1 + eps)`` for samples after ``T0``.

    The margin of a pair is ``V(t_{i+1}) / (V(t_i) exp(-c_a dt)) - 1``; pairs
    with ``V(t_i) = V(t_{i+1}) = 0`` have margin 0.
    """
    mask = traj.times >= T0
    t = traj.times[mask]
    if len(t) < 2:
        return CheckResult("inconclusive", checked_samples=len(t))
    V = lyapunov_value(spec, traj.states[mask][:, :3])
    bound = V[:-1] * np.exp(-c_a * np.diff(t))
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(bound > 0, V[1:] / np.where(bound > 0, bound, 1.0) - 1.0,
                          np.where(V[1:] > 0, np.inf, 0.0))
    bad = V[1:] > bound * (1.0 + eps)
    first = float(t[1:][bad][0]) if bad.any() else None
    return CheckResult("fail" if bad.any() else "pass", float(margin.max()), first, len(t))


def verify_dominance(traj: Trajectory, gain: float, t_star: float, eps: float = EPS_TOL) -> CheckResult:
    """``Ms >= gain * M - eps (1 + M)`` at every sample with ``t >= t_star``.

    The margin is ``(gain * M - Ms) / (1 + M)``; negative means slack.
    """
    mask = traj.times >= t_star
    if not mask.any():
        return CheckResult("inconclusive")
    M, Ms = traj["M"][mask], traj["Ms"][mask]
    margin = (gain * M - Ms) / (1.0 + M)
    bad = margin > eps
    first = float(traj.times[mask][bad][0]) if bad.any() else None
    return CheckResult("fail" if bad.any() else "pass", float(margin.max()), first, int(mask.sum()))


def wild_mating_fraction(params: ModelParams, states: np.ndarray) -> np.ndarray:
    M, Ms = states[:, 2], states[:, 4]
    denom = M + params.gamma * Ms
    return np.where(denom > 0, M / np.where(denom > 0, denom, 1.0), 0.0)


@dataclass(frozen=True)
class RateFit:
    rate: float
    log_intercept: float
    window: tuple[float, float]
    samples: int
    envelope_rate: float | None = None
    envelope_C: float | None = None
    envelope_ok: bool | None = None


def default_fit_window(traj: Trajectory, T0: float = 0.0) -> tuple[float, float]:
    return (max(T0, 0.5 * traj.t_end), traj.t_end)


def envelope_constant(traj: Trajectory, c_r: float) -> float:
    """Smallest ``C`` with ``|x(t)| <= C |x0| exp(-c_r t)`` at every sample."""
    norms = np.linalg.norm(traj.states, axis=1)
    n0 = norms[0]
    if n0 == 0.0:
        return 0.0 if not norms.any() else math.inf
    # work in logs: exp(c_r t) overflows on long horizons
    with np.errstate(divide="ignore"):
        logs = np.log(norms) + c_r * traj.times - math.log(n0)
    return float(math.exp(min(logs.max(), 700.0)))


def fit_exponential_rate(traj: Trajectory, fit_window: Sequence[float] | None = None,
                         c_r: float | None = None, C_cap: float = C_CAP, T0: float = 0.0) -> RateFit:
    """Least-squares decay rate of ``log |x(t)|`` on a window, plus an optional envelope check."""
    lo, hi = fit_window if fit_window is not None else default_fit_window(traj, T0)
    mask = (traj.times >= lo) & (traj.times <= hi)
    if mask.sum() < 2:
        raise ValueError(f"fit window [{lo}, {hi}] holds fewer than two samples")
    norms = np.linalg.norm(traj.states[mask], axis=1)
    if np.any(norms == 0.0):
        raise ValueError(f"fit window [{lo}, {hi}] contains the zero state")
    slope, intercept = np.polyfit(traj.times[mask], np.log(norms), 1)
    env_C = env_ok = None
    if c_r is not None:
        env_C = envelope_constant(traj, c_r)
        env_ok = bool(env_C <= C_cap)
    return RateFit(float(-slope), float(intercept), (float(lo), float(hi)), int(mask.sum()),
                   c_r, env_C, env_ok)


def _exp_diff(a: float, b: float, t: np.ndarray) -> np.ndarray:
    """``(exp(-a t) - exp(-b t)) / (b - a)``, i.e. ``int_0^t exp(-b (t-s)) exp(-a s) ds``."""
    if abs(b - a) < RESONANCE_TOL:
        return t * np.exp(-a * t)
    return (np.exp(-a * t) - np.exp(-b * t)) / (b - a)


@dataclass
class BoundChainResult:
    checks: dict[str, CheckResult] = field(default_factory=dict)
    z_envelope_C: float | None = None
    resonant: bool = False

    @property
    def ok(self) -> bool:
        return all(c.status in ("pass", "not_applicable") for c in self.checks.values())


def _upper_check(t: np.ndarray, value: np.ndarray, bound: np.ndarray, eps: float) -> CheckResult:
    margin = (value - bound) / (1.0 + np.abs(bound))
    bad = value > bound + eps * (1.0 + np.abs(bound))
    first = float(t[bad][0]) if bad.any() else None
    return CheckResult("fail" if bad.any() else "pass", float(margin.max()) if len(t) else None,
                       first, len(t))


def verify_bound_chain(traj: Trajectory, params: ModelParams, gain: float | None = None,
                       law_kind: str | None = None, c_a: float | None = None,
                       eps: float = EPS_TOL) -> BoundChainResult:
    """Compare the sterile compartments and the pre-crossing transient with their closed-form envelopes.

    * ``Fs``: ``Fs0 e^{-dF t} + C nu nu_E |z0| (e^{-c_a t} - e^{-dF t}) / (dF - c_a)``
    * ``Ms`` (emms law only): variation-of-constants envelope driven by the
      same ``C |z0| e^{-c_a t}`` bound on ``E``; its initial term decays at
      the wild-male rate because the law returns ``delta_hat Ms``.
    * when ``E(0) >= K``: exponential envelopes of ``E, F, M, Fs`` on
      ``[0, t0]`` with ``t0`` the K-crossing time.

    ``C`` is calibrated as the smallest constant with
    ``|z(t)| <= C |z0| e^{-c_a t}`` on the samples (Euclidean norm).
    """
    p = params
    t = traj.times
    X = traj.states
    E0, F0, M0, Fs0, Ms0 = X[0]
    res = BoundChainResult()
    b = (1.0 - p.nu) * p.nu_E
    c = p.nu * p.nu_E

    if c_a is None and gain is not None and law_kind in ("emms", "em") and gain > gain_threshold(p):
        c_a = predicted_rates(p, gain, law_kind).c_a
    if c_a is not None:
        znorm = np.linalg.norm(X[:, :3], axis=1)
        z0 = znorm[0]
        if z0 > 0:
            with np.errstate(divide="ignore"):
                C = float(np.exp(np.max(np.log(znorm) + c_a * t) - math.log(z0)))
        else:
            C = 0.0
        res.z_envelope_C = C
        Cz = C * z0
        fs_bound = Fs0 * np.exp(-p.delta_F * t) + c * Cz * _exp_diff(c_a, p.delta_F, t)
        res.checks["Fs_envelope"] = _upper_check(t, X[:, 3], fs_bound, eps)
        if law_kind == "emms" and gain is not None:
            dM = p.delta_M
            d = dM - c_a
            decay = np.exp(-dM * t)
            if abs(d) < RESONANCE_TOL:
                res.resonant = True
                ramp = t * t * decay
                drive = t * decay
            else:
                ramp = (np.exp(-c_a * t) - decay - d * t * decay) / d ** 2
                drive = (np.exp(-c_a * t) - decay) / d
            ms_bound = (Ms0 * decay + p.delta_hat * M0 * t * decay
                        + p.delta_hat * Cz * b * ramp + gain * Cz * b * drive)
            res.checks["Ms_envelope"] = _upper_check(t, X[:, 4], ms_bound, eps)
        else:
            res.checks["Ms_envelope"] = CheckResult("not_applicable")

    if E0 >= p.K:
        t0 = traj.event_time("K_crossing")
        if t0 is None:
            t0 = traj.t_end
        m = t <= t0
        tt = t[m]
        a = p.nu_E + p.delta_E
        bounds = {
            "E": E0 * np.exp(-a * tt),
            "F": F0 * np.exp(-p.delta_F * tt) + c * E0 * _exp_diff(a, p.delta_F, tt),
            "M": M0 * np.exp(-p.delta_M * tt) + b * E0 * _exp_diff(p.delta_F, p.delta_M, tt),
            "Fs": Fs0 * np.exp(-p.delta_F * tt) + c * E0 * _exp_diff(a, p.delta_F, tt),
        }
        cols = {"E": 0, "F": 1, "M": 2, "Fs": 3}
        for name, bound in bounds.items():
            res.checks[f"{name}_before_K_crossing"] = _upper_check(tt, X[m, cols[name]], bound, eps)
    return res


def _law_gain(law: ControlLaw) -> float | None:
    return law.gain if isinstance(law, (EMMs, EM)) else None


# ---------------------------------------------------------------- equilibria


@dataclass(frozen=True)
class EquilibriumCandidate:
    state: tuple[float, float, float, float, float]
    residual: float
    refined: bool


def _jacobian_batch(params: ModelParams, law: ControlLaw, X: np.ndarray) -> np.ndarray:
    p = params
    E, F, M, Fs, Ms = (X[:, i] for i in range(5))
    b = (1.0 - p.nu) * p.nu_E
    c = p.nu * p.nu_E
    D = M + p.gamma * Ms
    pos = D > 0
    Ds = np.where(pos, D, 1.0)
    wild = np.where(pos, M / Ds, 0.0)
    sterile = np.where(pos, p.gamma * Ms / Ds, 0.0)
    dw_dM = np.where(pos, p.gamma * Ms / Ds ** 2, 0.0)
    dw_dMs = np.where(pos, -p.gamma * M / Ds ** 2, 0.0)
    J = np.zeros((len(X), 5, 5))
    J[:, 0, 0] = -p.beta_E * F / p.K - (p.nu_E + p.delta_E)
    J[:, 0, 1] = p.beta_E * (1.0 - E / p.K)
    J[:, 1, 0] = c * wild
    J[:, 1, 1] = -p.delta_F
    J[:, 1, 2] = c * E * dw_dM
    J[:, 1, 4] = c * E * dw_dMs
    J[:, 2, 0] = b
    J[:, 2, 2] = -p.delta_M
    J[:, 3, 0] = c * sterile
    J[:, 3, 2] = -c * E * dw_dM
    J[:, 3, 3] = -p.delta_F
    J[:, 3, 4] = -c * E * dw_dMs
    J[:, 4, 4] = -p.delta_s
    if isinstance(law, EMMs):
        J[:, 4, 0] += law.psi * b
        J[:, 4, 2] += p.delta_hat
        J[:, 4, 4] += p.delta_hat
    elif isinstance(law, EM):
        J[:, 4, 0] += b * law.sigma
        J[:, 4, 2] += law.alpha
    return J


def _field(params, law, X):
    return vector_field_batch(params, X, evaluate_control_batch(law, params, X))


def axis_scales(params: ModelParams, law: ControlLaw) -> np.ndarray:
    """Upper ends of the scan box: ``E <= K`` and the resulting asymptotic bounds."""
    p = params
    b = (1.0 - p.nu) * p.nu_E
    F_max = p.nu * p.nu_E * p.K / p.delta_F
    M_max = b * p.K / p.delta_M
    if isinstance(law, EMMs):
        Ms_max = (law.psi * b * p.K + p.delta_hat * M_max) / p.delta_M
    elif isinstance(law, EM):
        Ms_max = (law.alpha * M_max + b * law.sigma * p.K) / p.delta_s
    elif isinstance(law, Constant) and law.rate > 0:
        Ms_max = law.rate / p.delta_s
    else:
        Ms_max = M_max
    return np.array([p.K, F_max, M_max, F_max, Ms_max])


def scan_equilibria(params: ModelParams, law: ControlLaw, points_per_axis: int = 20,
                    decades: float = 6.0, residual_tol: float = 1e-8, max_newton: int = 100,
                    scales: Sequence[float] | None = None) -> list[EquilibriumCandidate]:
    """Grid search for closed-loop equilibria in ``B_K x [0, Ms_max]``.

    Each axis holds 0 and ``points_per_axis - 1`` log-spaced values spanning
    ``decades`` below the axis scale. Local minima of the scaled residual
    (against all axis neighbours) seed a damped Newton iteration; converged
    points (``|f| < residual_tol``) are deduplicated. Seeds whose iteration
    stalls are returned with ``refined=False``.
    """
    scales = axis_scales(params, law) if scales is None else np.asarray(scales, dtype=float)
    n = points_per_axis
    unit = np.concatenate([[0.0], np.logspace(-decades, 0.0, n - 1)])
    axes = [unit * s for s in scales]

    # residual on the full grid, one E-slab at a time
    r = np.empty((n,) * 5)
    mesh = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, 4)
    for i, e in enumerate(axes[0]):
        X = np.column_stack([np.full(len(mesh), e), mesh])
        f = _field(params, law, X) / scales
        r[i] = np.sqrt((f ** 2).sum(axis=1)).reshape((n,) * 4)

    is_min = np.ones_like(r, dtype=bool)
    for ax in range(5):
        lo = [slice(None)] * 5
        hi = [slice(None)] * 5
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        is_min[lo] &= r[lo] <= r[hi]
        is_min[hi] &= r[hi] <= r[lo]
    idx = np.argwhere(is_min)
    seeds = np.column_stack([axes[k][idx[:, k]] for k in range(5)])

    X, res, refined = _damped_newton(params, law, seeds, scales, residual_tol, max_newton)
    return _dedupe(X, res, refined)


def _damped_newton(params, law, X, scales, tol, max_iter):
    """Batched damped Newton in scaled coordinates, projected onto ``x >= 0``.

    Iterates until the step stagnates (not merely until ``|f| < tol``) so
    that points converging to the same root coincide to rounding.
    """
    X = X.astype(float).copy()
    f = _field(params, law, X)
    sres = np.linalg.norm(f / scales, axis=1)
    active = np.ones(len(X), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        Xa, fa, ra = X[active], f[active], sres[active]
        J = _jacobian_batch(params, law, Xa)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J / scales[None, :, None] * scales[None, None, :]),
                         fa / scales) * scales
        lam = np.ones(len(Xa))
        best_X, best_f, best_r = Xa.copy(), fa.copy(), ra.copy()
        improved = np.zeros(len(Xa), dtype=bool)
        for _ in range(40):
            trial = np.maximum(Xa - lam[:, None] * step, 0.0)
            ft = _field(params, law, trial)
            rt = np.linalg.norm(ft / scales, axis=1)
            take = (~improved) & ((rt < ra) | ((rt == 0.0) & (ra == 0.0)))
            best_X[take], best_f[take], best_r[take] = trial[take], ft[take], rt[take]
            improved |= take
            if improved.all():
                break
            lam = np.where(improved, lam, 0.5 * lam)
        moved = np.linalg.norm((best_X - Xa) / scales, axis=1)
        still = improved & (moved > 1e-15) & (best_r > 0.0)
        X[active], f[active], sres[active] = best_X, best_f, best_r
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
    res = np.linalg.norm(f, axis=1)
    return X, res, res < tol


def _dedupe(X, res, refined) -> list[EquilibriumCandidate]:
    order = np.lexsort((res, ~refined))
    kept: list[EquilibriumCandidate] = []
    for i in order:
        x = X[i]
        dup = False
        for k in kept:
            y = np.array(k.state)
            if np.linalg.norm(x - y) <= 1e-6 * (1.0 + max(np.linalg.norm(x), np.linalg.norm(y))):
                dup = True
                break
            if not refined[i] and k.refined and np.linalg.norm(x - y) <= 1e-3 * (1.0 + np.linalg.norm(y)):
                dup = True
                break
        if not dup:
            kept.append(EquilibriumCandidate(tuple(float(v) for v in x), float(res[i]), bool(refined[i])))
    kept.sort(key=lambda c: (not c.refined, float(np.linalg.norm(c.state))))
    return kept


# ---------------------------------------------------------------- reports


@dataclass
class StabilityReport:
    law: dict
    gain: float | None
    threshold: float
    uniqueness_threshold: float
    stabilizing_predicted: bool | None
    dominance_time: float | None
    c_a: float | None
    c_e_or_c_b: float | None
    dominance: CheckResult
    lyapunov_decay: CheckResult
    fit: RateFit | None
    extinction_time: float | None
    t_end: float
    bound_chain: dict[str, CheckResult] = field(default_factory=dict)
    guaranteed_dominance_time: float | None = None
    dominance_guaranteed: CheckResult = field(default_factory=lambda: CheckResult("not_applicable"))

    @property
    def dominance_ok(self) -> bool:
        return self.dominance.ok

    @property
    def lyapunov_decay_ok(self) -> bool:
        return self.lyapunov_decay.ok

    @property
    def fitted_rate(self) -> float | None:
        return None if self.fit is None else self.fit.rate

    @property
    def envelope_ok(self) -> bool | None:
        return None if self.fit is None else self.fit.envelope_ok

    def to_dict(self) -> dict:
        fit = self.fit
        return {
            "law": self.law,
            "gain": self.gain,
            "threshold": self.threshold,
            "uniqueness_threshold": self.uniqueness_threshold,
            "stabilizing_predicted": self.stabilizing_predicted,
            "dominance_time": self.dominance_time,
            "c_a": self.c_a,
            "c_e_or_c_b": self.c_e_or_c_b,
            "dominance_ok": self.dominance_ok,
            "dominance": self.dominance.to_dict(),
            "guaranteed_dominance_time": self.guaranteed_dominance_time,
            "dominance_from_guaranteed_time": self.dominance_guaranteed.to_dict(),
            "lyapunov_decay_ok": self.lyapunov_decay_ok,
            "lyapunov_decay": self.lyapunov_decay.to_dict(),
            "fitted_rate": None if fit is None else fit.rate,
            "fit_window": None if fit is None else list(fit.window),
            "envelope_rate": None if fit is None else fit.envelope_rate,
            "envelope_C": None if fit is None else _finite_or_none(fit.envelope_C),
            "envelope_ok": self.envelope_ok,
            "extinction_time": self.extinction_time,
            "t_end": self.t_end,
            "bound_chain": {k: v.to_dict() for k, v in sorted(self.bound_chain.items())},
            "norms": {"fit_and_envelope": "euclidean", "lyapunov_sandwich": "l1"},
        }

    def summary(self) -> str:
        def fmt(v):
            return "n/a" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v))

        lines = [
            f"law                : {self.law}",
            f"gain / threshold   : {fmt(self.gain)} / {fmt(self.threshold)}"
            f" (stabilizing predicted: {fmt(self.stabilizing_predicted)})",
            f"dominance time     : {fmt(self.dominance_time)} days",
            f"c_a, c_e/c_b       : {fmt(self.c_a)}, {fmt(self.c_e_or_c_b)} 1/day",
            f"dominance          : {self.dominance.status}"
            f" (from guaranteed time {fmt(self.guaranteed_dominance_time)}: {self.dominance_guaranteed.status})",
            f"Lyapunov decay     : {self.lyapunov_decay.status}",
            f"fitted tail rate   : {fmt(self.fitted_rate)} 1/day",
            f"envelope           : {fmt(self.envelope_ok)}",
            f"extinction (E<=1)  : {fmt(self.extinction_time)} days (measured)",
        ]
        return "\n".join(lines)


def _finite_or_none(v):
    if v is None or not math.isfinite(v):
        return None
    return float(v)


def stability_report(traj: Trajectory, params: ModelParams, law: ControlLaw,
                     fit_window: Sequence[float] | None = None, eps: float = EPS_TOL) -> StabilityReport:
    """Run every applicable check on a trajectory of the given closed loop."""
    thr = gain_threshold(params)
    uniq = thr - params.delta_hat / params.delta_M
    gain = _law_gain(law)
    na = CheckResult("not_applicable")
    dominance = dominance_safe = lyap = na
    c_a = c_bound = T_star = T_safe = None
    stabilizing = None
    if gain is not None:
        diag = law_diagnostics(law, params)
        stabilizing = diag.stabilizing
        T_star, T_safe = diag.dominance_time, diag.guaranteed_dominance_time
        if T_star is not None and gain > 0:
            dominance = verify_dominance(traj, gain, T_star, eps)
            dominance_safe = verify_dominance(traj, gain, T_safe, eps)
        if gain > thr:
            rates = predicted_rates(params, gain, law.kind)
            c_a, c_bound = rates.c_a, rates.c_bound
            # the decay estimate needs the mating-fraction bound, i.e. proven dominance
            if T_safe is not None:
                lyap = verify_lyapunov_decay(traj, lyapunov_spec(params, gain), c_a, T_safe, eps)
    fit = None
    try:
        fit = fit_exponential_rate(
            traj, fit_window, c_r=None if c_bound is None else 0.9 * c_bound, T0=T_safe or 0.0
        )
    except ValueError:
        fit = None
    chain = verify_bound_chain(traj, params, gain, law.kind, c_a, eps) if c_a is not None or \
        traj.states[0, 0] >= params.K else BoundChainResult()
    return StabilityReport(
        law=law.to_dict(),
        gain=gain,
        threshold=thr,
        uniqueness_threshold=uniq,
        stabilizing_predicted=stabilizing,
        dominance_time=T_star,
        c_a=c_a,
        c_e_or_c_b=c_bound,
        dominance=dominance,
        lyapunov_decay=lyap,
        fit=fit,
        extinction_time=traj.event_time("extinction"),
        t_end=traj.t_end,
        bound_chain=chain.checks,
        guaranteed_dominance_time=T_safe,
        dominance_guaranteed=dominance_safe,
    )
