"""Sterile-male release policies and their feasibility diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .model import ModelParams, ParameterError, SitState, gain_threshold


@dataclass(frozen=True)
class Zero:
    kind = "zero"

    def to_dict(self) -> dict:
        return {"law": "zero"}


@dataclass(frozen=True)
class Constant:
    rate: float

    kind = "constant"

    def __post_init__(self):
        _check_real("rate", self.rate, lower=0.0, strict=False)

    def to_dict(self) -> dict:
        return {"law": "constant", "rate": float(self.rate)}


@dataclass(frozen=True)
class EMMs:
    """``u = psi (1 - nu) nu_E E + delta_hat (M + Ms)``.

    ``psi = 0`` is accepted as a degenerate member of the family (it only
    compensates the excess sterile mortality); every stabilization result
    needs ``psi`` above the threshold anyway.
    """

    psi: float

    kind = "emms"

    def __post_init__(self):
        _check_real("psi", self.psi, lower=0.0, strict=False)

    @property
    def gain(self) -> float:
        return float(self.psi)

    def to_dict(self) -> dict:
        return {"law": "emms", "psi": float(self.psi)}


@dataclass(frozen=True)
class EM:
    """``u = alpha M + (1 - nu) nu_E sigma E``."""

    alpha: float
    sigma: float

    kind = "em"

    def __post_init__(self):
        _check_real("alpha", self.alpha, lower=0.0, strict=True)
        _check_real("sigma", self.sigma, lower=0.0, strict=True)

    @property
    def gain(self) -> float:
        return float(self.sigma)

    def to_dict(self) -> dict:
        return {"law": "em", "alpha": float(self.alpha), "sigma": float(self.sigma)}


ControlLaw = Union[Zero, Constant, EMMs, EM]

# integer tags understood by the integration kernels
LAW_CODES = {"zero": 0, "constant": 1, "emms": 2, "em": 3}


def _check_real(name, value, lower, strict):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ParameterError(f"{name} must be a finite real number, got {value!r}")
    if value < lower or (strict and value == lower):
        op = ">" if strict else ">="
        raise ParameterError(f"{name} must be {op} {lower}, got {value!r}")


def law_from_dict(data: Mapping[str, object]) -> ControlLaw:
    data = dict(data)
    kind = data.pop("law", None)
    expected = {"zero": (), "constant": ("rate",), "emms": ("psi",), "em": ("alpha", "sigma")}
    if kind not in expected:
        raise ParameterError(f"law must be one of {sorted(expected)}, got {kind!r}")
    keys = expected[kind]
    extra = set(data) - set(keys)
    missing = set(keys) - set(data)
    if extra:
        raise ParameterError(f"unexpected key(s) for law {kind!r}: {', '.join(sorted(extra))}")
    if missing:
        raise ParameterError(f"missing key(s) for law {kind!r}: {', '.join(sorted(missing))}")
    cls = {"zero": Zero, "constant": Constant, "emms": EMMs, "em": EM}[kind]
    return cls(**data)


def kernel_encoding(law: ControlLaw) -> tuple[int, np.ndarray]:
    """Integer tag and coefficient pair consumed by the compiled/pure kernels."""
    if isinstance(law, Zero):
        args = (0.0, 0.0)
    elif isinstance(law, Constant):
        args = (law.rate, 0.0)
    elif isinstance(law, EMMs):
        args = (law.psi, 0.0)
    elif isinstance(law, EM):
        args = (law.alpha, law.sigma)
    else:
        raise TypeError(f"not a control law: {law!r}")
    return LAW_CODES[law.kind], np.array(args, dtype=float)


def evaluate_control(law: ControlLaw, params: ModelParams, state) -> float:
    x = state.as_array() if isinstance(state, SitState) else np.asarray(state, dtype=float)
    if np.any(x < 0):
        raise ParameterError(f"state must be nonnegative, got {x.tolist()}")
    E, _, M, _, Ms = x
    p = params
    if isinstance(law, Zero):
        return 0.0
    if isinstance(law, Constant):
        return float(law.rate)
    if isinstance(law, EMMs):
        return float(law.psi * (1.0 - p.nu) * p.nu_E * E + p.delta_hat * (M + Ms))
    if isinstance(law, EM):
        return float(law.alpha * M + (1.0 - p.nu) * p.nu_E * law.sigma * E)
    raise TypeError(f"not a control law: {law!r}")


def evaluate_control_batch(law: ControlLaw, params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    E, M, Ms = X[..., 0], X[..., 2], X[..., 4]
    p = params
    if isinstance(law, Zero):
        return np.zeros_like(E)
    if isinstance(law, Constant):
        return np.full_like(E, law.rate)
    if isinstance(law, EMMs):
        return law.psi * (1.0 - p.nu) * p.nu_E * E + p.delta_hat * (M + Ms)
    if isinstance(law, EM):
        return law.alpha * M + (1.0 - p.nu) * p.nu_E * law.sigma * E
    raise TypeError(f"not a control law: {law!r}")


@dataclass(frozen=True)
class LawDiagnostics:
    threshold: float
    uniqueness_threshold: float
    alpha_floor: float | None
    dominance_time: float | None
    stabilizing: bool
    guaranteed_dominance_time: float | None = None

    def to_dict(self) -> dict:
        return {
            "threshold_psi_or_sigma": self.threshold,
            "uniqueness_threshold": self.uniqueness_threshold,
            "alpha_floor": self.alpha_floor,
            "dominance_time": self.dominance_time,
            "guaranteed_dominance_time": self.guaranteed_dominance_time,
            "stabilizing": self.stabilizing,
        }


def law_diagnostics(law: ControlLaw, params: ModelParams) -> LawDiagnostics:
    """Sufficient stabilization test and sterile-dominance time of a linear law.

    ``stabilizing`` is the strict sufficient condition on the gain; the weaker
    ``uniqueness_threshold`` only rules out nonzero equilibria.

    For the em law ``dominance_time`` is the published expression
    ``-ln(1 - delta_hat sigma / alpha) / alpha``. The lower bound
    ``M0 e^{-dM t} (alpha/delta_hat (1 - e^{-delta_hat t}) - sigma)`` on
    ``Ms - sigma M`` only turns nonnegative at
    ``-ln(1 - delta_hat sigma / alpha) / delta_hat``, which is returned as
    ``guaranteed_dominance_time``. For emms both coincide with
    ``psi / delta_hat``.
    """
    thr = gain_threshold(params)
    uniq = thr - params.delta_hat / params.delta_M
    if isinstance(law, EMMs):
        return LawDiagnostics(
            threshold=thr,
            uniqueness_threshold=uniq,
            alpha_floor=None,
            dominance_time=law.psi / params.delta_hat,
            stabilizing=law.psi > thr,
            guaranteed_dominance_time=law.psi / params.delta_hat,
        )
    if isinstance(law, EM):
        floor = law.sigma * params.delta_hat
        if law.alpha > floor:
            log_gap = -math.log1p(-floor / law.alpha)
            T_e, T_safe = log_gap / law.alpha, log_gap / params.delta_hat
        else:
            T_e = T_safe = None
        return LawDiagnostics(
            threshold=thr,
            uniqueness_threshold=uniq,
            alpha_floor=floor,
            dominance_time=T_e,
            stabilizing=bool(law.sigma > thr and law.alpha > floor),
            guaranteed_dominance_time=T_safe,
        )
    raise ParameterError(f"diagnostics are defined for the emms and em laws only, got {law.kind!r}")


class QuadratureError(RuntimeError):
    pass


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, abs_tol: float = 1e-10,
                     max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""
    if b == a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # explicit stack instead of recursion: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, abs_tol, 0)]
    total = 0.0
    while stack:
        a0, b0, fa0, fm0, fb0, S, tol, depth = stack.pop()
        m = 0.5 * (a0 + b0)
        lm, rm = 0.5 * (a0 + m), 0.5 * (m + b0)
        flm, frm = f(lm), f(rm)
        left = (m - a0) / 6.0 * (fa0 + 4.0 * flm + fm0)
        right = (b0 - m) / 6.0 * (fm0 + 4.0 * frm + fb0)
        delta = left + right - S
        if abs(delta) <= 15.0 * tol:
            total += left + right + delta / 15.0
        elif depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson did not reach abs_tol={abs_tol:g} on [{a0!r}, {b0!r}]"
            )
        else:
            stack.append((a0, m, fa0, flm, fm0, left, 0.5 * tol, depth + 1))
            stack.append((m, b0, fm0, frm, fb0, right, 0.5 * tol, depth + 1))
    return total


def _piecewise_simpson(f, t, breakpoints, abs_tol):
    pts = [0.0]
    if breakpoints is not None:
        pts += [float(s) for s in breakpoints if 0.0 < s < t]
    pts.append(float(t))
    pts = sorted(set(pts))
    tol = abs_tol / max(len(pts) - 1, 1)
    return sum(adaptive_simpson(f, lo, hi, tol) for lo, hi in zip(pts[:-1], pts[1:]))


def closed_form_Ms_EMMs(params: ModelParams, psi: float, initial: SitState,
                        E_history: Callable[[float], float], t: float,
                        abs_tol: float = 1e-10, breakpoints: Sequence[float] | None = None) -> float:
    """Sterile-male density under the EMMs law by variation of constants.

    Substituting the law into the sterile-male equation gives
    ``Ms' = psi (1-nu) nu_E E + delta_hat M - delta_M Ms``, so every term,
    including the initial sterile stock, decays at the wild-male rate::

        Ms(t) = Ms0 e^{-dM t} + dh M0 t e^{-dM t}
                + dh (1-nu) nu_E e^{-dM t} int_0^t (t-s) E(s) e^{dM s} ds
                + psi (1-nu) nu_E e^{-dM t} int_0^t E(s) e^{dM s} ds

    The integrals are evaluated with adaptive Simpson; pass the knots of a
    piecewise ``E_history`` as ``breakpoints`` to keep the quadrature smooth.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    p = params
    dM, dh = p.delta_M, p.delta_hat
    b = (1.0 - p.nu) * p.nu_E
    # e^{dM (s - t)} keeps integrands bounded for long horizons
    conv = _piecewise_simpson(lambda s: E_history(s) * math.exp(dM * (s - t)), t, breakpoints, abs_tol)
    ramp = _piecewise_simpson(lambda s: (t - s) * E_history(s) * math.exp(dM * (s - t)), t, breakpoints, abs_tol)
    decay = math.exp(-dM * t)
    return initial.Ms * decay + dh * initial.M * t * decay + dh * b * ramp + psi * b * conv
