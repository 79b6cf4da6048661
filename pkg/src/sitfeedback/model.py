"""Mosquito life-cycle model with sterile-male releases.

State ordering everywhere is ``(E, F, M, Fs, Ms)``: aquatic stage, females
mated with wild males, wild males, females mated with sterile males and
sterile males.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from typing import Mapping

import numpy as np

PARAM_KEYS = ("beta_E", "nu_E", "delta_E", "delta_F", "delta_M", "delta_s", "nu", "K", "gamma")
STATE_KEYS = ("E", "F", "M", "Fs", "Ms")


class ParameterError(ValueError):
    """Raised when model parameters or states violate their invariants."""


@dataclass(frozen=True)
class ModelParams:
    """Biological rates (per day), carrying capacity and mating preference.

    Defaults are the values used for the reference simulations (gamma = 1,
    i.e. no preference for fertile males).
    """

    beta_E: float = 8.0
    nu_E: float = 0.05
    delta_E: float = 0.03
    delta_F: float = 0.04
    delta_M: float = 0.1
    delta_s: float = 0.12
    nu: float = 0.49
    K: float = 50000.0
    gamma: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParameterError(f"{f.name} must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        for name in ("beta_E", "nu_E", "delta_E", "delta_F", "delta_M", "delta_s", "K"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not 0.0 < self.nu < 1.0:
            raise ParameterError(f"nu must lie in (0, 1), got {self.nu!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ParameterError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if self.delta_s <= self.delta_M:
            raise ParameterError(
                f"delta_s must exceed delta_M (got delta_s={self.delta_s!r}, delta_M={self.delta_M!r})"
            )

    @property
    def delta_hat(self) -> float:
        return self.delta_s - self.delta_M

    @property
    def R(self) -> float:
        return self.beta_E * self.nu * self.nu_E / (self.delta_F * (self.delta_E + self.nu_E))

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping[str, object]) -> "ModelParams":
        unknown = set(data) - set(PARAM_KEYS)
        if unknown:
            raise ParameterError(f"unknown parameter key(s): {', '.join(sorted(unknown))}")
        return cls(**data)  # type: ignore[arg-type]

    def with_(self, **changes: float) -> "ModelParams":
        return replace(self, **changes)

    def as_array(self) -> np.ndarray:
        """Packed parameter vector in :data:`PARAM_KEYS` order (kernel input)."""
        return np.array([getattr(self, k) for k in PARAM_KEYS], dtype=float)


def table1_params(**overrides: float) -> ModelParams:
    return ModelParams(**overrides)


def caption_params(**overrides: float) -> ModelParams:
    """Parameter set matching the ``R = 76.56`` quoted with the figures.

    Only the fecundity differs from :func:`table1_params`; with beta_E = 10
    the offspring number is 76.5625.
    """
    return ModelParams(**{"beta_E": 10.0, **overrides})


def exact_R(params: ModelParams) -> Fraction:
    """Basic offspring number in rational arithmetic (decimal inputs taken literally)."""
    q = {k: Fraction(repr(getattr(params, k))) for k in PARAM_KEYS}
    return q["beta_E"] * q["nu"] * q["nu_E"] / (q["delta_F"] * (q["delta_E"] + q["nu_E"]))


@dataclass(frozen=True)
class SitState:
    E: float = 0.0
    F: float = 0.0
    M: float = 0.0
    Fs: float = 0.0
    Ms: float = 0.0

    def __post_init__(self):
        for k in STATE_KEYS:
            v = float(getattr(self, k))
            if not math.isfinite(v) or v < 0.0:
                raise ParameterError(f"state component {k} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, k, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.E, self.F, self.M, self.Fs, self.Ms], dtype=float)

    @classmethod
    def from_array(cls, x) -> "SitState":
        E, F, M, Fs, Ms = (float(v) for v in x)
        return cls(E, F, M, Fs, Ms)

    @property
    def z(self) -> tuple[float, float, float]:
        return (self.E, self.F, self.M)


@dataclass(frozen=True)
class DerivedQuantities:
    R: float
    E_star: float
    X_E_star: tuple[float, float, float]
    delta_hat: float


def derived_quantities(params: ModelParams) -> DerivedQuantities:
    """Offspring number, persistence equilibrium and excess sterile mortality.

    For ``R <= 1`` there is no persistence equilibrium; ``E_star`` is then
    reported as 0 and ``X_E_star`` as the origin.
    """
    R = params.R
    if R > 1.0:
        E_star = params.K * (1.0 - 1.0 / R)
    else:
        E_star = 0.0
    F_star = params.nu * params.nu_E * E_star / params.delta_F
    M_star = (1.0 - params.nu) * params.nu_E * E_star / params.delta_M
    return DerivedQuantities(R=R, E_star=E_star, X_E_star=(E_star, F_star, M_star), delta_hat=params.delta_hat)


def persistence_state(params: ModelParams) -> SitState:
    """The state ``(X_E*, 0, 0)`` used as initial condition for the reference runs."""
    if params.R <= 1.0:
        raise ParameterError(f"persistence equilibrium requires R > 1 (R = {params.R!r})")
    E, F, M = derived_quantities(params).X_E_star
    return SitState(E, F, M, 0.0, 0.0)


def H(params: ModelParams, p: float) -> float:
    """``R / (1 + gamma p)``; below 1 exactly when ``p > (R - 1) / gamma``."""
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p!r}")
    return params.R / (1.0 + params.gamma * p)


def gain_threshold(params: ModelParams) -> float:
    return (params.R - 1.0) / params.gamma


def mating_fractions(params: ModelParams, M: float, Ms: float) -> tuple[float, float]:
    """Probabilities of mating with a wild / sterile male.

    Both are taken to be 0 when no males are present; the egg factor in front
    of them vanishes there along trajectories.
    """
    denom = M + params.gamma * Ms
    if denom <= 0.0:
        return 0.0, 0.0
    return M / denom, params.gamma * Ms / denom


def _as_state_array(state) -> np.ndarray:
    x = state.as_array() if isinstance(state, SitState) else np.asarray(state, dtype=float)
    if x.shape != (5,):
        raise ValueError(f"expected a 5-component state, got shape {x.shape}")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ParameterError(f"state must be finite and nonnegative, got {x.tolist()}")
    return x


def controlled_vector_field(params: ModelParams, state, u: float) -> np.ndarray:
    """Time derivative of ``(E, F, M, Fs, Ms)`` for release rate ``u``."""
    if u < 0 or not math.isfinite(u):
        raise ParameterError(f"release rate must be finite and >= 0, got {u!r}")
    E, F, M, Fs, Ms = _as_state_array(state)
    p = params
    wild, sterile = mating_fractions(p, M, Ms)
    emerge = p.nu * p.nu_E * E
    return np.array(
        [
            p.beta_E * F * (1.0 - E / p.K) - (p.nu_E + p.delta_E) * E,
            emerge * wild - p.delta_F * F,
            (1.0 - p.nu) * p.nu_E * E - p.delta_M * M,
            emerge * sterile - p.delta_F * Fs,
            u - p.delta_s * Ms,
        ]
    )


def uncontrolled_vector_field(params: ModelParams, z) -> np.ndarray:
    """Time derivative of ``(E, F, M)`` without sterile males."""
    E, F, M = (float(v) for v in z)
    if min(E, F, M) < 0:
        raise ParameterError(f"state must be nonnegative, got {(E, F, M)}")
    p = params
    return np.array(
        [
            p.beta_E * F * (1.0 - E / p.K) - (p.nu_E + p.delta_E) * E,
            p.nu * p.nu_E * E - p.delta_F * F,
            (1.0 - p.nu) * p.nu_E * E - p.delta_M * M,
        ]
    )


def vector_field_batch(params: ModelParams, X: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`controlled_vector_field` over rows of ``X`` (shape ``(n, 5)``)."""
    p = params
    E, F, M, Fs, Ms = (X[..., i] for i in range(5))
    denom = M + p.gamma * Ms
    safe = np.where(denom > 0, denom, 1.0)
    wild = np.where(denom > 0, M / safe, 0.0)
    sterile = np.where(denom > 0, p.gamma * Ms / safe, 0.0)
    emerge = p.nu * p.nu_E * E
    out = np.empty_like(X, dtype=float)
    out[..., 0] = p.beta_E * F * (1.0 - E / p.K) - (p.nu_E + p.delta_E) * E
    out[..., 1] = emerge * wild - p.delta_F * F
    out[..., 2] = (1.0 - p.nu) * p.nu_E * E - p.delta_M * M
    out[..., 3] = emerge * sterile - p.delta_F * Fs
    out[..., 4] = u - p.delta_s * Ms
    return out


def in_B_K(state, params: ModelParams, atol: float = 0.0) -> bool:
    """Membership in the invariant box ``{x >= 0, E <= K}`` (``atol`` loosens both checks)."""
    x = state.as_array() if isinstance(state, SitState) else np.asarray(state, dtype=float)
    return bool(np.all(x >= -atol) and x[0] <= params.K + atol)
