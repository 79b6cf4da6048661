"""Run configuration: TOML-style files, presets and path overrides."""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import EM, EMMs, ControlLaw, Zero, law_from_dict
from .integrator import IntegratorConfig
from .model import PARAM_KEYS, STATE_KEYS, ModelParams, ParameterError, SitState, persistence_state

SECTIONS = ("params", "law", "x0", "integrator", "output")
CLI_T_MAX = 12000.0


class ConfigError(ParameterError):
    """Invalid or inconsistent configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    law: ControlLaw = field(default_factory=Zero)
    x0: SitState | str = "persistence"
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(t_max=CLI_T_MAX))
    output_dir: str = "sitfeedback-run"

    def initial_state(self) -> SitState:
        if isinstance(self.x0, SitState):
            return self.x0
        if self.x0 == "persistence":
            return persistence_state(self.params)
        raise ConfigError(f"unknown initial-state preset {self.x0!r}", "x0.preset")

    def to_dict(self) -> dict:
        if isinstance(self.x0, SitState):
            x0 = {k: getattr(self.x0, k) for k in STATE_KEYS}
        else:
            x0 = {"preset": self.x0}
        return {
            "params": self.params.as_dict(),
            "law": self.law.to_dict(),
            "x0": x0,
            "integrator": self.integrator.to_dict(),
            "output": {"directory": self.output_dir},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown section(s) {sorted(unknown)}")
        try:
            params = ModelParams.from_mapping(data.get("params", {}))
        except (TypeError, ParameterError) as exc:
            raise ConfigError(str(exc), "params") from None
        try:
            law = law_from_dict(data.get("law", {"law": "zero"}))
        except (TypeError, ParameterError) as exc:
            raise ConfigError(str(exc), "law") from None
        x0 = _x0_from_dict(data.get("x0", {"preset": "persistence"}))
        integ = dict(data.get("integrator", {}))
        integ.setdefault("t_max", CLI_T_MAX)
        try:
            integrator = IntegratorConfig(**integ)
        except (TypeError, ParameterError) as exc:
            raise ConfigError(str(exc), "integrator") from None
        out = dict(data.get("output", {}))
        extra = set(out) - {"directory"}
        if extra:
            raise ConfigError(f"unknown key(s) {sorted(extra)}", "output")
        cfg = cls(params, law, x0, integrator, str(out.get("directory", "sitfeedback-run")))
        if cfg.x0 == "persistence" and params.R <= 1.0:
            raise ConfigError(f"the persistence preset needs R > 1 (R = {params.R!r})", "x0.preset")
        return cfg


def _x0_from_dict(d: Mapping[str, Any]) -> SitState | str:
    d = dict(d)
    if "preset" in d:
        if len(d) > 1:
            raise ConfigError("preset cannot be combined with explicit components", "x0")
        if d["preset"] != "persistence":
            raise ConfigError(f"unknown preset {d['preset']!r}", "x0.preset")
        return "persistence"
    extra = set(d) - set(STATE_KEYS)
    if extra:
        raise ConfigError(f"unknown component(s) {sorted(extra)}", "x0")
    try:
        return SitState(**{k: float(d.get(k, 0.0)) for k in STATE_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "x0") from None


def preset(name: str) -> RunConfig:
    """Reference configurations: emms with psi = 2R (``fig1``) and em with sigma = 2R, alpha = 4R delta_hat (``fig2``).

    Both start at ``(X_E*, 0, 0)`` and run the full horizon; the drop to
    ``E <= 1`` is recorded as an event without halting so that properties
    claimed after the dominance time remain checkable.
    """
    p = ModelParams()
    R = p.R
    integ = IntegratorConfig(t_max=CLI_T_MAX, stop_on_extinction=False)
    if name == "fig1":
        return RunConfig(p, EMMs(psi=2.0 * R), "persistence", integ, "fig1")
    if name == "fig2":
        return RunConfig(p, EM(alpha=4.0 * R * p.delta_hat, sigma=2.0 * R), "persistence", integ, "fig2")
    raise ConfigError(f"unknown preset {name!r} (choose fig1 or fig2)", "preset")


PRESETS = ("fig1", "fig2")


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path) -> RunConfig:
    data = load_toml(path)
    # a flat file of model keys is accepted as a parameters-only config
    if data and set(data) <= set(PARAM_KEYS):
        data = {"params": data}
    return RunConfig.from_dict(data)


def load_params(path) -> ModelParams:
    data = load_toml(path)
    if "params" in data:
        data = data["params"]
    try:
        return ModelParams.from_mapping(data)
    except (TypeError, ParameterError) as exc:
        raise ConfigError(str(exc), "params") from None


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"cannot write non-finite value {v!r}")
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise ConfigError(f"cannot write value {v!r}")


def to_toml(data: Mapping[str, Mapping[str, Any]]) -> str:
    lines = []
    for section, table in data.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in table.items())
        lines.append("")
    return "\n".join(lines)


def params_to_toml(params: ModelParams) -> str:
    return "\n".join(f"{k} = {_toml_value(v)}" for k, v in params.as_dict().items()) + "\n"


def parse_scalar(text: str):
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return float(text)
    except ValueError:
        return text.strip().strip('"')


def apply_override(data: dict, path: str, value) -> dict:
    """Set ``section.key`` in a config dict; law kinds and x0 presets replace their section."""
    out = copy.deepcopy(data)
    section, _, key = path.partition(".")
    if section not in SECTIONS or not key:
        raise ConfigError(f"override path must look like <section>.<key> with section in {SECTIONS}", path)
    table = out.setdefault(section, {})
    if section == "law" and key == "law":
        out["law"] = {"law": value}
    elif section == "x0" and key == "preset":
        out["x0"] = {"preset": value}
    elif section == "x0":
        if "preset" in table:
            # switching from the preset to explicit components starts from the resolved state
            state = RunConfig.from_dict(out).initial_state()
            table = out["x0"] = {k: getattr(state, k) for k in STATE_KEYS}
        table[key] = value
    else:
        table[key] = value
    return out


def write_text(path, text: str) -> None:
    Path(path).write_text(text)
