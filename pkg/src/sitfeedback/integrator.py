"""Closed-loop integration with K-crossing and extinction events."""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .control import ControlLaw, evaluate_control_batch, kernel_encoding
from .model import STATE_KEYS, ModelParams, ParameterError, SitState, vector_field_batch

METHODS = {"rk4": 0, "rk45": 1}
EVENT_KINDS = ("K_crossing", "extinction", "t_max_reached")
CSV_HEADER = ("t",) + STATE_KEYS + ("u",)
EVENT_TOL = 1e-6
EXTINCTION_LEVEL = 1.0


class IntegrationError(RuntimeError):
    """Integration could not proceed; ``time`` is where it stopped."""

    def __init__(self, message: str, time: float, kind: str):
        super().__init__(f"{message} at t={time!r}")
        self.time = time
        self.kind = kind


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45"
    dt_init: float = 0.1
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    t_max: float = 10000.0
    stop_on_extinction: bool = False
    record_stride: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {sorted(METHODS)}, got {self.method!r}")
        for name in ("dt_init", "rel_tol", "abs_tol", "t_max", "record_stride"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not (v > 0) or not math.isfinite(v):
                raise ParameterError(f"{name} must be a finite number > 0, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not isinstance(self.stop_on_extinction, bool):
            raise ParameterError(f"stop_on_extinction must be a boolean, got {self.stop_on_extinction!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Event:
    time: float
    kind: str


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    events: list[Event] = field(default_factory=list)
    max_clamp: float = 0.0
    steps: int = 0

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.states[:, STATE_KEYS.index(name)]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def event_time(self, kind: str) -> float | None:
        for ev in self.events:
            if ev.kind == kind:
                return ev.time
        return None

    def state(self, i: int) -> SitState:
        return SitState.from_array(self.states[i])


def _record_grid(t_max: float, stride: float) -> np.ndarray:
    n = int(math.floor(t_max / stride + 1e-9))
    grid = stride * np.arange(n + 1, dtype=float)
    if t_max - grid[-1] > 1e-9 * max(1.0, t_max):
        grid = np.append(grid, t_max)
    else:
        grid[-1] = t_max
    return grid


def integrate(params: ModelParams, law: ControlLaw, x0, cfg: IntegratorConfig | None = None,
              backend: str | None = None) -> Trajectory:
    """Integrate the closed loop from ``x0`` and sample it every ``record_stride`` days.

    A downcrossing of ``E = K`` (only possible when ``E(0) >= K``) and the
    first drop to ``E <= 1`` are located by bisection to ``1e-6`` days and
    recorded as events; with ``stop_on_extinction`` the run ends at the
    latter, otherwise it continues to ``t_max``.
    """
    cfg = cfg or IntegratorConfig()
    kern = kernels.get_backend(backend)
    x0 = x0 if isinstance(x0, SitState) else SitState.from_array(x0)
    y0 = x0.as_array()
    pvec = params.as_array()
    code, largs = kernel_encoding(law)
    method = METHODS[cfg.method]
    grid = _record_grid(cfg.t_max, cfg.record_stride)
    out = np.zeros((len(grid), 5))
    h = cfg.dt_init

    events: list[Event] = []
    watch = 0
    stop_index = None
    stop_state = None
    if y0[0] > params.K:
        watch |= kernels.WATCH_K
    elif y0[0] == params.K:
        events.append(Event(0.0, "K_crossing"))
    if y0[0] > EXTINCTION_LEVEL:
        watch |= kernels.WATCH_EXTINCTION
    else:
        events.append(Event(0.0, "extinction"))
        if cfg.stop_on_extinction:
            stop_index = 0

    max_clamp = 0.0
    nsteps = 0
    start = 0
    y = y0
    while stop_index is None:
        idx, status, h, clamp, t_fail, ns = kern.advance_grid(
            y, grid, out, start, pvec, code, largs, method, h, cfg.rel_tol, cfg.abs_tol, watch
        )
        max_clamp = max(max_clamp, clamp)
        nsteps += ns
        if status == kernels.STEP_UNDERFLOW:
            raise IntegrationError("step size underflow: tolerance cannot be met", t_fail, "step_underflow")
        if status == kernels.NONFINITE:
            raise IntegrationError("non-finite value in the vector field", t_fail, "model_evaluation")
        if status == kernels.NEGATIVE:
            raise IntegrationError(
                f"negative component beyond the clamp limit {10 * cfg.abs_tol:g}", t_fail, "negativity"
            )
        if status == kernels.OK:
            break
        # EVENT between grid[idx - 1] and grid[idx]
        E_prev, E_new = out[idx - 1, 0], out[idx, 0]
        if (watch & kernels.WATCH_K) and E_prev > params.K >= E_new:
            t_ev, _ = _bisect_event(kern, out[idx - 1], grid[idx - 1], grid[idx], params.K, pvec, code,
                                    largs, method, h, cfg)
            events.append(Event(t_ev, "K_crossing"))
            watch &= ~kernels.WATCH_K
        if (watch & kernels.WATCH_EXTINCTION) and E_prev > EXTINCTION_LEVEL >= E_new:
            t_ev, y_ev = _bisect_event(kern, out[idx - 1], grid[idx - 1], grid[idx], EXTINCTION_LEVEL, pvec,
                                       code, largs, method, h, cfg)
            events.append(Event(t_ev, "extinction"))
            watch &= ~kernels.WATCH_EXTINCTION
            if cfg.stop_on_extinction:
                if t_ev < grid[idx]:
                    stop_index = idx - 1
                    stop_state = (t_ev, y_ev)
                else:
                    stop_index = idx
                break
        start = idx
        y = out[idx].copy()

    if stop_index is None:
        times, states = grid, out
        events.append(Event(float(grid[-1]), "t_max_reached"))
    else:
        times, states = grid[: stop_index + 1], out[: stop_index + 1]
        if stop_state is not None:
            times = np.append(times, stop_state[0])
            states = np.vstack([states, stop_state[1]])
    states = np.ascontiguousarray(states)
    events.sort(key=lambda ev: (ev.time, EVENT_KINDS.index(ev.kind)))
    return Trajectory(
        times=np.array(times, dtype=float),
        states=states,
        controls=evaluate_control_batch(law, params, states),
        events=events,
        max_clamp=max_clamp,
        steps=nsteps,
    )


def _bisect_event(kern, y_lo, t_lo, t_hi, level, pvec, code, largs, method, h, cfg):
    """Locate the first time ``E`` falls to ``level`` inside ``(t_lo, t_hi]`` by re-stepping."""
    y_lo = np.array(y_lo, dtype=float)
    y_hi = None
    buf = np.zeros((2, 5))
    while t_hi - t_lo > EVENT_TOL:
        t_mid = 0.5 * (t_lo + t_hi)
        _, status, _, _, t_fail, _ = kern.advance_grid(
            y_lo, np.array([t_lo, t_mid]), buf, 0, pvec, code, largs, method, h, cfg.rel_tol, cfg.abs_tol, 0
        )
        if status != kernels.OK:
            raise IntegrationError("integration failed while locating an event", t_fail, "event_location")
        if buf[1, 0] <= level:
            t_hi, y_hi = t_mid, buf[1].copy()
        else:
            t_lo, y_lo = t_mid, buf[1].copy()
    if y_hi is None:
        _, status, _, _, t_fail, _ = kern.advance_grid(
            y_lo, np.array([t_lo, t_hi]), buf, 0, pvec, code, largs, method, h, cfg.rel_tol, cfg.abs_tol, 0
        )
        y_hi = buf[1].copy()
    return float(t_hi), y_hi


@dataclass(frozen=True)
class OrderEstimate:
    order: float
    error_ratio: float
    differences: tuple[float, float]


def richardson_order(solve: Callable[[float], np.ndarray], base_dt: float) -> OrderEstimate:
    """Observed order from solutions at ``dt``, ``dt/2`` and ``dt/4``."""
    y1, y2, y4 = (np.asarray(solve(base_dt / k), dtype=float) for k in (1, 2, 4))
    d1 = float(np.linalg.norm(y1 - y2))
    d2 = float(np.linalg.norm(y2 - y4))
    ratio = d1 / d2
    return OrderEstimate(order=math.log2(ratio), error_ratio=ratio, differences=(d1, d2))


def rk4_fixed(f: Callable[[float, np.ndarray], np.ndarray], y0, t_end: float, dt: float) -> np.ndarray:
    """Classical RK4 for an arbitrary right-hand side (test problems)."""
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    h = t_end / n
    y = np.asarray(y0, dtype=float)
    t = 0.0
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def convergence_order_check(params: ModelParams, law: ControlLaw, x0, base_dt: float,
                            horizon: float = 1.0, backend: str | None = None) -> OrderEstimate:
    """Observed order of the fixed-step RK4 kernel on the closed loop over ``horizon`` days."""

    def solve(dt):
        cfg = IntegratorConfig(method="rk4", dt_init=dt, t_max=horizon, record_stride=horizon)
        return integrate(params, law, x0, cfg, backend=backend).states[-1]

    return richardson_order(solve, base_dt)


def dense_component(traj: Trajectory, params: ModelParams, law: ControlLaw,
                    component: str = "E") -> Callable[[float], float]:
    """Cubic Hermite interpolant of one component between recorded samples.

    Slopes come from the vector field at each sample, so the interpolant is
    fourth-order accurate in the sample spacing.
    """
    j = STATE_KEYS.index(component)
    t = traj.times
    y = traj.states[:, j]
    dy = vector_field_batch(params, traj.states, evaluate_control_batch(law, params, traj.states))[:, j]
    tl = t.tolist()

    def interp(s: float) -> float:
        i = min(max(bisect.bisect_right(tl, s) - 1, 0), len(tl) - 2)
        h = tl[i + 1] - tl[i]
        x = (s - tl[i]) / h
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        return float(h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1])

    return interp


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, x, u in zip(traj.times.tolist(), traj.states.tolist(), traj.controls.tolist()):
            w.writerow([repr(t)] + [repr(v) for v in x] + [repr(u)])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(CSV_HEADER))
    return data[:, 0].copy(), np.ascontiguousarray(data[:, 1:6]), data[:, 6].copy()


def events_to_list(events: Sequence[Event]) -> list[dict]:
    return [{"time": ev.time, "kind": ev.kind} for ev in events]


def write_sidecar(traj: Trajectory, path, config: dict) -> None:
    payload = {
        "config": config,
        "events": events_to_list(traj.events),
        "max_clamp": traj.max_clamp,
        "samples": len(traj),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_trajectory(csv_path, sidecar_path) -> tuple[Trajectory, dict]:
    times, states, controls = read_trajectory_csv(csv_path)
    meta = json.loads(Path(sidecar_path).read_text())
    events = [Event(float(e["time"]), e["kind"]) for e in meta.get("events", [])]
    traj = Trajectory(times, states, controls, events, max_clamp=float(meta.get("max_clamp", 0.0)))
    return traj, meta["config"]
