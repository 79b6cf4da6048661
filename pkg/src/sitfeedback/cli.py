"""Command-line front end: ``simulate``, ``sweep``, ``analyze`` and ``params``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import stability_report
from .config import (
    PRESETS,
    ConfigError,
    RunConfig,
    apply_override,
    load_config,
    load_params,
    parse_scalar,
    preset,
)
from .control import law_diagnostics
from .integrator import IntegrationError, integrate, load_trajectory, write_sidecar, write_trajectory_csv
from .model import ParameterError, derived_quantities, exact_R, gain_threshold

EXIT_OK, EXIT_USAGE, EXIT_INTEGRATION, EXIT_MISMATCH = 0, 2, 3, 4
SWEEP_CAP = 10000
GAIN_PATHS = ("law.psi", "law.sigma")

TRAJECTORY_CSV = "trajectory.csv"
SIDECAR_JSON = "trajectory.json"
REPORT_JSON = "report.json"


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------- config assembly


def _add_run_options(ap: argparse.ArgumentParser, with_output=True) -> None:
    g = ap.add_argument_group("run configuration (flags override the config file)")
    g.add_argument("--config", help="TOML run configuration")
    g.add_argument("--preset", choices=PRESETS, help="reference configuration")
    g.add_argument("--law", choices=("zero", "constant", "emms", "em"))
    g.add_argument("--psi", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--rate", type=float)
    g.add_argument("--x0", help="'persistence' or five comma-separated densities E,F,M,Fs,Ms")
    g.add_argument("--method", choices=("rk45", "rk4"))
    g.add_argument("--t-max", type=float)
    g.add_argument("--dt", type=float, help="initial (rk45) or fixed (rk4) step, days")
    g.add_argument("--rtol", type=float)
    g.add_argument("--atol", type=float)
    g.add_argument("--stride", type=float, help="recording interval, days")
    g.add_argument("--stop-on-extinction", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config entry, e.g. params.gamma=0.5")
    if with_output:
        g.add_argument("--out", help="output directory")


def _law_flag_dict(args) -> dict:
    return {k: getattr(args, k) for k in ("psi", "alpha", "sigma", "rate") if getattr(args, k, None) is not None}


def build_config(args) -> RunConfig:
    if args.config and args.preset:
        raise UsageError("--config and --preset are mutually exclusive")
    if args.config:
        base = load_config(args.config)
    elif args.preset:
        base = preset(args.preset)
    else:
        base = RunConfig()
    data = base.to_dict()
    if args.law is not None:
        data["law"] = {"law": args.law}
    data["law"].update(_law_flag_dict(args))
    if args.x0 is not None:
        if args.x0 == "persistence":
            data["x0"] = {"preset": "persistence"}
        else:
            parts = args.x0.split(",")
            if len(parts) != 5:
                raise ConfigError("expected 'persistence' or five comma-separated values", "x0")
            try:
                data["x0"] = dict(zip(("E", "F", "M", "Fs", "Ms"), (float(v) for v in parts)))
            except ValueError:
                raise ConfigError(f"non-numeric component in {args.x0!r}", "x0") from None
    integ = data["integrator"]
    for flag, key in (("method", "method"), ("t_max", "t_max"), ("dt", "dt_init"), ("rtol", "rel_tol"),
                      ("atol", "abs_tol"), ("stride", "record_stride"),
                      ("stop_on_extinction", "stop_on_extinction")):
        v = getattr(args, flag, None)
        if v is not None:
            integ[key] = v
    if getattr(args, "out", None):
        data["output"]["directory"] = args.out
    for item in args.set:
        path, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"expected SECTION.KEY=VALUE, got {item!r}", "--set")
        data = apply_override(data, path.strip(), parse_scalar(value))
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------- simulate


def run_simulation(cfg: RunConfig, backend=None):
    traj = integrate(cfg.params, cfg.law, cfg.initial_state(), cfg.integrator, backend=backend)
    report = stability_report(traj, cfg.params, cfg.law)
    return traj, report


def write_run(cfg: RunConfig, traj, report, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out / TRAJECTORY_CSV)
    write_sidecar(traj, out / SIDECAR_JSON, cfg.to_dict())
    (out / REPORT_JSON).write_text(_dump(report.to_dict()))


def cmd_simulate(args) -> int:
    cfg = build_config(args)
    try:
        traj, report = run_simulation(cfg)
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    write_run(cfg, traj, report, cfg.output_dir)
    print(report.summary())
    print(f"wrote {cfg.output_dir}/{{{TRAJECTORY_CSV},{SIDECAR_JSON},{REPORT_JSON}}}")
    return EXIT_OK


# ---------------------------------------------------------------- sweep


def _parse_axis(text: str) -> tuple[str, list]:
    path, sep, values = text.partition("=")
    if not sep or not values.strip():
        raise ConfigError(f"expected PATH=v1,v2,..., got {text!r}", "--axis")
    return path.strip(), [parse_scalar(v) for v in values.split(",")]


def sweep_point(base: dict, coords: tuple, paths: list[str], relative: bool) -> dict:
    data = base
    for path, value in zip(paths, coords):
        if path not in GAIN_PATHS or not relative:
            data = apply_override(data, path, value)
    cfg = RunConfig.from_dict(data)
    if relative:
        thr = gain_threshold(cfg.params)
        for path, value in zip(paths, coords):
            if path in GAIN_PATHS:
                data = apply_override(data, path, float(value) * thr)
        cfg = RunConfig.from_dict(data)
    row = {p: v for p, v in zip(paths, coords)}
    law = cfg.law
    gain = getattr(law, "gain", None)
    row.update(gain=gain, threshold=gain_threshold(cfg.params))
    try:
        row["stabilizing_predicted"] = law_diagnostics(law, cfg.params).stabilizing if gain is not None else None
    except ParameterError:
        row["stabilizing_predicted"] = None
    try:
        traj, report = run_simulation(cfg)
    except IntegrationError as exc:
        row.update(status=f"integration_failure@{exc.time!r}", extinction_reached=None, extinction_time=None,
                   fitted_rate=None, c_e_or_c_b=None)
        return row
    row.update(status="ok", extinction_reached=report.extinction_time is not None,
               extinction_time=report.extinction_time, fitted_rate=report.fitted_rate,
               c_e_or_c_b=report.c_e_or_c_b)
    return row


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _sort_key(coords):
    return tuple((0, v, "") if isinstance(v, float) else (1, 0.0, str(v)) for v in coords)


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    axes = [_parse_axis(a) for a in args.axis]
    if not axes:
        return cmd_simulate(args)
    paths = [p for p, _ in axes]
    if len(set(paths)) != len(paths):
        raise ConfigError("each path may appear on one axis only", "--axis")
    size = 1
    for _, vals in axes:
        size *= len(vals)
    if size > args.max_runs:
        raise UsageError(f"sweep has {size} grid points, above the cap of {args.max_runs}")
    base = cfg.to_dict()
    grid = sorted(itertools.product(*(vals for _, vals in axes)), key=_sort_key)
    # validate every point before launching runs
    for coords in grid:
        d = base
        for path, value in zip(paths, coords):
            d = apply_override(d, path, value)
        RunConfig.from_dict(d)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(sweep_point, itertools.repeat(base), grid, itertools.repeat(paths),
                                 itertools.repeat(args.relative)))
    else:
        rows = [sweep_point(base, coords, paths, args.relative) for coords in grid]
    columns = paths + ["gain", "threshold", "stabilizing_predicted", "extinction_reached", "extinction_time",
                       "fitted_rate", "c_e_or_c_b", "status"]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_csv_cell(row[c]) for c in columns])
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_csv_cell(row[c]) for c in columns])
    return EXIT_OK


# ---------------------------------------------------------------- analyze


def _mismatches(recorded: RunConfig, args) -> list[str]:
    problems = []
    if args.law is not None and args.law != recorded.law.kind:
        problems.append(f"law: recorded {recorded.law.kind!r}, flag {args.law!r}")
    rec_law = recorded.law.to_dict()
    for k, v in _law_flag_dict(args).items():
        if k not in rec_law:
            problems.append(f"law.{k}: not part of recorded law {recorded.law.kind!r}")
        elif float(v) != rec_law[k]:
            problems.append(f"law.{k}: recorded {rec_law[k]!r}, flag {v!r}")
    if args.params is not None:
        p = load_params(args.params).as_dict()
        rec = recorded.params.as_dict()
        for k in sorted(p):
            if p[k] != rec[k]:
                problems.append(f"params.{k}: recorded {rec[k]!r}, file {p[k]!r}")
    return problems


def cmd_analyze(args) -> int:
    run = Path(args.run)
    traj, cfg_dict = load_trajectory(run / TRAJECTORY_CSV, run / SIDECAR_JSON)
    recorded = RunConfig.from_dict(cfg_dict)
    problems = _mismatches(recorded, args)
    if problems:
        print("refusing to analyze: flags disagree with the recorded configuration", file=sys.stderr)
        for line in problems:
            print(f"  {line}", file=sys.stderr)
        return EXIT_MISMATCH
    report = stability_report(traj, recorded.params, recorded.law)
    text = _dump(report.to_dict())
    if args.out:
        Path(args.out).write_text(text)
        print(report.summary())
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- params


def cmd_params(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = RunConfig()
    data = cfg.to_dict()
    for item in args.set:
        path, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"expected SECTION.KEY=VALUE, got {item!r}", "--set")
        data = apply_override(data, path.strip(), parse_scalar(value))
    cfg = RunConfig.from_dict(data)
    p = cfg.params
    dq = derived_quantities(p)
    thr = gain_threshold(p)
    payload = {
        "params": p.as_dict(),
        "R": dq.R,
        "R_exact": str(exact_R(p)),
        "E_star": dq.E_star,
        "X_E_star": list(dq.X_E_star),
        "delta_hat": dq.delta_hat,
        "gain_threshold": thr,
        "uniqueness_threshold": thr - p.delta_hat / p.delta_M,
    }
    if cfg.law.kind in ("emms", "em"):
        payload["law"] = cfg.law.to_dict()
        payload["diagnostics"] = law_diagnostics(cfg.law, p).to_dict()
    sys.stdout.write(_dump(payload))
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sitfeedback", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="integrate one closed-loop run and write trajectory + report")
    _add_run_options(sp)
    sp.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="grid of runs over config entries")
    _add_run_options(sw)
    sw.add_argument("--axis", action="append", default=[], metavar="PATH=v1,v2,...")
    sw.add_argument("--relative", action="store_true",
                    help="read law.psi / law.sigma axis values as multiples of (R - 1)/gamma")
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--max-runs", type=int, default=SWEEP_CAP)
    sw.set_defaults(func=cmd_sweep)

    an = sub.add_parser("analyze", help="recompute the stability report of a stored run")
    an.add_argument("run", help="directory written by simulate")
    an.add_argument("--law", choices=("zero", "constant", "emms", "em"))
    an.add_argument("--psi", type=float)
    an.add_argument("--alpha", type=float)
    an.add_argument("--sigma", type=float)
    an.add_argument("--rate", type=float)
    an.add_argument("--params", help="parameter file expected to match the recorded run")
    an.add_argument("--out", help="write the JSON report here instead of standard output")
    an.set_defaults(func=cmd_analyze)

    pa = sub.add_parser("params", help="print derived quantities")
    pa.add_argument("--config")
    pa.add_argument("--preset", choices=PRESETS)
    pa.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    pa.set_defaults(func=cmd_params)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
