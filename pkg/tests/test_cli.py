import csv
import json
import subprocess
import sys

import pytest

from sitfeedback.cli import EXIT_INTEGRATION, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main
from sitfeedback.config import (
    ConfigError,
    RunConfig,
    apply_override,
    load_config,
    parse_scalar,
    preset,
    to_toml,
)
from sitfeedback.control import EM, EMMs
from sitfeedback.model import ModelParams, SitState

SHORT = ["--t-max", "200"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_presets():
    p1, p2 = preset("fig1"), preset("fig2")
    assert p1.law == EMMs(psi=122.5)
    assert p2.law.sigma == 122.5 and p2.law.alpha == pytest.approx(4.9)
    assert p1.x0 == "persistence" and p1.integrator.t_max == 12000.0
    with pytest.raises(ConfigError):
        preset("fig3")


def test_config_round_trip(tmp_path):
    cfg = RunConfig(ModelParams(gamma=0.5), EM(alpha=3.0, sigma=90.0), SitState(1.0, 2.0, 3.0, 4.0, 5.0))
    path = tmp_path / "run.toml"
    path.write_text(to_toml(cfg.to_dict()))
    assert load_config(path) == cfg


def test_config_errors_name_the_key(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('[params]\nnu = 1.5\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.key == "params"
    path.write_text('[law]\nlaw = "emms"\n')
    with pytest.raises(ConfigError, match="psi"):
        load_config(path)
    path.write_text('[x0]\npreset = "persistence"\n[params]\nbeta_E = 0.1\n')
    with pytest.raises(ConfigError, match="R > 1"):
        load_config(path)


def test_overrides():
    data = preset("fig1").to_dict()
    d = apply_override(data, "params.gamma", 0.5)
    assert d["params"]["gamma"] == 0.5 and data["params"]["gamma"] == 1.0
    d = apply_override(data, "x0.Ms", 10.0)
    x0 = RunConfig.from_dict(d).initial_state()
    assert x0.Ms == 10.0 and x0.E == pytest.approx(49183.67, rel=1e-6)
    with pytest.raises(ConfigError):
        apply_override(data, "gamma", 0.5)
    assert parse_scalar("true") is True and parse_scalar("2.5") == 2.5 and parse_scalar('"em"') == "em"


def test_simulate_writes_outputs(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["simulate", "--preset", "fig1", "--out", "run", *SHORT]) == EXIT_OK
    rows = read_csv(tmp_path / "run" / "trajectory.csv")
    assert list(rows[0]) == ["t", "E", "F", "M", "Fs", "Ms", "u"]
    assert len(rows) == 201
    side = json.loads((tmp_path / "run" / "trajectory.json").read_text())
    assert side["config"]["law"] == {"law": "emms", "psi": 122.5}
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["dominance_time"] == pytest.approx(6125.0)
    assert "dominance" in capsys.readouterr().out


def test_zero_law_stays_at_persistence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["simulate", "--law", "zero", "--x0", "persistence", "--t-max", "2000", "--out", "z"]) == EXIT_OK
    rows = read_csv(tmp_path / "z" / "trajectory.csv")
    E0 = float(rows[0]["E"])
    assert all(abs(float(r["E"]) - E0) / E0 < 1e-3 for r in rows)


def test_analyze_reproduces_report(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    main(["simulate", "--preset", "fig2", "--out", "run", *SHORT])
    capsys.readouterr()
    assert main(["analyze", "run"]) == EXIT_OK
    assert capsys.readouterr().out == (tmp_path / "run" / "report.json").read_text()
    assert main(["analyze", "run", "--out", "again.json"]) == EXIT_OK
    assert (tmp_path / "again.json").read_text() == (tmp_path / "run" / "report.json").read_text()


def test_analyze_mismatch(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    main(["simulate", "--preset", "fig1", "--out", "run", *SHORT])
    assert main(["analyze", "run", "--psi", "100"]) == EXIT_MISMATCH
    assert main(["analyze", "run", "--law", "em"]) == EXIT_MISMATCH
    (tmp_path / "p.toml").write_text("gamma = 0.5\n")
    assert main(["analyze", "run", "--params", "p.toml"]) == EXIT_MISMATCH
    assert main(["analyze", "run", "--psi", "122.5"]) == EXIT_OK


@pytest.mark.parametrize("argv", [
    ["simulate", "--law", "emms"],
    ["simulate", "--set", "params.nu=1.5"],
    ["simulate", "--x0", "1,2,3"],
    ["simulate", "--config", "missing.toml"],
    ["simulate", "--preset", "fig1", "--config", "x.toml"],
    ["sweep", "--axis", "law.psi=1,2", "--axis", "params.gamma=0.1,0.2", "--max-runs", "3", "--preset", "fig1"],
])
def test_usage_errors(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_integration_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    argv = ["simulate", "--law", "zero", "--x0", "0,10000,0,0,0", "--method", "rk4", "--dt", "10",
            "--stride", "10", "--t-max", "100", "--out", "bad"]
    assert main(argv) == EXIT_INTEGRATION


def test_sweep_relative_gain(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    argv = ["sweep", "--preset", "fig1", "--t-max", "1500", "--stride", "5", "--out", "sw",
            "--relative", "--axis", "law.psi=2.0,0.5"]
    assert main(argv) == EXIT_OK
    rows = read_csv(tmp_path / "sw" / "sweep.csv")
    assert [r["law.psi"] for r in rows] == ["0.5", "2.0"]
    assert [r["stabilizing_predicted"] for r in rows] == ["false", "true"]
    assert float(rows[1]["gain"]) == pytest.approx(2 * 60.25)
    assert rows[0]["extinction_reached"] == "false" and rows[1]["extinction_reached"] == "true"
    assert capsys.readouterr().out.splitlines()[0].startswith("law.psi,gain,threshold")


def test_sweep_gamma_moves_threshold(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    argv = ["sweep", "--preset", "fig1", "--t-max", "50", "--out", "g", "--axis", "params.gamma=1.0,0.5,0.25",
            "--jobs", "2"]
    assert main(argv) == EXIT_OK
    rows = read_csv(tmp_path / "g" / "sweep.csv")
    thr = {r["params.gamma"]: float(r["threshold"]) for r in rows}
    assert thr == pytest.approx({"0.25": 241.0, "0.5": 120.5, "1.0": 60.25})


def test_sweep_without_axes_matches_simulate(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    main(["simulate", "--preset", "fig2", "--out", "a", *SHORT])
    main(["sweep", "--preset", "fig2", "--out", "b", *SHORT])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_params_command(capsys):
    assert main(["params"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["R_exact"] == "245/4"
    assert out["E_star"] == pytest.approx(49183.67346938776, rel=1e-12)
    assert main(["params", "--preset", "fig2"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["diagnostics"]["stabilizing"] is True


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sitfeedback", "params"], capture_output=True, text=True)
    assert res.returncode == 0 and '"R_exact": "245/4"' in res.stdout
