import json

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from ppqme import cli as cli_module
from ppqme import validation
from ppqme.cli import cli


def write_config(path, weighting=None, bath=None, t_max=20.0):
    data = {
        "system": {"energies_cm1": [0.0, 0.0], "couplings": [[1, 2, 300.0]]},
        "bath": bath or {"eta": 1.0, "omega_c_cm1": 200.0},
        "weighting": weighting or {"kind": "step", "omega_h_cm1": 200.0},
        "run": {"dt_fs": 0.5, "t_max_fs": t_max, "stride": 4},
    }
    path.write_text(yaml.safe_dump(data))
    return str(path)


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def test_simulate_writes_trajectory_and_sidecar(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml")
    result = runner.invoke(cli, ["simulate", "--config", config, "--out", str(tmp_path / "a")])
    assert result.exit_code == 0, result.stderr
    assert "coherence_metric=" in result.stdout

    frame = pd.read_csv(tmp_path / "a" / "trajectory.csv")
    assert list(frame.columns[:3]) == ["t_fs", "P_1", "P_2"]
    assert len(frame) == 11
    assert frame["P_1"].iloc[0] == pytest.approx(1.0)

    sidecar = json.loads((tmp_path / "a" / "trajectory.json").read_text())
    assert sidecar["config"]["weighting"]["omega_h_cm1"] == 200.0
    assert sidecar["diagnostics"]["max_trace_drift"] < 1e-8
    assert 0 < sidecar["frame"]["debye_waller"][0][1] < 1
    assert "mixing_angle" in sidecar["frame"]

    again = runner.invoke(cli, ["simulate", "--config", config, "--out", str(tmp_path / "b")])
    assert again.exit_code == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_simulate_config_error_exit_code(runner, tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"system": {"energies_cm1": [0.0, 0.0]}, "run": {"t_max_fs": 10.0}}))
    result = runner.invoke(cli, ["simulate", "--config", str(path), "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "run.dt_fs" in result.stderr


def test_simulate_divergent_weighting_exit_code(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml", weighting={"kind": "unity"})
    result = runner.invoke(cli, ["simulate", "--config", config, "--out", str(tmp_path)])
    assert result.exit_code == 3
    assert "collapses" in result.stderr


def test_small_alpha_needs_flag(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml", weighting={"kind": "smooth", "omega_h_cm1": 200.0, "alpha": 1.0})
    result = runner.invoke(cli, ["simulate", "--config", config, "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "weighting.alpha" in result.stderr


def test_dump_correlations_zero_weighting(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml", weighting={"kind": "zero"}, t_max=10.0)
    result = runner.invoke(cli, ["dump-correlations", "--config", config, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.stderr
    frame = pd.read_csv(tmp_path / "correlations.csv")
    assert len(frame) == 41
    assert (frame["re_K"] == 0).all() and (frame["re_M"] == 0).all() and (frame["h"] == 0).all()
    assert (frame["re_f"] == 1).all() and (frame["im_f"] == 0).all()
    assert frame["re_C"].iloc[0] > 0
    sidecar = json.loads((tmp_path / "correlations.json").read_text())
    assert sidecar["debye_waller"][0][1] == 1.0


def test_dump_correlations_step_weighting(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml", t_max=10.0)
    result = runner.invoke(cli, ["dump-correlations", "--config", config, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.stderr
    frame = pd.read_csv(tmp_path / "correlations.csv")
    assert (frame["re_M"] == 0).all() and (frame["h"] == 0).all()
    assert frame["re_K"].iloc[0] > 0
    assert frame["im_K"].iloc[0] == 0


def test_sweep_empty_values(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml")
    args = ["sweep", "--config", config, "--param", "omega_h", "--values", "", "--out", str(tmp_path)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0
    assert not list(tmp_path.glob("sweep_*.csv"))


def test_sweep_writes_summary(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml")
    out = tmp_path / "sweep"
    args = ["sweep", "--config", config, "--param", "omega_h", "--values", "0.5,2", "--out", str(out), "--workers", "2"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.stderr
    summary = pd.read_csv(out / "sweep_omega_h.csv")
    assert list(summary["value"]) == [0.5, 2.0]
    assert list(summary["status"]) == ["ok", "ok"]
    assert (out / "omega_h_0.5.csv").exists() and (out / "omega_h_2.json").exists()


def test_sweep_rejects_bad_values(runner, tmp_path):
    config = write_config(tmp_path / "run.yaml")
    result = runner.invoke(cli, ["sweep", "--config", config, "--param", "alpha", "--values", "two"])
    assert result.exit_code == 2


def test_sweep_records_unexpected_failure(runner, tmp_path, monkeypatch):
    config = write_config(tmp_path / "run.yaml")
    out = tmp_path / "sweep"
    run_simulation = cli_module.run_simulation

    def flaky(point, *args, **kwargs):
        if point.weighting.omega_h_cm1 > 300.0:
            raise RuntimeError("solver exploded")
        return run_simulation(point, *args, **kwargs)

    monkeypatch.setattr(cli_module, "run_simulation", flaky)
    args = ["sweep", "--config", config, "--param", "omega_h", "--values", "0.5,2", "--out", str(out)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 1
    assert "solver exploded" in result.stderr
    summary = pd.read_csv(out / "sweep_omega_h.csv")
    assert list(summary["value"]) == [0.5, 2.0]
    assert summary["status"][0] == "ok"
    assert summary["status"][1].startswith("error[1]: RuntimeError: solver exploded")
    assert (out / "omega_h_0.5.csv").exists()


def test_validate_reports_corrupted_debye_waller(runner, monkeypatch):
    monkeypatch.setattr(validation, "CHECKS", (validation.check_w_consistency,))
    clean = runner.invoke(cli, ["validate"])
    assert clean.exit_code == 0, clean.stdout
    corrupted = runner.invoke(cli, ["validate", "--corrupt-w"])
    assert corrupted.exit_code == 4
    assert "FAIL" in corrupted.stdout


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.stdout


@pytest.mark.slow
def test_validate_full_suite(runner):
    result = runner.invoke(cli, ["validate"])
    assert result.exit_code == 0, result.stdout
