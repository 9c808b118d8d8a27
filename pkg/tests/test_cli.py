import csv
import io
import json
import subprocess

import pytest

from congestion_lab.cli import main
from congestion_lab.sim import EventLog, read_trace_csv


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_analytic(capsys):
    assert main(["analytic", "--scenario", "mm1", "--p", "1", "--param", "K=2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["gradient"]["weighted_direct"] == pytest.approx(-16 / 49)
    assert out["sigma2"]["wde"] == pytest.approx(88 / 343)
    assert main(["analytic", "--scenario", "conformity", "--p", "1", "--numeric"]) == 0


@pytest.mark.parametrize("argv", [
    ["analytic", "--scenario", "mg1", "--p", "1"],
    ["analytic", "--scenario", "mm1", "--p", "2.5"],
    ["analytic", "--scenario", "mm1", "--p", "1", "--param", "K"],
    ["mc", "--config", "missing.json"],
    ["trace", "--build", "city", "--weeks", "4"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "config error" in capsys.readouterr().err


def test_simulate_then_estimate(tmp_path, capsys):
    cfg = write_json(tmp_path / "sim.json", {"scenario": "mm1", "design": {"kind": "user", "p": 1.0, "zeta": 0.1},
                                             "horizon_T": 3000.0, "seed": 4, "output": str(tmp_path / "log.csv")})
    assert main(["simulate", "--config", cfg]) == 0
    log = EventLog.read(tmp_path / "log.csv")
    assert log.horizon == 3000.0 and log.initial_label is None
    out = tmp_path / "est.csv"
    assert main(["estimate", "--log", str(tmp_path / "log.csv"), "--out", str(out), "--kernel", "1000"]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["estimator", "value", "sigma2_hat", "ci_low", "ci_high", "skipped_states"]
    assert [r["estimator"] for r in rows] == ["ur", "ur_s=1000"]
    assert float(rows[0]["ci_low"]) < float(rows[0]["value"]) < float(rows[0]["ci_high"])


def test_estimate_data_errors_exit_3(tmp_path, capsys):
    assert main(["estimate", "--log", str(tmp_path / "nope.csv")]) == 3
    cfg = write_json(tmp_path / "sim.json", {"scenario": "mm1", "design": {"kind": "fixed", "p": 1.0},
                                             "horizon_T": 100.0, "seed": 1})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "f.csv")]) == 0
    capsys.readouterr()
    assert main(["estimate", "--log", str(tmp_path / "f.csv")]) == 3
    assert "EmptyArm" not in capsys.readouterr().out


def test_mc_and_trace_and_gallery(tmp_path, capsys):
    cfg = write_json(tmp_path / "mc.json", {"scenario": "mm1", "design": {"kind": "regenerative", "p": 1.0},
                                            "horizon_T": 1000.0, "zeta": 0.1, "replications": 3,
                                            "output": str(tmp_path / "mc.csv")})
    assert main(["mc", "--config", cfg, "--workers", "2"]) == 0
    assert (tmp_path / "mc.csv").exists() and (tmp_path / "mc_summary.csv").exists()
    assert main(["trace", "--build", "ed", "--weeks", "4", "--out", str(tmp_path / "t.csv")]) == 0
    assert read_trace_csv(tmp_path / "t.csv").shape == (28, 48)
    assert main(["gallery", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "scenario_gallery.csv").exists()


def test_console_script_exit_code(tmp_path):
    done = subprocess.run(["congestion-lab", "analytic", "--scenario", "nope", "--p", "1"], capture_output=True)
    assert done.returncode == 2
    done = subprocess.run(["congestion-lab", "estimate", "--log", str(tmp_path / "x.csv")], capture_output=True)
    assert done.returncode == 3
