import csv
import io
import json
import math

import numpy as np
import pytest

from congestion_lab.errors import ConfigError, InvalidDesign
from congestion_lab.harness import (
    GALLERY_PANELS, ExperimentConfig, aggregate, default_workers, nonstationary_checks, run_mc,
    run_nonstationary_study, run_scenario_gallery, zeta_rule,
)
from congestion_lab.model import rate_matrix, scenario_preset, stationary_oracle
from congestion_lab.gradient import policy_gradient

SMALL = {"scenario": "mm1", "design": {"kind": "regenerative", "p": 1.0}, "horizon_T": 2000.0, "zeta": 0.1,
         "replications": 12, "master_seed": 5, "kernel_lengths": [500.0, 2000.0]}


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_zeta_rule_and_config_validation():
    assert zeta_rule(1e4) == pytest.approx(0.5 * 1e4 ** -0.3)
    cfg = ExperimentConfig(horizon_T=1e4)
    assert cfg.effective_zeta == zeta_rule(1e4)
    assert ExperimentConfig(zeta=0.05).effective_zeta == 0.05
    for bad in ({"replications": 0}, {"replications": 2.5}, {"zeta_gamma": 0.25}, {"zeta_gamma": 0.6},
                {"zeta": 0.0}, {"horizon_T": -1.0}, {"alpha": 1.0}, {"kernel_lengths": [0.0]},
                {"colour": "red"}):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(bad)


def test_config_load(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(SMALL))
    assert ExperimentConfig.load(path).kernel_lengths == [500.0, 2000.0]
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CONGESTION_LAB_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("CONGESTION_LAB_THREADS", "many")
    with pytest.raises(ConfigError):
        default_workers()


def test_fixed_price_reports_empty_arm_rows():
    r = run_mc({"scenario": "mm1", "design": {"kind": "fixed", "p": 1.0}, "horizon_T": 100.0,
                "replications": 1}, workers=1)
    assert [(row["estimator"], row["error"]) for row in r.rows] == [
        ("model_free", "EmptyArm"), ("idle_time", "EmptyArm"), ("wde", "EmptyArm")]
    assert all(a["n_ok"] == 0 and a["n_failed"] == 1 for a in r.aggregates)


def test_invalid_design_propagates():
    with pytest.raises(InvalidDesign):
        run_mc({**SMALL, "design": {"kind": "user", "p": 1.98}}, workers=1)


def test_rows_and_aggregates(tmp_path):
    r = run_mc(SMALL, workers=2, output=tmp_path / "mc.csv")
    names = ["model_free", "idle_time", "wde", "wde_s=500", "wde_s=2000"]
    assert [row["estimator"] for row in r.rows[:5]] == names
    assert [row["replicate"] for row in r.rows] == sorted(row["replicate"] for row in r.rows)
    assert r.truth == policy_gradient(scenario_preset("mm1"), 1.0).value
    rows = parse((tmp_path / "mc.csv").read_text())
    assert len(rows) == 12 * 5
    # recompute the aggregates from the written per-replicate rows
    typed = [{"estimator": x["estimator"], "estimate": float(x["estimate"]) if x["estimate"] else None,
              "covered": int(x["covered"]) if x["covered"] else None} for x in rows]
    again = aggregate(typed, r.truth, 2000.0, 0.1)
    written = parse((tmp_path / "mc_summary.csv").read_text())
    for a, w in zip(again, written):
        assert a["estimator"] == w["estimator"]
        for key in ("mean", "bias", "variance", "mse", "scaled_mse"):
            assert repr(a[key]) == w[key]
        if "coverage" in a:
            assert repr(a["coverage"]) == w["coverage"]
    meta = json.loads((tmp_path / "mc_meta.json").read_text())
    assert meta["config"]["replications"] == 12 and meta["truth"] == r.truth
    assert r.aggregate("wde")["scaled_mse"] == pytest.approx(2000.0 * 0.01 * r.aggregate("wde")["mse"])


def test_byte_identical_across_workers(tmp_path):
    texts = []
    for w in (1, 4, 16):
        out = tmp_path / f"w{w}.csv"
        run_mc({**SMALL, "design": {"kind": "user", "p": 1.0}}, workers=w, output=out)
        texts.append((out.read_bytes(), (tmp_path / f"w{w}_summary.csv").read_bytes()))
    assert texts[0] == texts[1] == texts[2]


def test_mc_standard_error_scales_with_root_R():
    base = {"scenario": "mm1", "design": {"kind": "user", "p": 1.0}, "horizon_T": 1000.0, "zeta": 0.1,
            "master_seed": 9}
    a = run_mc({**base, "replications": 300}, workers=1).aggregate("ur")["mc_se"]
    b = run_mc({**base, "replications": 600}, workers=1).aggregate("ur")["mc_se"]
    assert a / b == pytest.approx(math.sqrt(2), rel=0.2)


def test_piecewise_trace_config():
    cfg = {**SMALL, "scenario": None, "trace": {"kind": "piecewise", "breakpoints": [0, 0.5, 1],
           "regimes": [{"scenario": "mm1"}, {"scenario": "zero_modified"}]}, "replications": 2}
    r = run_mc(cfg, workers=1)
    want = 0.5 * (policy_gradient(scenario_preset("mm1"), 1.0).value
                  + policy_gradient(scenario_preset("zero_modified"), 1.0).value)
    assert r.truth == pytest.approx(want, abs=1e-14)
    with pytest.raises(ConfigError):
        run_mc({**cfg, "trace": {"kind": "weather"}}, workers=1)


def gallery_table(rows):
    curves, bars = {}, {}
    for r in rows:
        if isinstance(r["k_or_estimator"], str):
            curves.setdefault((r["scenario"], r["parameter"]), {})[r["k_or_estimator"]] = r["value"]
        else:
            bars.setdefault(r["scenario"], {})[r["k_or_estimator"]] = r["value"]
    return curves, bars


def test_scenario_gallery(tmp_path):
    rows = run_scenario_gallery(tmp_path)
    header = (tmp_path / "scenario_gallery.csv").read_text().splitlines()[0]
    assert header == "scenario,parameter,k_or_estimator,value"
    curves, bars = gallery_table(rows)
    assert set(bars) == set(GALLERY_PANELS)
    for (name, _), c in curves.items():
        assert c["idle_time"] == 2 * c["wde"]
        assert c["wde"] <= c["model_free"] + 1e-12
        if name == "mm1":
            assert abs(c["model_free"] - c["wde"]) < 1e-6
    for name, b in bars.items():
        assert sum(b.values()) == pytest.approx(1.0)
    # mode of the power-law law, recomputed with the dense stationary solve
    model = scenario_preset("power_law", {"alpha": 0.4})
    oracle = stationary_oracle(rate_matrix(model, 1.0))
    mode = int(np.argmax([bars["power_law"][k] for k in range(len(oracle))]))
    assert mode == int(np.argmax(oracle))
    assert abs(mode - 3) <= 2


def test_nonstationary_study_shape(tmp_path):
    out = tmp_path / "ns.csv"
    rows = run_nonstationary_study({"replications": 100, "master_seed": 1, "output": str(out)}, workers=1)
    assert out.read_text().splitlines()[0] == "design,estimator,length,n_ok,truth,bias,sd,rmse"
    truth = rows[0]["truth"]
    assert all(r["truth"] == truth for r in rows)
    checks = nonstationary_checks(rows)
    assert checks["u_shape"], checks
    assert checks["kernel_beats_interval"], checks
    assert len([r for r in rows if r["design"] == "user"]) == 5
