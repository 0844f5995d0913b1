import json

import numpy as np
import pandas as pd
import pytest

from aesn.cli import main

CONFIG = """
seed = 11
model = "aesn"
lead = 3
horizon = 12
n_ens = 4
alpha = 0.2
train_len = 36

[paths]
panel = "data/panel.csv"
edges = "data/edges.csv"
out_dir = "out"

[hyper]
n_h = 40
k_embed = 3
lags = 1

[tune]
n_trials = 2
train_len = 24
val_len = 12

[synth]
rows = 3
cols = 3
T = 48
"""


def _run(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    return exc.value.code, capsys.readouterr()


def pipeline(root, models=(("aesn", 3), ("esn", 12))):
    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "run.toml"
    cfg.write_text(CONFIG)
    assert main(["synth", "--config", str(cfg)]) == 0
    for model, lead in models:
        flags = ["--config", str(cfg), "--model", model, "--lead", str(lead)]
        for cmd in ("tune", "fit", "forecast"):
            assert main([cmd, *flags]) == 0
    assert main(["evaluate", "--config", str(cfg)]) == 0
    assert main(["plot-data", "--config", str(cfg)]) == 0
    return root / "out"


def test_pipeline_writes_every_output(tmp_path):
    out = pipeline(tmp_path / "a")
    assert (tmp_path / "a/data/panel.csv").exists() and (tmp_path / "a/data/edges.csv").exists()
    for tag in ("aesn_lead3", "esn_lead12"):
        for name in (f"best_params_{tag}.json", f"trials_{tag}.csv", f"model_{tag}.npz",
                     f"forecasts_{tag}.csv", f"members_{tag}.csv", f"forecast_meta_{tag}.json"):
            assert (out / name).exists(), name
    fc = pd.read_csv(out / "forecasts_aesn_lead3.csv")
    assert list(fc.columns) == ["region_id", "time", "mean", "lower", "upper", "alpha"]
    assert len(fc) == 9 * 12 and (fc["lower"] <= fc["upper"]).all()
    scores = json.loads((out / "scores.json").read_text())
    assert scores["rows"] == ["AESN", "ESN"]
    assert set(scores["table"]["AESN"]["lead_3"]) == {"rmse", "crps", "is"}
    assert scores["seed"] == 11
    meta = json.loads((out / "forecast_meta_esn_lead12.json").read_text())
    assert meta["seed"] == 11 and len(meta["member_seeds"]) == 4
    assert json.loads((out / "best_params_aesn_lead3.json").read_text())["seed"] == 11
    ts = pd.read_csv(out / "plot_timeseries.csv")
    assert {"observed", "mean", "lower", "upper"} <= set(ts.columns)
    choro = pd.read_csv(out / "plot_choropleth.csv")
    assert len(choro) == 2 * 12 * 9


def test_pipeline_is_byte_identical(tmp_path):
    a, b = pipeline(tmp_path / "a"), pipeline(tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_inputs_not_mutated(tmp_path):
    root = tmp_path / "a"
    pipeline(root, models=(("esn", 3),))
    before = (root / "data/panel.csv").read_bytes()
    assert main(["forecast", "--config", str(root / "run.toml"), "--model", "esn"]) == 0
    assert (root / "data/panel.csv").read_bytes() == before


def test_evaluate_perfect_forecast_scores_zero(tmp_path):
    root = tmp_path / "p"
    out = pipeline(root, models=(("esn", 3),))
    truth = pd.read_csv(root / "data/panel.csv", dtype=str, float_precision="round_trip")
    members = pd.read_csv(out / "members_esn_lead3.csv", dtype={"region_id": str, "time": str})
    lookup = {(r, t): v for r, t, v in zip(truth["region_id"], truth["time"], truth["value"])}
    members["value"] = [lookup[(r, t)] for r, t in zip(members["region_id"], members["time"])]
    members.to_csv(out / "members_esn_lead3.csv", index=False)
    assert main(["evaluate", "--config", str(root / "run.toml")]) == 0
    row = json.loads((out / "scores.json").read_text())["table"]["ESN"]["lead_3"]
    assert row == {"rmse": 0.0, "crps": 0.0, "is": 0.0}


def test_error_exit_codes(tmp_path, capsys):
    code, cap = _run(capsys, "fit", "--config", str(tmp_path / "missing.toml"))
    assert code == 2 and json.loads(cap.err)["error"] == "config"
    cfg = tmp_path / "run.toml"
    cfg.write_text(CONFIG)
    code, cap = _run(capsys, "fit", "--config", str(cfg))
    assert code == 2 and "does not exist" in json.loads(cap.err)["message"]
    assert main(["synth", "--config", str(cfg)]) == 0
    short = tmp_path / "short.toml"
    short.write_text(CONFIG.replace("lags = 1", "lags = 3"))
    code, cap = _run(capsys, "fit", "--config", str(short), "--lead", "12")
    assert code == 3 and "time steps" in json.loads(cap.err)["message"]
    (tmp_path / "data/panel.csv").write_text("region_id,time,value\nR0000,2020-01,abc\n")
    code, cap = _run(capsys, "fit", "--config", str(cfg))
    assert code == 3 and json.loads(cap.err)["exit_code"] == 3
    code, cap = _run(capsys, "fit", "--config", str(cfg), "--lead", "0")
    assert code == 2
    code, cap = _run(capsys, "bogus")
    assert code == 2 and json.loads(cap.err)["error"] == "usage"


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(CONFIG.replace("n_h = 40", "n_h = 40\ntau = 0.0\npi_res = 1e-12"))
    assert main(["synth", "--config", str(cfg)]) == 0
    code, cap = _run(capsys, "fit", "--config", str(cfg))
    assert code == 4 and json.loads(cap.err)["error"] == "numerical"


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("sead = 3\n")
    code, cap = _run(capsys, "synth", "--config", str(cfg))
    assert code == 2


def test_forecast_requires_matching_artifact(tmp_path, capsys):
    root = tmp_path / "a"
    pipeline(root, models=(("esn", 3),))
    code, cap = _run(capsys, "forecast", "--config", str(root / "run.toml"), "--model", "esn",
                     "--seed", "12")
    assert code == 2
    code, cap = _run(capsys, "forecast", "--config", str(root / "run.toml"), "--model", "aesn")
    assert code == 2 and "fit" in json.loads(cap.err)["message"]
