import json
import time

import pandas as pd
import pytest

from ptes.cli import _split_tags, main
from ptes.io import synthetic_prices, write_price_csv


@pytest.fixture
def day_config(tmp_path):
    write_price_csv(synthetic_prices(48, 4), tmp_path / "p.csv")
    cfg = tmp_path / "run.yaml"
    cfg.write_text("models: [A, B:M, C3, E]\nprices:\n  - {label: two_days, path: p.csv}\nrepetitions: 2\n")
    return cfg


def test_split_tags():
    assert _split_tags("A,B:M,C3") == ["A", "B:M", "C3"]
    assert _split_tags("CN:20,80,D, E") == ["CN:20,80", "D", "E"]


def test_dispatch_then_analyze(tmp_path, day_config, capsys):
    out = tmp_path / "run"
    assert main(["dispatch", "--config", str(day_config), "--out", str(out)]) == 0
    assert (out / "two_days__B-M.csv").exists()
    assert main(["analyze", "--config", str(day_config), "--out", str(out)]) == 0
    t = pd.read_csv(out / "tradeoff.csv").set_index("model")
    assert t.loc["A", "rmsd_soc_mean"] == 0.0
    assert set(t.index) == {"A", "B:M", "C3", "E"}


def test_models_flag_overrides_config(tmp_path, day_config):
    out = tmp_path / "run"
    assert main(["dispatch", "--config", str(day_config), "--models", "E,D", "--reps", "1", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.glob("*.csv")) == ["two_days__D.csv", "two_days__E.csv"]


def test_batch_bundle_under_a_minute(tmp_path):
    out = tmp_path / "bundle"
    t0 = time.perf_counter()
    code = main(["batch", "--models", "A,B:M,B:H,C2:75,C3,C10,D,D2,E", "--reps", "1", "--out", str(out)])
    assert time.perf_counter() - t0 < 60
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    for name in ("tradeoff.csv", "fom.csv", "ecdf.csv", "tradeoff.svg", "ecdf.svg"):
        assert name in manifest["bundle"]
    assert len(manifest["config_hash"]) == 64


def test_capability_dump(tmp_path):
    assert main(["capability-dump", "--models", "A,C3,D", "--out", str(tmp_path)]) == 0
    df = pd.read_csv(tmp_path / "capability.csv")
    assert set(df.model) == {"A", "C3", "D"}
    assert df.eta_ch.between(0, 1).all()
    assert (tmp_path / "capability.svg").exists()


def test_fit_synthetic(tmp_path):
    assert main(["fit", "--out", str(tmp_path), "--seed", "1"]) == 0
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert {"charge", "discharge"} <= set(doc)


def test_bench_piecewise(tmp_path):
    assert main(["bench-piecewise", "--models", "C2:75", "--reps", "1", "--out", str(tmp_path)]) == 0
    df = pd.read_csv(tmp_path / "bench_piecewise.csv")
    assert set(df.formulation) == {"lp", "milp"}
    assert (df.rel_diff_to_lp < 1e-6).all()


def test_cem_single_lp(tmp_path):
    assert main(["cem", "--models", "E", "--periods", "1", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "cem_meta.json").read_text())
    assert meta["specs"]["E"]["status"] == "Optimal"
    assert sum(meta["weights"]) == 52
    for name in ("capacities", "costs", "soc", "ecdf"):
        assert (tmp_path / f"cem_{name}.csv").exists()


def test_cem_time_limit_exits_3_with_artifacts(tmp_path):
    code = main(["cem", "--models", "A", "--periods", "1", "--time-limit", "5", "--out", str(tmp_path)])
    assert code == 3
    meta = json.loads((tmp_path / "cem_meta.json").read_text())
    assert meta["specs"]["A"]["status"] == "TimeLimit"
    assert meta["specs"]["A"]["capability"] <= 1e-6
    assert (tmp_path / "cem_costs.csv").exists()


def test_input_errors_exit_2(tmp_path, capsys):
    assert main(["dispatch", "--config", str(tmp_path / "missing.yaml")]) == 2
    rows = ["timestamp,price_usd_per_mwh", "2021-01-01T00:00:00,1", "2021-01-01T02:00:00,2",
            "2021-01-01T03:00:00,3"]
    (tmp_path / "gap.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "run.yaml").write_text("models: [E]\nprices:\n  - {label: g, path: gap.csv}\n")
    assert main(["dispatch", "--config", str(tmp_path / "run.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert "row 2" in capsys.readouterr().err
    code = main(["dispatch", "--config", str(tmp_path / "run.yaml"), "--policy", "interpolate", "--reps", "1",
                 "--out", str(tmp_path / "o")])
    assert code == 0


def test_unknown_model_exits_2(tmp_path):
    assert main(["dispatch", "--models", "Q7", "--out", str(tmp_path)]) == 2
