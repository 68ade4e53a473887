import csv
import filecmp
import json
import os

import numpy as np
import pytest

from predstab import __version__
from predstab._random import derive_rng
from predstab.cli import main
from predstab.dataset import SimConfig, simulate_population


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    ds = simulate_population(SimConfig(n_noise=2), 150, derive_rng(3, 3))
    path = tmp_path_factory.mktemp("data") / "d.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["X", "Z1", "Z2", "sex", "y"])
        for i in range(ds.n):
            w.writerow([*ds.predictors[i], "f" if i % 3 else "m", ds.outcome[i]])
    return str(path)


def bundle_files(root):
    return sorted(os.path.relpath(os.path.join(d, f), root) for d, _, fs in os.walk(root) for f in fs)


def run_assess(data_csv, out, *extra):
    return main(["assess", "--data", data_csv, "--outcome", "y", "--subgroup", "sex", "--B", "10", "--seed", "7",
                 "--out-dir", str(out), *extra])


def test_assess_bundle(data_csv, tmp_path, capsys):
    assert run_assess(data_csv, tmp_path / "o", "--engine", "lasso_cv", "--threshold", "0.3") == 0
    files = bundle_files(tmp_path / "o")
    for f in ["report.json", "predictions.csv", "mape.csv", "curves/calibration.csv", "curves/band.csv",
              "curves/decision.csv", "plots/prediction_instability.svg", "plots/calibration_instability.svg",
              "plots/mape_instability.svg", "plots/c_stat_histogram.svg", "plots/classification_instability.svg",
              "plots/decision_instability.svg"]:
        assert f in files
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    prov = report["provenance"]
    assert prov["seed"] == 7 and prov["B"] == 10 and prov["version"] == __version__
    assert prov["spec"]["engine"] == "lasso_cv" and prov["failures"] == []
    assert set(report["metrics"]["subgroups"]) == {"f", "m"}
    assert "below the recommended minimum" in capsys.readouterr().err
    rows = (tmp_path / "o" / "predictions.csv").read_text().splitlines()
    assert len(rows) == 1 + 150 * 11


def test_assess_byte_identical_across_runs_and_workers(data_csv, tmp_path):
    assert run_assess(data_csv, tmp_path / "a", "--engine", "rf_platt", "--threshold", "0.2") == 0
    assert run_assess(data_csv, tmp_path / "b", "--engine", "rf_platt", "--threshold", "0.2", "--workers", "2") == 0
    files = bundle_files(tmp_path / "a")
    assert files == bundle_files(tmp_path / "b")
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files, shallow=False)
    assert mismatch == [] and errors == []


def test_seed_required(data_csv, tmp_path, capsys):
    code = main(["assess", "--data", data_csv, "--outcome", "y", "--out-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 2
    assert err.count("\n") == 1 and "--seed" in err


def test_unknown_flag_and_command(capsys):
    assert main(["assess", "--nope"]) == 2
    assert main(["frobnicate"]) == 2


def test_malformed_config_is_usage_error(data_csv, tmp_path, capsys):
    cfg = tmp_path / "m.cfg"
    cfg.write_text("n_folds = ten\n")
    assert run_assess(data_csv, tmp_path / "o", "--config", str(cfg)) == 2
    cfg.write_text("[section]\nn_folds = 5\n")
    assert run_assess(data_csv, tmp_path / "o", "--config", str(cfg)) == 2
    assert capsys.readouterr().err.startswith("predstab: usage-error:")


def test_runtime_error_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,0\n2,3\n")
    code = main(["assess", "--data", str(path), "--outcome", "y", "--seed", "1", "--out-dir", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert code == 1 and err.startswith("predstab: error: DataError:") and err.count("\n") == 1


def test_config_overrides_engine_hyperparameters(data_csv, tmp_path):
    cfg = tmp_path / "rf.cfg"
    cfg.write_text("engine = random_forest\nn_trees = 25\nmin_node = 5\n")
    assert run_assess(data_csv, tmp_path / "o", "--config", str(cfg)) == 0
    spec = json.loads((tmp_path / "o" / "report.json").read_text())["provenance"]["spec"]
    assert (spec["engine"], spec["n_trees"], spec["min_node"]) == ("random_forest", 25, 5)


def test_fit_exports_json(tmp_path):
    path = tmp_path / "d.csv"
    ds = simulate_population(SimConfig(n_noise=1), 100, derive_rng(0))
    np.savetxt(path, np.column_stack([ds.predictors, ds.outcome]), delimiter=",", header="X,Z1,y", comments="")
    out = tmp_path / "m.json"
    assert main(["fit", "--data", str(path), "--outcome", "y", "--seed", "2", "--engine", "logistic_full",
                 "--out", str(out)]) == 0
    model = json.loads(out.read_text())
    assert model["engine"] == "logistic_full" and len(model["coef"]) == 2 and model["seed"] == 2


def test_simulate_bundle(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n_models = 4\nn_eval = 1000\nsample_sizes = 50, 100\nengine = logistic_full\nn_noise = 2\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "--out-dir", str(tmp_path / "s")]) == 0
    files = bundle_files(tmp_path / "s")
    for f in ["level1.csv", "level2.csv", "level3.csv", "level4.csv", "level2_curves.csv", "index.json",
              "plots/sim_level1.svg", "plots/sim_level4_n100.svg"]:
        assert f in files
    index = json.loads((tmp_path / "s" / "index.json").read_text())
    assert index["experiment"]["n_models"] == 4 and len(index["tracked_individuals"]) == 9
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "--out-dir", str(tmp_path / "t"),
                 "--workers", "2"]) == 0
    _, mismatch, errors = filecmp.cmpfiles(tmp_path / "s", tmp_path / "t", files, shallow=False)
    assert mismatch == [] and errors == []


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__
