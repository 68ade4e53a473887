import numpy as np
import pytest

from predstab.dataset import SimConfig
from predstab.engines import ModelSpec
from predstab.exceptions import DataError, StabilityError
from predstab.simstudy import (SimCell, SimExperiment, SimResult, evaluation_population, experiment_from_mapping,
                               level_summaries, load_experiment, mape_vs_truth, run_sim_experiment)


def small_exp(**kw):
    base = dict(sample_sizes=(50, 200), n_models=20, n_eval=3000, spec=ModelSpec(engine="logistic_full"),
                cfg=SimConfig(n_noise=2))
    base.update(kw)
    return SimExperiment(**base)


def test_mape_vs_truth_examples():
    assert mape_vs_truth([0.2, 0.7], [0.2, 0.7]) == 0.0
    assert mape_vs_truth([0.5, 0.5], [0.4, 0.6]) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(DataError):
        mape_vs_truth([0.5], None)
    with pytest.raises(DataError):
        mape_vs_truth([0.5, 0.5], [0.5])


def test_mape_vs_truth_matches_loop():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(size=200), rng.uniform(size=200)
    loop = sum(abs(x - y) for x, y in zip(a, b)) / 200
    assert abs(mape_vs_truth(a, b) - loop) < 1e-12


def test_experiment_invariants():
    with pytest.raises(DataError):
        SimExperiment(n_models=1)
    with pytest.raises(DataError):
        SimExperiment(sample_sizes=(10, 100))


def test_flat_config(tmp_path):
    p = tmp_path / "e.cfg"
    p.write_text("n_models = 30\nsample_sizes = 60, 120\nn_eval = 5000\nx_sd = 1.0\nengine = logistic_full\n"
                 "calibration = no\n")
    exp = load_experiment(str(p))
    assert exp.n_models == 30 and exp.sample_sizes == (60, 120) and exp.n_eval == 5000
    assert exp.cfg.x_sd == 1.0 and exp.spec.engine == "logistic_full" and exp.calibration is False
    with pytest.raises(DataError, match="unknown key"):
        experiment_from_mapping({"n_modles": "3"})


def test_run_shapes_and_ranges():
    exp = small_exp()
    res = run_sim_experiment(exp, master_seed=5)
    for n, cell in res.cells.items():
        assert cell.replicate_ids.size + len(cell.failures) == exp.n_models
        assert cell.tracked.shape == (cell.replicate_ids.size, 9)
        assert np.all((cell.tracked > 0) & (cell.tracked < 1))
        assert np.all((cell.mean_risk > 0) & (cell.mean_risk < 1))
        assert cell.calibration_x.shape[1] == exp.calibration_grid
    np.testing.assert_allclose(res.tracked_true_risk, np.arange(1, 10) / 10, atol=0.01)


def test_evaluation_population_fixed():
    exp = small_exp()
    a = evaluation_population(exp, 5)
    b = evaluation_population(exp, 5)
    np.testing.assert_array_equal(a.predictors, b.predictors)
    # it does not depend on which sample sizes are run
    c = evaluation_population(small_exp(sample_sizes=(100,)), 5)
    np.testing.assert_array_equal(a.true_risk, c.true_risk)


def test_cells_reproducible_independently():
    both = run_sim_experiment(small_exp(), 9)
    one = run_sim_experiment(small_exp(sample_sizes=(200,)), 9)
    np.testing.assert_array_equal(both.cells[200].mean_risk, one.cells[200].mean_risk)


def test_workers_do_not_change_results():
    a = run_sim_experiment(small_exp(n_models=6), 3, n_jobs=1)
    b = run_sim_experiment(small_exp(n_models=6), 3, n_jobs=2)
    for n in a.cells:
        np.testing.assert_array_equal(a.cells[n].tracked, b.cells[n].tracked)


def test_slope_zero_spread_is_binomial():
    n_dev = 200
    exp = SimExperiment(cfg=SimConfig(slope=0.0, n_noise=0), sample_sizes=(n_dev,), n_models=200, n_eval=2000,
                        spec=ModelSpec(engine="logistic_full"), calibration=False)
    res = run_sim_experiment(exp, 11)
    means = res.cells[n_dev].mean_risk
    assert abs(means.mean() - 0.5) < 0.01
    assert abs(means.std(ddof=1) - 0.5 / np.sqrt(n_dev)) < 0.01


def test_failures_over_limit_raise():
    # 16 predictors on 20 rows nearly always separates
    exp = SimExperiment(cfg=SimConfig(n_noise=15), sample_sizes=(20,), n_models=10, n_eval=500,
                        spec=ModelSpec(engine="logistic_full"), calibration=False)
    with pytest.raises(StabilityError, match="n_dev=20"):
        run_sim_experiment(exp, 0)


def test_level_summaries_columns():
    res = run_sim_experiment(small_exp(), 1)
    t = level_summaries(res)
    assert list(t["level1"].n_dev) == [50, 200]
    assert {"lo", "hi", "width"} <= set(t["level1"].columns)
    assert {"mape_median", "mape_q25", "mape_q75"} <= set(t["level2"].columns)
    assert len(t["level4"]) == 2 * 9
    assert (t["level4"]["min"] <= t["level4"]["lo"]).all() and (t["level4"]["hi"] <= t["level4"]["max"]).all()
    assert len(t["level2_curves"]) == sum(c.replicate_ids.size for c in res.cells.values()) * 50


def test_single_replicate_summaries_degenerate():
    exp = small_exp(sample_sizes=(50,))
    cell = SimCell(50, np.array([0]), np.array([0.48]), np.array([0.07]), np.array([0.2]),
                   np.full((1, 9), 0.33), None, None)
    res = SimResult(exp, {50: cell}, np.arange(9), np.arange(1, 10) / 10, 10, 0)
    t = level_summaries(res)
    row = t["level1"].iloc[0]
    assert row["lo"] == row["hi"] == row["min"] == row["max"] == 0.48
    l4 = t["level4"]
    assert (l4["lo"] == l4["hi"]).all() and (l4["min"] == l4["max"]).all()
    assert t["level2"].iloc[0]["mape_iqr"] == 0
    assert t["level2_curves"].empty


def test_empty_result_rejected():
    with pytest.raises(DataError):
        level_summaries(SimResult(small_exp(), {}, np.arange(9), np.zeros(9), 0, 0))
