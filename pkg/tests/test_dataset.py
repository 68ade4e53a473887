import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predstab._random import derive_rng
from predstab.dataset import (Dataset, SimConfig, bootstrap_indices, bootstrap_sample, load_csv, load_sim_config,
                              simulate_population)
from predstab.exceptions import DataError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_gusto_style_columns_in_file_order(tmp_path):
    header = "sex,age,hyp,hypo,tachy,pmi,ste,dead30"
    rows = ["0,62.1,0,0,1,0,1,0", "1,71.5,1,0,0,1,0,1", "0,55.0,0,1,0,0,1,0"]
    ds = load_csv(write(tmp_path, "\n".join([header] + rows) + "\n"), "dead30")
    assert ds.p == 7
    assert ds.predictor_names == ("sex", "age", "hyp", "hypo", "tachy", "pmi", "ste")
    assert ds.outcome.tolist() == [0, 1, 0]
    assert ds.predictors[1, 1] == 71.5


def test_minimal_two_row_file(tmp_path):
    ds = load_csv(write(tmp_path, "x,y\n1,0\n2,1"), "y")
    assert (ds.n, ds.p) == (2, 1)
    assert ds.predictors[:, 0].tolist() == [1.0, 2.0]


def test_non_binary_outcome_names_row(tmp_path):
    with pytest.raises(DataError, match="row 3"):
        load_csv(write(tmp_path, "x,y\n1,0\n2,2\n"), "y")


def test_non_numeric_cell_names_row_and_column(tmp_path):
    with pytest.raises(DataError, match=r"row 2, column 'x'"):
        load_csv(write(tmp_path, "x,y\nabc,0\n"), "y")


def test_missing_value_rejected(tmp_path):
    with pytest.raises(DataError, match="missing value at row 3"):
        load_csv(write(tmp_path, "x,y\n1,0\nNA,1\n"), "y")


@pytest.mark.parametrize("text", ["", "x,y\n"])
def test_empty_file(tmp_path, text):
    with pytest.raises(DataError):
        load_csv(write(tmp_path, text), "y")


def test_missing_file():
    with pytest.raises(DataError, match="no such file"):
        load_csv("/nonexistent/file.csv", "y")


def test_subgroup_column_excluded_and_stringified(tmp_path):
    ds = load_csv(write(tmp_path, "x,g,y\n1,1,0\n2,2.0,1\n3,1.0,1\n"), "y", "g")
    assert ds.predictor_names == ("x",)
    assert ds.subgroup.tolist() == ["1", "2", "1"]


def test_quoted_fields(tmp_path):
    ds = load_csv(write(tmp_path, '"x","y","g"\n"1.5","1","a,b"\n2,0,c\n'), "y", "g")
    assert ds.subgroup.tolist() == ["a,b", "c"]


def test_dataset_is_read_only(small_ds):
    with pytest.raises(ValueError):
        small_ds.predictors[0, 0] = 1.0


def test_true_risk_must_be_interior():
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), ("x",), [0, 1], true_risk=[0.0, 0.5])


def test_bootstrap_single_row():
    ds = Dataset([[1.5]], ("x",), [1])
    bs = bootstrap_sample(ds, np.random.default_rng(0))
    assert bs.n == 1 and bs.predictors[0, 0] == 1.5


def test_bootstrap_carries_parallel_fields(sim_ds):
    ds = Dataset(sim_ds.predictors, sim_ds.predictor_names, sim_ds.outcome, sim_ds.true_risk,
                 subgroup=np.arange(sim_ds.n))
    bs = bootstrap_sample(ds, np.random.default_rng(3))
    assert bs.n == ds.n
    rows = bs.subgroup.astype(int)
    np.testing.assert_array_equal(bs.predictors, ds.predictors[rows])
    np.testing.assert_array_equal(bs.outcome, ds.outcome[rows])
    np.testing.assert_array_equal(bs.true_risk, ds.true_risk[rows])


def test_distinct_fraction_matches_expectation():
    n = 100
    rng = np.random.default_rng(2024)
    frac = np.mean([np.unique(bootstrap_indices(n, rng)).size / n for _ in range(10000)])
    assert abs(frac - (1 - (1 - 1 / n) ** n)) < 0.01


@given(n=st.integers(1, 300), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_bootstrap_indices_in_range_and_reproducible(n, seed):
    a = bootstrap_indices(n, derive_rng(seed, 1))
    b = bootstrap_indices(n, derive_rng(seed, 1))
    assert a.size == n and a.min() >= 0 and a.max() < n
    np.testing.assert_array_equal(a, b)


def test_default_dgp_moments():
    ds = simulate_population(SimConfig(), 100_000, derive_rng(1, 2))
    assert abs(ds.true_risk.mean() - 0.5) < 0.01
    assert abs(ds.predictors[:, 0].std(ddof=1) - 2.0) < 0.05
    assert ds.predictor_names == ("X",) + tuple(f"Z{j}" for j in range(1, 11))
    np.testing.assert_allclose(ds.true_risk, 1 / (1 + np.exp(-ds.predictors[:, 0])), rtol=1e-12)


def test_slope_zero_gives_constant_true_risk():
    ds = simulate_population(SimConfig(slope=0.0, intercept=0.7), 500, derive_rng(0))
    assert np.all(ds.true_risk == 1 / (1 + np.exp(-0.7)))


def test_true_slope_recoverable():
    from predstab.engines import LogisticRegressionIRLS

    ds = simulate_population(SimConfig(n_noise=0, slope=1.0), 100_000, derive_rng(5))
    m = LogisticRegressionIRLS().fit(ds.predictors, ds.outcome)
    assert abs(m.coef_[0] - 1.0) < 0.05


def test_simulation_reproducible():
    a = simulate_population(SimConfig(), 50, derive_rng(9, 3))
    b = simulate_population(SimConfig(), 50, derive_rng(9, 3))
    np.testing.assert_array_equal(a.predictors, b.predictors)
    np.testing.assert_array_equal(a.outcome, b.outcome)


def test_sim_config_file(tmp_path):
    p = write(tmp_path, "# desk scale\nn_noise = 3\nx_sd = 1.5  # narrower\n", "sim.cfg")
    cfg = load_sim_config(p)
    assert cfg == SimConfig(n_noise=3, x_sd=1.5)


def test_sim_config_rejects_bad_values(tmp_path):
    with pytest.raises(DataError, match="n_noise"):
        load_sim_config(write(tmp_path, "n_noise = many\n", "bad.cfg"))
