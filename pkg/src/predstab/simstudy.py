"""Repeated-development simulation: how much do models from one DGP disagree?

For each development sample size, many development samples are drawn, the
strategy is fit to each, and every fitted model predicts for one fixed
evaluation population whose true risks are known. Four summaries follow:
the mean risk (level 1), the risk distribution / calibration and its error
against truth (level 2), a subgroup's mean risk (level 3) and individual
risks for a few tracked people (level 4).
"""

from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ._random import NORMAL_METHOD, TAG_SIM_DEV, TAG_SIM_EVAL, derive_rng, draw_seed
from .curves import Loess
from .dataset import SimConfig, coerce_fields, read_flat_config, simulate_population
from .engines import ModelSpec, spec_from_mapping
from .exceptions import CurveError, DataError, FitError, StabilityError
from .stability import MAX_FAILURE_FRACTION

DEFAULT_SIZES = (50, 100, 385, 500, 1000, 5000)
DEFAULT_TRACKED = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class SimExperiment:
    cfg: SimConfig = field(default_factory=SimConfig)
    sample_sizes: Tuple[int, ...] = DEFAULT_SIZES
    n_models: int = 200
    n_eval: int = 20_000
    spec: ModelSpec = field(default_factory=lambda: ModelSpec(engine="lasso_cv"))
    tracked_risks: Tuple[float, ...] = DEFAULT_TRACKED
    subgroup_x_below: float = -1.0
    calibration: bool = True
    calibration_span: float = 0.5
    calibration_grid: int = 50

    def __post_init__(self):
        if self.n_models < 2:
            raise DataError("n_models must be at least 2")
        if not self.sample_sizes or min(self.sample_sizes) < 20:
            raise DataError("sample sizes must all be at least 20")
        if self.n_eval < 1:
            raise DataError("n_eval must be positive")

    def to_dict(self):
        d = asdict(self)
        d["sample_sizes"] = list(self.sample_sizes)
        d["tracked_risks"] = list(self.tracked_risks)
        return d


def load_experiment(path):
    """Read a flat config holding SimConfig, SimExperiment and ModelSpec keys."""
    values = read_flat_config(path)
    return experiment_from_mapping(values, source=str(path))


def experiment_from_mapping(values, source="config"):
    values = dict(values)
    cfg_kwargs = coerce_fields(SimConfig, values, source)
    cfg = SimConfig(**cfg_kwargs)
    exp_kwargs = coerce_fields(SimExperiment, values, source)
    # n_eval names the same population in both places
    if "n_eval" in cfg_kwargs:
        exp_kwargs["n_eval"] = cfg_kwargs["n_eval"]
    exp_kwargs.pop("cfg", None)
    exp_kwargs.pop("spec", None)
    spec = spec_from_mapping(values, source) if values else ModelSpec(engine="lasso_cv")
    return SimExperiment(cfg=cfg, spec=spec, **exp_kwargs)


@dataclass
class SimCell:
    """All replicates for one development sample size."""

    n_dev: int
    replicate_ids: np.ndarray
    mean_risk: np.ndarray
    mape: np.ndarray
    subgroup_mean: np.ndarray
    tracked: np.ndarray
    calibration_x: Optional[np.ndarray]
    calibration_y: Optional[np.ndarray]
    failures: tuple = ()


@dataclass
class SimResult:
    experiment: SimExperiment
    cells: dict
    tracked_index: np.ndarray
    tracked_true_risk: np.ndarray
    subgroup_size: int
    master_seed: int
    metadata: dict = field(default_factory=dict)


def mape_vs_truth(estimated, true_risk):
    """Mean absolute difference between estimated and true risks."""
    if true_risk is None:
        raise DataError("true risks are required (simulation data only)")
    est = np.asarray(estimated, dtype=float)
    tr = np.asarray(true_risk, dtype=float)
    if est.shape != tr.shape:
        raise DataError(f"length mismatch: {est.size} estimated vs {tr.size} true risks")
    return float(np.mean(np.abs(est - tr)))


def evaluation_population(exp, master_seed):
    return simulate_population(exp.cfg, exp.n_eval, derive_rng(master_seed, TAG_SIM_EVAL))


def tracked_individuals(true_risk, targets):
    """Row index whose true risk is nearest each target (first on ties)."""
    return np.array([int(np.argmin(np.abs(true_risk - t))) for t in targets], dtype=np.int64)


def _replicate(exp, eval_ds, sub_mask, tracked_idx, master_seed, n_dev, r):
    rng = derive_rng(master_seed, TAG_SIM_DEV, n_dev, r)
    dev = simulate_population(exp.cfg, n_dev, rng)
    est = exp.spec.build()
    if "random_state" in est.get_params(deep=False):
        est.set_params(random_state=draw_seed(rng))
    try:
        est.fit(dev.predictors, dev.outcome)
    except FitError as exc:
        return r, None, f"{type(exc).__name__}: {exc}"
    p = est.predict_risk(eval_ds.predictors)
    out = {
        "mean_risk": float(p.mean()),
        "mape": mape_vs_truth(p, eval_ds.true_risk),
        "subgroup_mean": float(p[sub_mask].mean()) if sub_mask.any() else np.nan,
        "tracked": p[tracked_idx],
    }
    if exp.calibration:
        try:
            sm = Loess(p, eval_ds.outcome.astype(float), exp.calibration_span)
            grid = np.linspace(sm.lo, sm.hi, exp.calibration_grid)
            out["cal_x"], out["cal_y"] = grid, np.clip(sm(grid), 0.0, 1.0)
        except CurveError:
            out["cal_x"] = np.full(exp.calibration_grid, p.mean())
            out["cal_y"] = np.full(exp.calibration_grid, eval_ds.outcome.mean())
    return r, out, None


def run_sim_experiment(exp, master_seed, n_jobs=1):
    """Run every (sample size, replicate) cell against one fixed evaluation population.

    Replicate ``r`` at size ``n`` draws from ``derive_rng(seed, TAG_SIM_DEV, n, r)``.

    Raises
    ------
    StabilityError
        If more than 20% of replicates fail at any sample size.
    """
    eval_ds = evaluation_population(exp, master_seed)
    x = eval_ds.predictors[:, 0]
    sub_mask = x < exp.subgroup_x_below
    tracked_idx = tracked_individuals(eval_ds.true_risk, exp.tracked_risks)

    cells = {}
    for n_dev in exp.sample_sizes:
        args = (exp, eval_ds, sub_mask, tracked_idx, master_seed, n_dev)
        if n_jobs == 1:
            results = [_replicate(*args, r) for r in range(exp.n_models)]
        else:
            results = Parallel(n_jobs=n_jobs)(delayed(_replicate)(*args, r) for r in range(exp.n_models))
        ok = [(r, o) for r, o, e in results if e is None]
        failures = tuple((r, e) for r, _, e in results if e is not None)
        if len(failures) > MAX_FAILURE_FRACTION * exp.n_models:
            raise StabilityError(
                f"{len(failures)} of {exp.n_models} model fits failed at n_dev={n_dev} (> 20%)"
            )
        cells[n_dev] = SimCell(
            n_dev=n_dev,
            replicate_ids=np.array([r for r, _ in ok], dtype=np.int64),
            mean_risk=np.array([o["mean_risk"] for _, o in ok]),
            mape=np.array([o["mape"] for _, o in ok]),
            subgroup_mean=np.array([o["subgroup_mean"] for _, o in ok]),
            tracked=np.vstack([o["tracked"] for _, o in ok]),
            calibration_x=np.vstack([o["cal_x"] for _, o in ok]) if exp.calibration else None,
            calibration_y=np.vstack([o["cal_y"] for _, o in ok]) if exp.calibration else None,
            failures=failures,
        )
    return SimResult(
        experiment=exp,
        cells=cells,
        tracked_index=tracked_idx,
        tracked_true_risk=eval_ds.true_risk[tracked_idx],
        subgroup_size=int(sub_mask.sum()),
        master_seed=int(master_seed),
        metadata={"normal_generator": NORMAL_METHOD, "percentiles": "empirical 2.5/97.5, linear interpolation"},
    )


def _range(v):
    return float(np.quantile(v, 0.025)), float(np.quantile(v, 0.975))


def level_summaries(result):
    """Per-sample-size summary tables for the four stability levels.

    Returns a dict of DataFrames: ``level1`` .. ``level4`` plus
    ``level2_curves`` (the long-format calibration spaghetti payload, empty
    when calibration curves were not computed).
    """
    if not result.cells:
        raise DataError("empty simulation result")
    l1, l2, l3, l4, curves = [], [], [], [], []
    for n_dev, c in sorted(result.cells.items()):
        lo, hi = _range(c.mean_risk)
        l1.append({"n_dev": n_dev, "n_models": c.mean_risk.size, "mean": float(c.mean_risk.mean()),
                   "lo": lo, "hi": hi, "width": hi - lo,
                   "min": float(c.mean_risk.min()), "max": float(c.mean_risk.max())})
        q25, med, q75 = (float(v) for v in np.quantile(c.mape, [0.25, 0.5, 0.75]))
        l2.append({"n_dev": n_dev, "n_models": c.mape.size, "mape_mean": float(c.mape.mean()),
                   "mape_median": med, "mape_q25": q25, "mape_q75": q75, "mape_iqr": q75 - q25})
        lo, hi = _range(c.subgroup_mean)
        l3.append({"n_dev": n_dev, "n_models": c.subgroup_mean.size, "mean": float(c.subgroup_mean.mean()),
                   "median": float(np.median(c.subgroup_mean)), "lo": lo, "hi": hi})
        for k, target in enumerate(result.experiment.tracked_risks):
            v = c.tracked[:, k]
            lo, hi = _range(v)
            l4.append({"n_dev": n_dev, "target_risk": target, "individual": int(result.tracked_index[k]),
                       "true_risk": float(result.tracked_true_risk[k]), "min": float(v.min()),
                       "max": float(v.max()), "lo": lo, "hi": hi, "median": float(np.median(v))})
        if c.calibration_x is not None:
            for r, (xs, ys) in zip(c.replicate_ids, zip(c.calibration_x, c.calibration_y)):
                curves.extend({"n_dev": n_dev, "replicate": int(r), "x": float(a), "y": float(b)}
                              for a, b in zip(xs, ys))
    return {
        "level1": pd.DataFrame(l1),
        "level2": pd.DataFrame(l2),
        "level3": pd.DataFrame(l3),
        "level4": pd.DataFrame(l4),
        "level2_curves": pd.DataFrame(curves, columns=["n_dev", "replicate", "x", "y"]),
    }
