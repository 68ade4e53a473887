"""Bootstrap instability assessment of a model-building strategy.

The original model is fit on the development data and predicts for every
participant; then, for each replicate, the whole strategy is re-run on a
same-size resample and the resulting model predicts for the *original*
participants. Everything downstream is a pure function of the resulting
N x (B+1) risk matrix.

Seeds: the original fit draws from ``derive_rng(seed, TAG_ORIGINAL)`` and
replicate ``b`` from ``derive_rng(seed, TAG_REPLICATE, b)``: resample
indices first, then the engine's own seed. Replicates are therefore
independent of execution order and worker count.
"""

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import rankdata

from ._random import TAG_ORIGINAL, TAG_REPLICATE, derive_rng
from ._validation import check_paired, check_threshold
from .curves import (DEFAULT_GRID, DEFAULT_SPAN, Curve, Loess, calibration_curve, decision_curve)
from .dataset import bootstrap_indices
from .engines import ModelSpec, fit_estimator, predict
from .exceptions import CurveError, DataError, FitError, StabilityError

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.2
RECOMMENDED_B = 200
QUANTILE_METHOD = "linear"
CLASSIFICATION_RULE = "positive when risk >= threshold"


@dataclass(frozen=True)
class BootstrapPredictions:
    """Original-model risks and the bootstrap-model risks for the same people.

    ``bootstrap[:, k]`` came from replicate ``replicate_ids[k]``; failed
    replicates appear only in ``failures`` as ``(replicate, reason)``.
    """

    original: np.ndarray
    bootstrap: np.ndarray
    outcome: np.ndarray
    replicate_ids: np.ndarray = None
    failures: tuple = ()
    subgroup: Optional[np.ndarray] = None

    def __post_init__(self):
        orig = np.asarray(self.original, dtype=float)
        boot = np.asarray(self.bootstrap, dtype=float)
        if boot.ndim == 1:
            boot = boot[:, None]
        if boot.shape[0] != orig.size:
            raise DataError(f"bootstrap matrix has {boot.shape[0]} rows for {orig.size} individuals")
        if np.any((orig <= 0) | (orig >= 1)) or np.any((boot <= 0) | (boot >= 1)):
            raise DataError("stored risks must lie strictly inside (0, 1)")
        ids = np.arange(boot.shape[1]) if self.replicate_ids is None else np.asarray(self.replicate_ids)
        if ids.size != boot.shape[1]:
            raise DataError("replicate_ids length does not match bootstrap columns")
        y = np.asarray(self.outcome).astype(np.int64)
        if y.size != orig.size:
            raise DataError("outcome length does not match predictions")
        object.__setattr__(self, "original", orig)
        object.__setattr__(self, "bootstrap", boot)
        object.__setattr__(self, "replicate_ids", ids.astype(np.int64))
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "failures", tuple((int(b), str(r)) for b, r in self.failures))
        if self.subgroup is not None:
            object.__setattr__(self, "subgroup", np.asarray(self.subgroup, dtype=object))

    @property
    def n(self):
        return self.original.size

    @property
    def B(self):
        return self.bootstrap.shape[1]

    @property
    def attempted(self):
        return self.B + len(self.failures)

    def subset(self, mask):
        mask = np.asarray(mask)
        return BootstrapPredictions(
            original=self.original[mask],
            bootstrap=self.bootstrap[mask],
            outcome=self.outcome[mask],
            replicate_ids=self.replicate_ids,
            failures=self.failures,
            subgroup=None if self.subgroup is None else self.subgroup[mask],
        )

    def to_csv(self, path):
        """Long format ``individual,replicate,risk``; replicate 0 is the original model."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["individual", "replicate", "risk"])
            for i in range(self.n):
                w.writerow([i, 0, repr(float(self.original[i]))])
                for k, b in enumerate(self.replicate_ids):
                    w.writerow([i, int(b) + 1, repr(float(self.bootstrap[i, k]))])

    @classmethod
    def from_csv(cls, path, outcome, subgroup=None, failures=()):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        ids = sorted({int(r["replicate"]) for r in rows} - {0})
        col = {b: k for k, b in enumerate(ids)}
        n = max(int(r["individual"]) for r in rows) + 1
        orig = np.empty(n)
        boot = np.empty((n, len(ids)))
        for r in rows:
            i, b, v = int(r["individual"]), int(r["replicate"]), float(r["risk"])
            if b == 0:
                orig[i] = v
            else:
                boot[i, col[b]] = v
        return cls(orig, boot, outcome, np.array(ids, dtype=np.int64) - 1, failures, subgroup)


def _run_replicate(estimator, ds, master_seed, b):
    rng = derive_rng(master_seed, TAG_REPLICATE, b)
    idx = bootstrap_indices(ds.n, rng)
    try:
        model = fit_estimator(estimator, ds.take(idx), rng)
        return b, predict(model, ds), None
    except FitError as exc:
        return b, None, f"{type(exc).__name__}: {exc}"


def _as_estimator(spec):
    return spec.build() if isinstance(spec, ModelSpec) else spec


def run_bootstrap_stability(ds, spec, B=RECOMMENDED_B, master_seed=0, n_jobs=1):
    """Fit the strategy on ``ds`` and on ``B`` bootstrap resamples of it.

    ``spec`` is a :class:`~predstab.engines.ModelSpec` or any unfitted
    estimator exposing ``fit(X, y)`` and ``predict_risk(X)``. Replicates
    whose refit raises :class:`~predstab.exceptions.FitError` are logged and
    left out (never retried).

    Raises
    ------
    StabilityError
        If the original fit fails, or more than 20% of replicates fail.
    """
    if B < 1:
        raise DataError("B must be at least 1")
    estimator = _as_estimator(spec)
    try:
        original_model = fit_estimator(estimator, ds, derive_rng(master_seed, TAG_ORIGINAL))
    except FitError as exc:
        raise StabilityError(f"original model could not be fit: {type(exc).__name__}: {exc}") from exc
    original = predict(original_model, ds)

    if n_jobs == 1:
        results = [_run_replicate(estimator, ds, master_seed, b) for b in range(B)]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_run_replicate)(estimator, ds, master_seed, b) for b in range(B))

    ok = [(b, p) for b, p, err in results if err is None]
    failures = [(b, err) for b, _, err in results if err is not None]
    for b, err in failures:
        logger.warning("bootstrap replicate %d failed: %s", b, err)
    if len(failures) > MAX_FAILURE_FRACTION * B:
        raise StabilityError(
            f"{len(failures)} of {B} bootstrap refits failed (> {MAX_FAILURE_FRACTION:.0%}); "
            "the dataset is too small for this model-building strategy"
        )
    boot = np.column_stack([p for _, p in ok])
    return BootstrapPredictions(
        original=original,
        bootstrap=boot,
        outcome=ds.outcome,
        replicate_ids=np.array([b for b, _ in ok], dtype=np.int64),
        failures=tuple(failures),
        subgroup=ds.subgroup,
    )


def mape_per_individual(bp):
    """Mean over replicates of ``|bootstrap risk - original risk|``, per individual."""
    return np.mean(np.abs(bp.bootstrap - bp.original[:, None]), axis=1)


def average_mape(bp):
    return float(np.mean(mape_per_individual(bp)))


@dataclass(frozen=True)
class InstabilityBand:
    """Per-individual percentile range plus its loess-smoothed version.

    ``grid`` spans the original risks; ``lower_smooth``/``upper_smooth`` are
    the smoothed band on it. ``lower_fitted``/``upper_fitted`` interpolate
    the smoothed band back to each individual.
    """

    lo: float
    hi: float
    lower: np.ndarray
    upper: np.ndarray
    grid: np.ndarray
    lower_smooth: np.ndarray
    upper_smooth: np.ndarray
    lower_fitted: np.ndarray
    upper_fitted: np.ndarray
    bandwidth: float


def percentile_band(bp, lo=0.025, hi=0.975, bandwidth=DEFAULT_SPAN, n_grid=DEFAULT_GRID):
    """Instability range of each individual's bootstrap risks, smoothed over original risk.

    Percentiles use linear interpolation between order statistics. The
    smoother is applied to the band's offset from the original risk and the
    offset added back, which reproduces a collapsed band exactly.
    """
    if not 0.0 <= lo < hi <= 1.0:
        raise DataError(f"need 0 <= lo < hi <= 1, got ({lo}, {hi})")
    if bp.B < 2:
        raise DataError("percentile bands need at least 2 bootstrap replicates")
    lower = np.quantile(bp.bootstrap, lo, axis=1, method=QUANTILE_METHOD)
    upper = np.quantile(bp.bootstrap, hi, axis=1, method=QUANTILE_METHOD)
    x = bp.original

    try:
        grid = np.linspace(x.min(), x.max(), n_grid)
        lo_s = grid + Loess(x, lower - x, bandwidth)(grid)
        hi_s = grid + Loess(x, upper - x, bandwidth)(grid)
    except CurveError:
        # too few or identical original risks to smooth over: report the raw band per distinct risk
        grid = np.unique(x)
        lo_s = np.array([np.median(lower[x == g]) for g in grid])
        hi_s = np.array([np.median(upper[x == g]) for g in grid])
    lo_s = np.clip(lo_s, 0.0, 1.0)
    hi_s = np.clip(hi_s, 0.0, 1.0)
    if grid.size > 1:
        lo_f = np.interp(x, grid, lo_s)
        hi_f = np.interp(x, grid, hi_s)
    else:
        lo_f = np.full(x.size, lo_s[0])
        hi_f = np.full(x.size, hi_s[0])
    return InstabilityBand(lo, hi, lower, upper, grid, lo_s, hi_s, lo_f, hi_f, bandwidth)


def classification_instability(bp, threshold):
    """Share of bootstrap models classifying each individual differently from the original."""
    t = check_threshold(threshold)
    orig = bp.original >= t
    return np.mean((bp.bootstrap >= t) != orig[:, None], axis=1)


def c_statistic(risks, outcomes):
    """Concordance probability over event/non-event pairs; tied risks count 1/2.

    Computed exactly from mid-ranks (the Mann-Whitney statistic).
    """
    risks, outcomes = check_paired(risks, outcomes)
    n1 = int(outcomes.sum())
    n0 = outcomes.size - n1
    if n1 == 0 or n0 == 0:
        raise DataError("C-statistic needs both outcome classes")
    ranks = rankdata(risks, method="average")
    u = ranks[outcomes == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def c_statistic_distribution(bp):
    return np.array([c_statistic(bp.bootstrap[:, k], bp.outcome) for k in range(bp.B)])


def _calibration_or_point(risks, outcomes, span, n_grid):
    try:
        return calibration_curve(risks, outcomes, span, n_grid)
    except CurveError:
        # degenerate (constant) risks: the curve is a single point
        return Curve(np.array([float(np.mean(risks))]), np.array([float(np.mean(outcomes))]), "calibration", span)


@dataclass
class StabilityReport:
    predictions: BootstrapPredictions
    mape_per_individual: np.ndarray
    average_mape: float
    band: InstabilityBand
    c_statistic_original: Optional[float]
    c_statistic_bootstrap: Optional[np.ndarray]
    calibration_original: Curve
    calibration_bootstrap: list
    threshold: Optional[float] = None
    classification_index: Optional[np.ndarray] = None
    decision_original: Optional[object] = None
    decision_bootstrap: Optional[list] = None
    subgroups: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def summary(self):
        """JSON-ready metrics; arrays summarised, full vectors left to the CSV outputs."""
        out = {
            "n": int(self.predictions.n),
            "B": int(self.predictions.B),
            "attempted": int(self.predictions.attempted),
            "average_mape": self.average_mape,
            "max_mape": float(np.max(self.mape_per_individual)),
            "band": {"lo": self.band.lo, "hi": self.band.hi, "bandwidth": self.band.bandwidth},
        }
        if self.c_statistic_original is not None:
            cb = self.c_statistic_bootstrap
            out["c_statistic"] = {
                "original": self.c_statistic_original,
                "bootstrap_min": float(cb.min()),
                "bootstrap_max": float(cb.max()),
                "bootstrap_mean": float(cb.mean()),
                "bootstrap_2.5%": float(np.quantile(cb, 0.025)),
                "bootstrap_97.5%": float(np.quantile(cb, 0.975)),
            }
        if self.classification_index is not None:
            out["classification_instability"] = {
                "threshold": self.threshold,
                "rule": CLASSIFICATION_RULE,
                "mean": float(np.mean(self.classification_index)),
                "max": float(np.max(self.classification_index)),
            }
        if self.subgroups:
            out["subgroups"] = {
                label: {"n": int(r.predictions.n), "average_mape": r.average_mape}
                for label, r in sorted(self.subgroups.items())
            }
        out["failures"] = [{"replicate": b, "reason": r} for b, r in self.predictions.failures]
        return out


def build_report(bp, threshold=None, span=DEFAULT_SPAN, n_grid=DEFAULT_GRID, thresholds=None,
                 subgroups=True, metadata=None):
    """Derive every instability measure, curve and band from ``bp``."""
    mape = mape_per_individual(bp)
    band = percentile_band(bp, bandwidth=span, n_grid=n_grid) if bp.B >= 2 else _degenerate_band(bp, span)
    both = 0 < bp.outcome.sum() < bp.n
    c0 = c_statistic(bp.original, bp.outcome) if both else None
    cb = c_statistic_distribution(bp) if both else None
    cal0 = _calibration_or_point(bp.original, bp.outcome, span, n_grid)
    calb = [_calibration_or_point(bp.bootstrap[:, k], bp.outcome, span, n_grid) for k in range(bp.B)]

    report = StabilityReport(
        predictions=bp,
        mape_per_individual=mape,
        average_mape=float(np.mean(mape)),
        band=band,
        c_statistic_original=c0,
        c_statistic_bootstrap=cb,
        calibration_original=cal0,
        calibration_bootstrap=calb,
        metadata=dict(metadata or {}),
    )
    if threshold is not None:
        report.threshold = check_threshold(threshold)
        report.classification_index = classification_instability(bp, threshold)
        report.decision_original = decision_curve(bp.original, bp.outcome, thresholds)
        report.decision_bootstrap = [decision_curve(bp.bootstrap[:, k], bp.outcome, thresholds)
                                     for k in range(bp.B)]
    if subgroups and bp.subgroup is not None:
        report.subgroups = subgroup_stability(bp, span=span, n_grid=n_grid)
    return report


def _degenerate_band(bp, span):
    col = bp.bootstrap[:, 0]
    grid = np.unique(bp.original)
    return InstabilityBand(0.025, 0.975, col, col, grid, np.interp(grid, bp.original, col) if grid.size > 1
                           else col[:1], np.interp(grid, bp.original, col) if grid.size > 1 else col[:1],
                           col, col, span)


def subgroup_stability(bp, span=DEFAULT_SPAN, n_grid=DEFAULT_GRID, min_size=2):
    """Per-label reports restricted to each subgroup's rows.

    Labels with fewer than ``min_size`` members are skipped with a warning.
    """
    if bp.subgroup is None:
        raise DataError("no subgroup labels attached to these predictions")
    out = {}
    for label in sorted(set(bp.subgroup)):
        mask = bp.subgroup == label
        if mask.sum() < min_size:
            warnings.warn(f"subgroup {label!r} has {int(mask.sum())} member(s); excluded", stacklevel=2)
            continue
        sub = bp.subset(mask)
        out[label] = build_report(sub, span=span, n_grid=n_grid, subgroups=False)
    return out
