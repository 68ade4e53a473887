"""Loess smoothing, calibration curves and decision curves."""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_paired, check_threshold
from .exceptions import CurveError

DEFAULT_SPAN = 0.5
DEFAULT_GRID = 100
DEFAULT_THRESHOLDS = np.round(np.arange(1, 51) / 100.0, 2)

# cap on distance-matrix entries per evaluation block
_BLOCK = 1 << 22


@dataclass(frozen=True)
class Curve:
    x: np.ndarray
    y: np.ndarray
    kind: str
    bandwidth: Optional[float] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise CurveError("curve x and y must be equal-length vectors")
        if np.any(np.diff(x) <= 0):
            raise CurveError("curve x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


class Loess:
    """Local linear regression with tricube weights (no robustness iterations).

    At each evaluation point the ``ceil(span * n)`` nearest observations are
    weighted by ``(1 - (d / h)**3)**3``, where ``h`` is the distance to the
    farthest of them, and a weighted least-squares line is fitted.
    """

    def __init__(self, x, y, span=DEFAULT_SPAN):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise CurveError("loess needs equal-length 1-d x and y")
        if x.size < 5:
            raise CurveError(f"loess needs at least 5 points, got {x.size}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise CurveError("loess inputs must be finite")
        if not 0.0 < span <= 1.0:
            raise CurveError(f"span must lie in (0, 1], got {span}")
        if np.ptp(x) == 0:
            raise CurveError("x has no spread; nothing to smooth over")
        self.x = x
        self.y = y
        self.span = float(span)
        self.q = min(x.size, math.ceil(span * x.size))
        if self.q < 3:
            raise CurveError(f"span {span} leaves {self.q} point(s) per local window; need at least 3")
        self.lo = float(x.min())
        self.hi = float(x.max())

    def __call__(self, x0):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if np.any(x0 < self.lo) or np.any(x0 > self.hi):
            raise CurveError(f"evaluation points must lie within [{self.lo}, {self.hi}]")
        out = np.empty(x0.size)
        step = max(1, _BLOCK // self.x.size)
        for start in range(0, x0.size, step):
            out[start:start + step] = self._eval_block(x0[start:start + step])
        return out

    def _eval_block(self, pts):
        x, y, q = self.x, self.y, self.q
        d = np.abs(x[None, :] - pts[:, None])
        h = np.partition(d, q - 1, axis=1)[:, q - 1]
        if q == x.size:
            # whole sample in the window: widen h so the farthest point keeps a positive weight
            h = h * (1.0 + 1e-12)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = d / h[:, None]
        w = np.where(u < 1.0, (1.0 - u**3) ** 3, 0.0)
        # heavy ties at the window edge can zero every weight; fall back to the window itself
        empty = ~np.any(w > 0, axis=1)
        if np.any(empty):
            w[empty] = (d[empty] <= h[empty, None]).astype(float)
        sw = w.sum(axis=1)
        xm = (w * x).sum(axis=1) / sw
        ym = (w * y).sum(axis=1) / sw
        dx = x[None, :] - xm[:, None]
        sxx = (w * dx * dx).sum(axis=1)
        sxy = (w * dx * (y[None, :] - ym[:, None])).sum(axis=1)
        scale = np.maximum(np.abs(xm), 1.0)
        flat = sxx <= 1e-14 * sw * scale * scale
        slope = np.where(flat, 0.0, sxy / np.where(flat, 1.0, sxx))
        return ym + slope * (pts - xm)


def loess_fit(x, y, span=DEFAULT_SPAN, degree=1):
    """Fit a degree-1 loess smoother and return it as a callable evaluator."""
    if degree != 1:
        raise CurveError("only local linear (degree 1) loess is supported")
    return Loess(x, y, span)


def calibration_curve(risks, outcomes, span=DEFAULT_SPAN, n_grid=DEFAULT_GRID):
    """Loess of observed outcome on predicted risk over the observed risk range."""
    risks, outcomes = check_paired(risks, outcomes)
    smoother = Loess(risks, outcomes.astype(float), span)
    grid = np.linspace(smoother.lo, smoother.hi, n_grid)
    return Curve(grid, np.clip(smoother(grid), 0.0, 1.0), "calibration", span)


def net_benefit(risks, outcomes, t):
    """``TP/n - FP/n * t/(1-t)``, treating everyone with risk >= t."""
    risks, outcomes = check_paired(risks, outcomes)
    t = check_threshold(t)
    treat = risks >= t
    n = outcomes.size
    tp = np.count_nonzero(treat & (outcomes == 1))
    fp = np.count_nonzero(treat & (outcomes == 0))
    return tp / n - fp / n * (t / (1.0 - t))


def treat_all_net_benefit(outcomes, t):
    t = check_threshold(t)
    return _treat_all(float(np.mean(outcomes)), t)


def _treat_all(prev, t):
    # prev - (1-prev) * t/(1-t), arranged so that t == prev gives exactly 0
    return (prev * (1.0 - t) - (1.0 - prev) * t) / (1.0 - t)


@dataclass(frozen=True)
class DecisionCurves:
    model: Curve
    treat_all: Curve
    treat_none: Curve


def decision_curve(risks, outcomes, thresholds=None):
    risks, outcomes = check_paired(risks, outcomes)
    ts = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, dtype=float)
    for t in ts:
        check_threshold(t)
    if np.any(np.diff(ts) <= 0):
        raise CurveError("thresholds must be strictly increasing")
    prev = float(np.mean(outcomes))
    n = outcomes.size
    # sort once so every threshold is a suffix count
    order = np.argsort(risks, kind="stable")
    r_sorted = risks[order]
    cum_events = np.concatenate([[0], np.cumsum(outcomes[order][::-1])])[::-1]
    first = np.searchsorted(r_sorted, ts, side="left")
    tp = cum_events[first]
    fp = (n - first) - tp
    odds = ts / (1.0 - ts)
    model = tp / n - fp / n * odds
    return DecisionCurves(
        model=Curve(ts, model, "decision"),
        treat_all=Curve(ts, _treat_all(prev, ts), "decision"),
        treat_none=Curve(ts, np.zeros_like(ts), "decision"),
    )


def write_curves_csv(path, series):
    """Write ``{series_id: Curve}`` to a long ``x,y,series`` CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "series"])
        for sid, curve in series.items():
            for xv, yv in zip(curve.x, curve.y):
                w.writerow([fmt(xv), fmt(yv), sid])


def fmt(v):
    return repr(float(v))
