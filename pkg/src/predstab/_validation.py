"""Input validation and probability helpers shared across modules."""

import numpy as np
from scipy.special import expit

from .exceptions import DataError, SingleClassError

EPS = 1e-10


def clamp_risk(p):
    """Clamp probabilities to ``[EPS, 1 - EPS]``."""
    return np.clip(np.asarray(p, dtype=float), EPS, 1.0 - EPS)


def safe_logit(p):
    p = clamp_risk(p)
    return np.log(p) - np.log1p(-p)


def risk_from_lp(lp):
    return clamp_risk(expit(lp))


def check_binary(y, name="outcome"):
    """Return ``y`` as an int array, raising if any value is not 0 or 1."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {y.shape}")
    if y.size == 0:
        raise DataError(f"{name} is empty")
    bad = ~np.isin(y, (0, 1))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(f"{name} must be 0/1; found {y[i]!r} at position {i}")
    return y.astype(np.int64)


def check_both_classes(y, what="fitting"):
    y = check_binary(y)
    n_events = int(y.sum())
    if n_events == 0 or n_events == y.size:
        raise SingleClassError(f"{what} requires both outcome classes; got {n_events} events in {y.size} rows")
    return y


def check_risks(p, name="risks"):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DataError(f"{name} contains non-finite values")
    return p


def check_paired(risks, outcomes):
    risks = check_risks(risks)
    outcomes = check_binary(outcomes)
    if risks.shape != outcomes.shape:
        raise DataError(f"risks and outcomes differ in length: {risks.size} vs {outcomes.size}")
    return risks, outcomes


def check_threshold(t):
    t = float(t)
    if not 0.0 < t < 1.0:
        raise DataError(f"threshold must lie strictly in (0, 1), got {t}")
    return t
