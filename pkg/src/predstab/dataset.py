"""Datasets, CSV ingestion, bootstrap resampling and the simulation DGP."""

import configparser
import csv
import math
import os
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.special import expit

from .exceptions import DataError


@dataclass(frozen=True)
class Dataset:
    """Complete-case development data for a binary outcome.

    Arrays are copied and made read-only on construction, so instances can be
    shared freely between threads and worker processes.
    """

    predictors: np.ndarray
    predictor_names: tuple
    outcome: np.ndarray
    true_risk: Optional[np.ndarray] = None
    subgroup: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.array(self.predictors, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"predictors must be an N x P matrix with N, P >= 1; got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"missing or non-finite predictor value at row {r}, column {c}")
        names = tuple(str(n) for n in self.predictor_names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} predictor names for {X.shape[1]} columns")
        y = np.array(self.outcome)
        if y.shape != (X.shape[0],):
            raise DataError(f"outcome length {y.size} does not match {X.shape[0]} rows")
        bad = ~np.isin(y, (0, 1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataError(f"outcome must be 0/1; found {y[i]!r} at row {i}")
        y = y.astype(np.int64)
        tr = None
        if self.true_risk is not None:
            tr = np.array(self.true_risk, dtype=float)
            if tr.shape != y.shape:
                raise DataError("true_risk length does not match outcome")
            if not np.all((tr > 0) & (tr < 1)):
                raise DataError("true_risk must lie strictly inside (0, 1)")
        sg = None
        if self.subgroup is not None:
            sg = np.array([str(s) for s in self.subgroup], dtype=object)
            if sg.shape != y.shape:
                raise DataError("subgroup length does not match outcome")
        for arr in (X, y, tr, sg):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "predictor_names", names)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "true_risk", tr)
        object.__setattr__(self, "subgroup", sg)

    @property
    def n(self):
        return self.predictors.shape[0]

    @property
    def p(self):
        return self.predictors.shape[1]

    @property
    def n_events(self):
        return int(self.outcome.sum())

    def take(self, idx):
        """Rows ``idx`` (with repeats allowed), parallel fields carried along."""
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(
            predictors=self.predictors[idx],
            predictor_names=self.predictor_names,
            outcome=self.outcome[idx],
            true_risk=None if self.true_risk is None else self.true_risk[idx],
            subgroup=None if self.subgroup is None else self.subgroup[idx],
        )


def _parse_float(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} at row {row}, column {col!r}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {text!r} at row {row}, column {col!r}")
    return value


def load_csv(path, outcome_column, subgroup_column=None):
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Every column other than the outcome and subgroup is a predictor, kept in
    file order. Row numbers in error messages count the header as row 1.
    """
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]

    for col in (outcome_column, subgroup_column):
        if col is not None and col not in header:
            raise DataError(f"{path}: column {col!r} not in header {header}")
    if not rows:
        raise DataError(f"{path}: no data rows")

    y_idx = header.index(outcome_column)
    g_idx = header.index(subgroup_column) if subgroup_column is not None else None
    x_idx = [j for j in range(len(header)) if j not in (y_idx, g_idx)]
    if not x_idx:
        raise DataError(f"{path}: no predictor columns")

    X = np.empty((len(rows), len(x_idx)))
    y = np.empty(len(rows), dtype=np.int64)
    groups = []
    for i, r in enumerate(rows):
        line = i + 2
        if len(r) != len(header):
            raise DataError(f"{path}: row {line} has {len(r)} fields, expected {len(header)}")
        cells = [c.strip() for c in r]
        if any(c == "" or c.upper() == "NA" for c in cells):
            j = next(k for k, c in enumerate(cells) if c == "" or c.upper() == "NA")
            raise DataError(f"{path}: missing value at row {line}, column {header[j]!r}")
        yv = _parse_float(cells[y_idx], line, outcome_column)
        if yv not in (0.0, 1.0):
            raise DataError(f"{path}: outcome must be 0/1; found {cells[y_idx]!r} at row {line}")
        y[i] = int(yv)
        for k, j in enumerate(x_idx):
            X[i, k] = _parse_float(cells[j], line, header[j])
        if g_idx is not None:
            groups.append(_subgroup_label(cells[g_idx]))

    return Dataset(
        predictors=X,
        predictor_names=tuple(header[j] for j in x_idx),
        outcome=y,
        subgroup=groups if g_idx is not None else None,
    )


def _subgroup_label(text):
    # numeric labels are stringified canonically so "1" and "1.0" coincide
    try:
        v = float(text)
    except ValueError:
        return text
    return str(int(v)) if v.is_integer() else repr(v)


def bootstrap_indices(n, rng):
    return rng.integers(0, n, size=n)


def bootstrap_sample(ds, rng):
    """Resample ``ds.n`` rows uniformly with replacement."""
    return ds.take(bootstrap_indices(ds.n, rng))


@dataclass(frozen=True)
class SimConfig:
    """Data-generating process: ``logit(p) = intercept + slope * X``.

    ``X ~ Normal(0, x_sd)`` is the single genuine predictor; ``n_noise``
    independent standard-normal columns carry no signal.
    """

    n_dev: int = 100
    n_eval: int = 100_000
    x_sd: float = 2.0
    n_noise: int = 10
    intercept: float = 0.0
    slope: float = 1.0

    def __post_init__(self):
        if self.n_dev < 1 or self.n_eval < 1:
            raise DataError("n_dev and n_eval must be positive")
        if not self.x_sd > 0:
            raise DataError("x_sd must be positive")
        if self.n_noise < 0:
            raise DataError("n_noise must be non-negative")


def simulate_population(cfg, n, rng):
    """Draw ``n`` individuals from the DGP described by ``cfg``.

    Columns are ``X`` then ``Z1..Z{n_noise}``; X is drawn before the noise
    block and outcomes last, all from ``rng``.
    """
    if n < 1:
        raise DataError("n must be positive")
    x = rng.standard_normal(n) * cfg.x_sd
    z = rng.standard_normal((n, cfg.n_noise))
    risk = expit(cfg.intercept + cfg.slope * x)
    # expit saturates to exactly 0/1 in double precision only for |lp| > ~37
    risk = np.clip(risk, 1e-300, np.nextafter(1.0, 0.0))
    y = (rng.random(n) < risk).astype(np.int64)
    return Dataset(
        predictors=np.column_stack([x, z]),
        predictor_names=("X",) + tuple(f"Z{j + 1}" for j in range(cfg.n_noise)),
        outcome=y,
        true_risk=risk,
    )


def coerce_fields(cls, values, source="config"):
    """Convert string config values to the types of dataclass ``cls`` fields.

    Recognised keys are removed from ``values`` and returned as a kwargs
    dict; other keys are left in place for the caller to route or reject.
    """
    out = {}
    by_name = {f.name: f for f in fields(cls)}
    for key in list(values):
        if key not in by_name:
            continue
        raw = values.pop(key)
        out[key] = _coerce(by_name[key], raw, source)
    return out


def _coerce(f, raw, source):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    kind = f.type.__name__ if isinstance(f.type, type) else str(f.type)
    try:
        if text.lower() in ("none", "") and "Optional" in kind:
            return None
        if any(k in kind.lower() for k in ("sequence", "tuple", "list")):
            parts = [p for p in text.replace(" ", "").split(",") if p]
            return tuple(float(p) if "float" in kind else int(p) for p in parts)
        if "int" in kind and "float" not in kind:
            return int(text)
        if "float" in kind:
            return float(text)
        if "bool" in kind:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise DataError(f"{source}: invalid value {raw!r} for {f.name}") from None
    return text


def read_flat_config(path):
    """Parse a flat ``key = value`` file (``#`` comments) into a dict of strings."""
    if not os.path.isfile(path):
        raise DataError(f"no such config file: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        parser.read_string("[config]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise DataError(f"malformed config {path}: {str(exc).splitlines()[0]}") from None
    if parser.sections() != ["config"]:
        raise DataError(f"malformed config {path}: sections are not allowed")
    return dict(parser["config"])


def load_sim_config(path):
    """Build a :class:`SimConfig` from a flat config file; other keys are ignored."""
    values = read_flat_config(path)
    return SimConfig(**coerce_fields(SimConfig, values, source=str(path)))
