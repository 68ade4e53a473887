"""Model-building strategies with a common fit / predict-risk contract.

The estimator classes follow scikit-learn conventions and can be used on
bare arrays; the ``fit_*`` functions take a :class:`~predstab.dataset.Dataset`
and record its predictor names so :func:`predict` can check the schema.
"""

import json

import numpy as np
from sklearn.base import clone

from .._random import as_generator, draw_seed
from ..exceptions import DataError
from ._base import LinearRiskModel, RiskModel
from .forest import PlattRecalibratedForest, RandomForestRisk, default_mtry
from .lasso import LassoLogistic, LassoLogisticCV, lambda_max, lasso_path, stratified_folds
from .logistic import LogisticRegressionIRLS, irls_logistic
from .shrinkage import UniformShrinkageLogistic, heuristic_shrinkage
from .spec import ENGINES, ModelSpec, load_model_spec, spec_from_mapping

__all__ = [
    "ENGINES", "LassoLogistic", "LassoLogisticCV", "LinearRiskModel", "LogisticRegressionIRLS",
    "ModelSpec", "PlattRecalibratedForest", "RandomForestRisk", "RiskModel", "UniformShrinkageLogistic",
    "default_mtry", "fit_estimator", "fit_lasso_cv", "fit_logistic", "fit_random_forest", "fit_rf_platt",
    "fit_spec", "fit_uniform_shrinkage", "heuristic_shrinkage", "irls_logistic", "lambda_max",
    "lasso_path", "load_model_spec", "model_to_json", "predict", "spec_from_mapping", "stratified_folds",
]


def fit_estimator(estimator, ds, rng=None):
    """Clone ``estimator``, seed it from ``rng`` if it takes a random_state, fit on ``ds``."""
    est = clone(estimator)
    if "random_state" in est.get_params(deep=False):
        est.set_params(random_state=draw_seed(as_generator(rng)))
    est.fit(ds.predictors, ds.outcome)
    est.feature_names_in_ = np.array(ds.predictor_names, dtype=object)
    return est


def fit_spec(spec, ds, rng=None):
    return fit_estimator(spec.build(), ds, rng)


def fit_logistic(ds):
    return fit_estimator(LogisticRegressionIRLS(), ds)


def fit_lasso_cv(ds, spec=None, rng=None):
    spec = (spec or ModelSpec()).with_overrides(engine="lasso_cv")
    return fit_spec(spec, ds, rng)


def fit_uniform_shrinkage(ds):
    return fit_estimator(UniformShrinkageLogistic(), ds)


def fit_random_forest(ds, spec=None, rng=None):
    spec = (spec or ModelSpec()).with_overrides(engine="random_forest")
    return fit_spec(spec, ds, rng)


def fit_rf_platt(ds, spec=None, rng=None):
    spec = (spec or ModelSpec()).with_overrides(engine="rf_platt")
    return fit_spec(spec, ds, rng)


def predict(model, ds):
    """Risks for every row of ``ds``; the predictor schema must match training."""
    names = getattr(model, "feature_names_in_", None)
    if names is not None:
        have = list(ds.predictor_names)
        want = list(names)
        for i in range(max(len(have), len(want))):
            a = have[i] if i < len(have) else None
            b = want[i] if i < len(want) else None
            if a != b:
                raise DataError(f"predictor schema mismatch at column {i}: expected {b!r}, got {a!r}")
    return model.predict_risk(ds.predictors)


def model_to_json(model, **extra):
    payload = model.to_dict()
    payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True)
