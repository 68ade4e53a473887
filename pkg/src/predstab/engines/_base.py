import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .._validation import check_binary, risk_from_lp


class RiskModel(ClassifierMixin, BaseEstimator):
    """Common surface for the risk engines.

    Subclasses implement ``fit`` and ``predict_risk``; ``predict_proba`` and
    ``predict`` follow the scikit-learn classifier contract on top of it.
    """

    engine = None

    def _validate_fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, ensure_min_features=0)
        y = check_binary(y)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return X, y

    def _validate_predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float, ensure_min_features=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was fit with {self.n_features_in_}")
        return X

    def predict_proba(self, X):
        p = self.predict_risk(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_risk(X) >= 0.5).astype(np.int64)

    def to_dict(self):
        check_is_fitted(self, "n_features_in_")
        out = {"engine": self.engine, "params": _jsonable(self.get_params(deep=False))}
        names = getattr(self, "feature_names_in_", None)
        if names is not None:
            out["predictor_names"] = [str(n) for n in names]
        out.update(self._export())
        return out

    def _export(self):
        return {}


class LinearRiskModel(RiskModel):
    """A model whose risk is ``expit(intercept_ + X @ coef_)``."""

    def decision_function(self, X):
        X = self._validate_predict(X)
        return self.intercept_ + X @ self.coef_

    def predict_risk(self, X):
        return risk_from_lp(self.decision_function(X))

    def _export(self):
        return {"intercept": float(self.intercept_), "coef": [float(c) for c in self.coef_]}


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, (np.integer,)):
            v = int(v)
        elif isinstance(v, (np.floating,)):
            v = float(v)
        elif isinstance(v, np.random.Generator):
            v = repr(v)
        out[k] = v
    return out
