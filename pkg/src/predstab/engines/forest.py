"""Random-forest risk models, optionally Platt-recalibrated on a held-out split."""

import math

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .._random import as_generator, draw_seed
from .._validation import check_both_classes, clamp_risk, safe_logit
from ..exceptions import SplitError
from ._base import RiskModel
from .logistic import irls_logistic


def default_mtry(n_features):
    return max(1, int(math.floor(math.sqrt(n_features))))


class RandomForestRisk(RiskModel):
    """Bagged CART trees with Gini splits; risk is the mean leaf event fraction.

    ``mtry`` predictors are sampled without replacement at every split
    (default ``floor(sqrt(P))``) and nodes with fewer than ``min_node``
    members are not split. Tree growing is delegated to scikit-learn.
    """

    engine = "random_forest"

    def __init__(self, n_trees=500, mtry=None, min_node=10, random_state=None):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node = min_node
        self.random_state = random_state

    def fit(self, X, y):
        # single-class data is allowed here: every leaf is pure, so the forest is constant
        X, y = self._validate_fit(X, y)
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        mtry = default_mtry(X.shape[1]) if self.mtry is None else int(self.mtry)
        seed = draw_seed(as_generator(self.random_state))
        self.forest_ = RandomForestClassifier(
            n_estimators=self.n_trees,
            criterion="gini",
            max_features=min(mtry, X.shape[1]),
            min_samples_split=max(2, int(self.min_node)),
            min_samples_leaf=1,
            bootstrap=True,
            random_state=seed,
            n_jobs=1,
        ).fit(X, y)
        self.mtry_ = mtry
        return self

    def predict_risk(self, X):
        X = self._validate_predict(X)
        proba = self.forest_.predict_proba(X)
        # a bootstrap resample of a tiny node can leave one class unseen by the forest
        col = list(self.forest_.classes_).index(1) if 1 in self.forest_.classes_ else None
        p = np.zeros(X.shape[0]) if col is None else proba[:, col]
        return clamp_risk(p)

    def _export(self):
        depths = [est.get_depth() for est in self.forest_.estimators_]
        leaves = [est.get_n_leaves() for est in self.forest_.estimators_]
        return {
            "n_trees": len(self.forest_.estimators_),
            "mtry": self.mtry_,
            "min_node": self.min_node,
            "mean_depth": float(np.mean(depths)),
            "mean_leaves": float(np.mean(leaves)),
        }


class PlattRecalibratedForest(RiskModel):
    """Forest fit on a random development part, recalibrated on the rest.

    The recalibration is a logistic regression of the outcome on the
    clamped logit of the forest risk: ``expit(a + b * logit(p_forest))``.
    Default split sizes put 40% of rows in the recalibration part. The
    split is redrawn (up to ``max_split_attempts``) until both parts contain
    both outcome classes.
    """

    engine = "rf_platt"

    def __init__(self, n_trees=500, mtry=None, min_node=10, dev_size=None, recal_size=None,
                 max_split_attempts=100, random_state=None):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node = min_node
        self.dev_size = dev_size
        self.recal_size = recal_size
        self.max_split_attempts = max_split_attempts
        self.random_state = random_state

    def _split_sizes(self, n):
        dev, recal = self.dev_size, self.recal_size
        if dev is None and recal is None:
            recal = int(round(0.4 * n))
        if dev is None:
            dev = n - recal
        if recal is None:
            recal = n - dev
        if dev < 1 or recal < 1 or dev + recal > n:
            raise SplitError(f"development ({dev}) + recalibration ({recal}) sizes do not fit in {n} rows")
        return int(dev), int(recal)

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        check_both_classes(y)
        rng = as_generator(self.random_state)
        n_dev, n_recal = self._split_sizes(X.shape[0])
        for _ in range(self.max_split_attempts):
            perm = rng.permutation(X.shape[0])
            dev, recal = perm[:n_dev], perm[n_dev:n_dev + n_recal]
            if 0 < y[dev].sum() < n_dev and 0 < y[recal].sum() < n_recal:
                break
        else:
            raise SplitError(
                f"no split with both outcome classes in each part after {self.max_split_attempts} attempts"
            )

        self.forest_ = RandomForestRisk(
            n_trees=self.n_trees, mtry=self.mtry, min_node=self.min_node, random_state=draw_seed(rng)
        ).fit(X[dev], y[dev])
        lp = safe_logit(self.forest_.predict_risk(X[recal]))
        recal_fit = irls_logistic(lp[:, None], y[recal])
        self.recal_intercept_ = recal_fit.intercept
        self.recal_slope_ = float(recal_fit.coef[0])
        self.dev_index_ = dev
        self.recal_index_ = recal
        return self

    def predict_forest(self, X):
        self._validate_predict(X)
        return self.forest_.predict_risk(X)

    def predict_risk(self, X):
        lp = safe_logit(self.predict_forest(X))
        return clamp_risk(1.0 / (1.0 + np.exp(-(self.recal_intercept_ + self.recal_slope_ * lp))))

    def _export(self):
        return {
            "forest": self.forest_._export(),
            "recalibration_intercept": self.recal_intercept_,
            "recalibration_slope": self.recal_slope_,
            "dev_size": int(self.dev_index_.size),
            "recal_size": int(self.recal_index_.size),
        }
