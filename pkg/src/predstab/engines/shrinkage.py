"""Heuristic uniform shrinkage of a full logistic model."""

import numpy as np

from .._validation import check_both_classes
from ..exceptions import ShrinkageError
from ._base import LinearRiskModel
from .logistic import irls_logistic, null_log_likelihood


def heuristic_shrinkage(chi2_lr, n_params):
    """``(chi2 - P) / chi2``; undefined (raises) when ``chi2 <= P``."""
    if chi2_lr <= n_params:
        raise ShrinkageError(
            f"likelihood-ratio chi-square {chi2_lr:.4g} does not exceed the {n_params} predictor "
            "parameters; shrinkage factor would be non-positive"
        )
    return (chi2_lr - n_params) / chi2_lr


class UniformShrinkageLogistic(LinearRiskModel):
    """Full logistic fit, slopes scaled by the heuristic factor, intercept refit.

    The intercept is re-estimated by maximum likelihood with the shrunken
    linear predictor (without intercept) as an offset, which forces the mean
    predicted risk to equal the observed event fraction.

    Attributes
    ----------
    shrinkage_ : the factor ``s``
    chi2_lr_ : likelihood-ratio statistic of the full fit against intercept only
    full_intercept_, full_coef_ : the unshrunken fit
    """

    engine = "uniform_shrinkage"

    def __init__(self, max_iter=100, separation_threshold=30.0):
        self.max_iter = max_iter
        self.separation_threshold = separation_threshold

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        check_both_classes(y)
        full = irls_logistic(X, y, max_iter=self.max_iter, separation_threshold=self.separation_threshold)
        chi2 = 2.0 * (full.loglik - null_log_likelihood(y))
        s = heuristic_shrinkage(chi2, X.shape[1])
        coef = s * full.coef
        offset = X @ coef
        refit = irls_logistic(np.empty((X.shape[0], 0)), y, offset=offset, max_iter=self.max_iter, tol=1e-12)

        self.full_intercept_ = full.intercept
        self.full_coef_ = full.coef
        self.chi2_lr_ = chi2
        self.shrinkage_ = s
        self.coef_ = coef
        self.intercept_ = refit.intercept
        return self

    def _export(self):
        out = super()._export()
        out.update(shrinkage=self.shrinkage_, chi2_lr=self.chi2_lr_, full_intercept=self.full_intercept_,
                   full_coef=[float(c) for c in self.full_coef_])
        return out
