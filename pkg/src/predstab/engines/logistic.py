"""Unpenalized logistic regression by iteratively reweighted least squares."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..exceptions import ConvergenceError, SeparationError
from .._validation import check_both_classes
from ._base import LinearRiskModel


def log_likelihood(lp, y):
    """Bernoulli log-likelihood of outcomes ``y`` at linear predictor ``lp``."""
    return float(np.sum(y * lp - np.logaddexp(0.0, lp)))


def null_log_likelihood(y):
    n1 = float(np.sum(y))
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        return 0.0
    return n1 * np.log(n1 / y.size) + n0 * np.log(n0 / y.size)


def standardize(X):
    """Column means and population SDs; zero-variance columns get scale 1."""
    mean = X.mean(axis=0) if X.shape[1] else np.zeros(0)
    scale = X.std(axis=0) if X.shape[1] else np.zeros(0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


@dataclass
class IRLSResult:
    intercept: float
    coef: np.ndarray
    loglik: float
    n_iter: int
    trace: list = field(default_factory=list)


def irls_logistic(X, y, offset=None, max_iter=100, tol=1e-8, ll_tol=1e-10, separation_threshold=30.0):
    """Maximum-likelihood logistic regression with an unpenalized intercept.

    Newton steps are taken on the standardized design; coefficients are
    returned on the original scale. Convergence is declared when the largest
    coefficient change drops below ``tol`` or the log-likelihood gain below
    ``ll_tol``.

    Raises
    ------
    SeparationError
        A standardized coefficient exceeds ``separation_threshold``, or the
        likelihood has flattened while coefficients keep moving.
    ConvergenceError
        ``max_iter`` iterations without convergence.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    mean, scale = standardize(X)
    Z = np.column_stack([np.ones(n), (X - mean) / scale])

    ybar = np.clip(y.mean(), 1e-3, 1 - 1e-3)
    beta = np.zeros(p + 1)
    beta[0] = np.log(ybar / (1 - ybar)) if offset is None else 0.0
    lp = off + Z @ beta
    ll = log_likelihood(lp, y)
    trace = [(0, ll, np.nan)]

    for it in range(1, max_iter + 1):
        mu = expit(lp)
        w = mu * (1.0 - mu)
        grad = Z.T @ (y - mu)
        hess = (Z * w[:, None]).T @ Z
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]

        # step halving guards against overshoot far from the optimum
        for _ in range(30):
            new_beta = beta + step
            new_lp = off + Z @ new_beta
            new_ll = log_likelihood(new_lp, y)
            if new_ll >= ll - 1e-12 * abs(ll):
                break
            step = step / 2.0
        delta = float(np.max(np.abs(step)))
        gain = new_ll - ll
        beta, lp, ll = new_beta, new_lp, new_ll
        trace.append((it, ll, delta))

        if np.max(np.abs(beta[1:]), initial=0.0) > separation_threshold or abs(beta[0]) > separation_threshold:
            raise SeparationError(
                f"coefficients diverging (|standardized beta| > {separation_threshold:g} at iteration {it}); "
                "data appear separated"
            )
        if delta < tol:
            break
        if abs(gain) < ll_tol:
            if delta > 1e-3:
                raise SeparationError(
                    f"likelihood flat while coefficients still moving (step {delta:.3g}) at iteration {it}; "
                    "data appear quasi-completely separated"
                )
            break
    else:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", trace)

    coef = beta[1:] / scale
    intercept = float(beta[0] - np.dot(coef, mean))
    return IRLSResult(intercept=intercept, coef=coef, loglik=ll, n_iter=it, trace=trace)


class LogisticRegressionIRLS(LinearRiskModel):
    """Logistic regression forcing in every predictor, no penalty.

    Attributes
    ----------
    intercept_, coef_ : maximum-likelihood estimates on the original scale
    loglik_, loglik_null_ : fitted and intercept-only log-likelihoods
    n_iter_ : Newton iterations used
    trace_ : ``(iteration, loglik, max step)`` per iteration
    """

    engine = "logistic_full"

    def __init__(self, max_iter=100, tol=1e-8, ll_tol=1e-10, separation_threshold=30.0):
        self.max_iter = max_iter
        self.tol = tol
        self.ll_tol = ll_tol
        self.separation_threshold = separation_threshold

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        check_both_classes(y)
        res = irls_logistic(
            X, y,
            max_iter=self.max_iter, tol=self.tol, ll_tol=self.ll_tol,
            separation_threshold=self.separation_threshold,
        )
        self.intercept_ = res.intercept
        self.coef_ = res.coef
        self.loglik_ = res.loglik
        self.loglik_null_ = null_log_likelihood(y)
        self.n_iter_ = res.n_iter
        self.trace_ = res.trace
        return self

    def _export(self):
        out = super()._export()
        out.update(loglik=self.loglik_, loglik_null=self.loglik_null_, n_iter=self.n_iter_)
        return out
