"""L1-penalized logistic regression by coordinate descent, with CV tuning.

Objective on the standardized design ``Z`` (population SD scaling):

    -(1/N) * loglik(b0, beta) + lam * sum_j |beta_j|

The intercept is unpenalized. Each outer iteration forms the IRLS quadratic
approximation at the current estimate and minimizes its penalized version
by cyclic coordinate descent; solutions along the decreasing lambda path are
warm-started from the previous one.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .._random import as_generator
from .._validation import check_both_classes, clamp_risk
from ..exceptions import ConvergenceError, FitError
from ._base import LinearRiskModel
from .logistic import standardize

_W_FLOOR = 1e-5


@njit(cache=True)
def _cd_path(Z, y, lambdas, b0_init, tol_inner, tol_outer, max_outer, max_inner, null_dev, fdev, max_dev_ratio):
    n, p = Z.shape
    n_lam = lambdas.shape[0]
    b0s = np.empty(n_lam)
    betas = np.zeros((n_lam, p))
    devs = np.empty(n_lam)
    status = np.zeros(n_lam, dtype=np.int64)
    n_done = n_lam

    b0 = b0_init
    beta = np.zeros(p)
    eta = np.full(n, b0)
    w = np.empty(n)
    r = np.empty(n)
    v = np.empty(p)

    for k in range(n_lam):
        lam = lambdas[k]
        done = False
        # coordinate sweeps are budgeted per path point, across outer iterations
        budget = max_inner
        for _outer in range(max_outer):
            sw = 0.0
            for i in range(n):
                mu = 1.0 / (1.0 + np.exp(-eta[i]))
                wi = mu * (1.0 - mu)
                if wi < _W_FLOOR:
                    wi = _W_FLOOR
                w[i] = wi
                r[i] = (y[i] - mu) / wi
                sw += wi
            sw /= n
            for j in range(p):
                s = 0.0
                for i in range(n):
                    s += w[i] * Z[i, j] * Z[i, j]
                v[j] = s / n
            b0_old = b0
            beta_old = beta.copy()

            inner_ok = False
            full_sweep = True
            while budget > 0:
                budget -= 1
                maxd = 0.0
                s = 0.0
                for i in range(n):
                    s += w[i] * r[i]
                d = s / n / sw
                if d != 0.0:
                    b0 += d
                    for i in range(n):
                        r[i] -= d
                    if sw * d * d > maxd:
                        maxd = sw * d * d
                for j in range(p):
                    if v[j] == 0.0 or (not full_sweep and beta[j] == 0.0):
                        continue
                    g = 0.0
                    for i in range(n):
                        g += w[i] * Z[i, j] * r[i]
                    g = g / n + v[j] * beta[j]
                    if g > lam:
                        new = (g - lam) / v[j]
                    elif g < -lam:
                        new = (g + lam) / v[j]
                    else:
                        new = 0.0
                    d = new - beta[j]
                    if d != 0.0:
                        beta[j] = new
                        for i in range(n):
                            r[i] -= d * Z[i, j]
                        if v[j] * d * d > maxd:
                            maxd = v[j] * d * d
                if maxd < tol_inner:
                    if full_sweep:
                        inner_ok = True
                        break
                    # active set settled; confirm with a sweep over all coordinates
                    full_sweep = True
                else:
                    full_sweep = False
            if not inner_ok:
                status[k] = 2

            change = abs(b0 - b0_old)
            for i in range(n):
                s = b0
                for j in range(p):
                    s += Z[i, j] * beta[j]
                eta[i] = s
            for j in range(p):
                if abs(beta[j] - beta_old[j]) > change:
                    change = abs(beta[j] - beta_old[j])
            if change < tol_outer:
                done = True
                break
        if not done:
            status[k] = 1

        dev = 0.0
        for i in range(n):
            e = eta[i]
            # log(1 + exp(e)) without overflow
            if e > 0:
                lse = e + np.log1p(np.exp(-e))
            else:
                lse = np.log1p(np.exp(e))
            dev += y[i] * e - lse
        devs[k] = -2.0 * dev
        b0s[k] = b0
        betas[k, :] = beta
        if status[k] != 0:
            n_done = k + 1
            break
        if fdev > 0.0 and k > 0:
            if 1.0 - devs[k] / null_dev > max_dev_ratio:
                n_done = k + 1
                break
            if (devs[k - 1] - devs[k]) / null_dev < fdev * (1.0 - devs[k] / null_dev) and k >= 4:
                n_done = k + 1
                break
    return b0s[:n_done], betas[:n_done], devs[:n_done], status[:n_done]


@dataclass
class LassoPath:
    """Solutions along a lambda path; coefficients on the original scale."""

    lambdas: np.ndarray
    intercepts: np.ndarray
    coefs: np.ndarray
    deviance: np.ndarray
    std_intercepts: np.ndarray
    std_coefs: np.ndarray
    mean: np.ndarray
    scale: np.ndarray


def lambda_max(X, y):
    """Smallest penalty at which every slope is zero (standardized scale)."""
    mean, scale = standardize(X)
    Z = (X - mean) / scale
    if Z.shape[1] == 0:
        return 0.0
    # relative slack so rounding inside the solver cannot leave a 1e-16 slope at lambda_max
    return float(np.max(np.abs(Z.T @ (y - y.mean()))) / X.shape[0]) * (1.0 + 1e-10)


def lambda_sequence(X, y, n_lambda=100, lambda_min_ratio=None):
    n, p = X.shape
    if lambda_min_ratio is None:
        lambda_min_ratio = 1e-4 if n > p else 1e-2
    lmax = lambda_max(X, y)
    if n_lambda == 1:
        return np.array([lmax])
    return lmax * np.logspace(0.0, np.log10(lambda_min_ratio), n_lambda)


def lasso_path(X, y, lambdas, early_stop=True, tol_inner=1e-20, tol_outer=1e-8, max_outer=100, max_inner=10_000):
    """Solve the penalized problem at each value of decreasing ``lambdas``.

    With ``early_stop`` the path ends once the fraction of null deviance
    explained exceeds 0.999 or its relative gain between consecutive
    lambdas falls below 1e-5, and a point that fails to converge (typically
    quasi-separation at tiny penalties) ends the path just before it. The
    returned path is then a prefix of ``lambdas``.

    Raises
    ------
    ConvergenceError
        If a path point fails to converge and cannot be dropped (the first
        point, or any point without ``early_stop``); the message names its index.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) > 0):
        raise ValueError("lambdas must be non-increasing")
    mean, scale = standardize(X)
    Z = np.asfortranarray((X - mean) / scale)
    ybar = y.mean()
    b0_init = np.log(ybar / (1.0 - ybar))
    null_dev = -2.0 * float(np.sum(y * np.log(ybar) + (1 - y) * np.log1p(-ybar)))
    fdev, max_ratio = (1e-5, 0.999) if early_stop else (0.0, 2.0)
    b0s, betas, devs, status = _cd_path(
        Z, y, lambdas, b0_init, tol_inner, tol_outer, max_outer, max_inner, null_dev, fdev, max_ratio
    )
    lambdas = lambdas[: b0s.size]
    bad = np.flatnonzero(status)
    if bad.size and early_stop and bad[0] > 0:
        k = int(bad[0])
        lambdas, b0s, betas, devs = lambdas[:k], b0s[:k], betas[:k], devs[:k]
        bad = bad[:0]
    if bad.size:
        k = int(bad[0])
        raise ConvergenceError(
            f"lasso path solver did not converge at lambda index {k} (lambda={lambdas[k]:.6g})",
            trace=[(int(i), float(lambdas[i]), int(status[i])) for i in bad],
        )
    coefs = betas / scale
    intercepts = b0s - coefs @ mean
    return LassoPath(lambdas, intercepts, coefs, devs, b0s, betas, mean, scale)


def stratified_folds(y, n_folds, rng):
    """Assign fold labels so each class is spread as evenly as possible."""
    y = np.asarray(y)
    folds = np.empty(y.size, dtype=np.int64)
    start = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (start + np.arange(idx.size)) % n_folds
        start = (start + idx.size) % n_folds
    return folds


def binomial_deviance(y, p):
    p = clamp_risk(p)
    return -2.0 * (y * np.log(p) + (1 - y) * np.log1p(-p))


class LassoLogistic(LinearRiskModel):
    """LASSO logistic regression at a fixed penalty ``alpha``.

    The path is traced from lambda_max down to ``alpha`` for warm starts; an
    ``alpha`` of 0 gives the unpenalized maximum-likelihood fit.
    """

    engine = "lasso"

    def __init__(self, alpha=0.0, n_lambda=100, lambda_min_ratio=None):
        self.alpha = alpha
        self.n_lambda = n_lambda
        self.lambda_min_ratio = lambda_min_ratio

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        check_both_classes(y)
        lmax = lambda_max(X, y)
        if self.alpha >= lmax:
            lams = np.array([lmax])
        else:
            lams = lambda_sequence(X, y, self.n_lambda, self.lambda_min_ratio)
            lams = np.append(lams[lams > self.alpha], self.alpha)
        path = lasso_path(X, y, lams, early_stop=False)
        if self.alpha >= lmax:
            # beyond lambda_max the solution does not move
            lams[-1] = self.alpha
        self.lambda_ = float(lams[-1])
        self.intercept_ = float(path.intercepts[-1])
        self.coef_ = path.coefs[-1].copy()
        self.std_intercept_ = float(path.std_intercepts[-1])
        self.std_coef_ = path.std_coefs[-1].copy()
        self.x_mean_, self.x_scale_ = path.mean, path.scale
        return self


class LassoLogisticCV(LinearRiskModel):
    """LASSO logistic regression with lambda chosen by stratified k-fold CV.

    The lambda minimizing mean held-out binomial deviance (``lambda.min``) is
    selected; the returned model is the full-data path solution at it.

    Attributes
    ----------
    lambda_ : selected penalty (standardized scale)
    lambdas_ : the full-data path
    cv_deviance_ : mean held-out deviance per path point
    path_deviance_ : full-data training deviance per path point
    fold_ids_ : fold labels used for CV
    """

    engine = "lasso_cv"

    def __init__(self, n_folds=10, n_lambda=100, lambda_min_ratio=None, random_state=None):
        self.n_folds = n_folds
        self.n_lambda = n_lambda
        self.lambda_min_ratio = lambda_min_ratio
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        check_both_classes(y)
        if self.n_folds < 2:
            raise ValueError("n_folds must be at least 2")
        n = X.shape[0]
        if n < self.n_folds:
            raise FitError(f"{n} rows cannot be split into {self.n_folds} folds")
        if min(y.sum(), n - y.sum()) < 2:
            raise FitError("too few rows of the minority outcome class for cross-validation")

        rng = as_generator(self.random_state)
        lams = lambda_sequence(X, y, self.n_lambda, self.lambda_min_ratio)
        full = lasso_path(X, y, lams)
        folds = stratified_folds(y, self.n_folds, rng)

        lams = full.lambdas
        fold_dev = []
        for k in range(self.n_folds):
            test = folds == k
            train = ~test
            if y[train].min() == y[train].max():
                raise FitError(f"training part of fold {k} lacks an outcome class")
            path = lasso_path(X[train], y[train], lams)
            lp = path.intercepts[None, :] + X[test] @ path.coefs.T
            p = 1.0 / (1.0 + np.exp(-lp))
            fold_dev.append(binomial_deviance(y[test][:, None], p).sum(axis=0))
        # only lambdas reached by every fold are comparable
        n_common = min(d.size for d in fold_dev)
        lams = lams[:n_common]
        cv = np.sum([d[:n_common] for d in fold_dev], axis=0) / n

        best = int(np.argmin(cv))
        self.lambdas_ = lams
        self.cv_deviance_ = cv
        self.path_deviance_ = full.deviance[:n_common]
        self.fold_ids_ = folds
        self.lambda_index_ = best
        self.lambda_ = float(lams[best])
        self.intercept_ = float(full.intercepts[best])
        self.coef_ = full.coefs[best].copy()
        self.std_intercept_ = float(full.std_intercepts[best])
        self.std_coef_ = full.std_coefs[best].copy()
        self.x_mean_, self.x_scale_ = full.mean, full.scale
        return self

    def _export(self):
        out = super()._export()
        out.update(
            selected_lambda=self.lambda_,
            lambda_path=[float(v) for v in self.lambdas_],
            cv_deviance=[float(v) for v in self.cv_deviance_],
        )
        return out
