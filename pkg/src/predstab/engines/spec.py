"""Declarative model-building strategies."""

from dataclasses import asdict, dataclass, replace
from typing import Optional

from ..dataset import coerce_fields, read_flat_config
from ..exceptions import DataError
from .forest import PlattRecalibratedForest, RandomForestRisk
from .lasso import LassoLogisticCV
from .logistic import LogisticRegressionIRLS
from .shrinkage import UniformShrinkageLogistic

ENGINES = ("logistic_full", "lasso_cv", "uniform_shrinkage", "random_forest", "rf_platt")


@dataclass(frozen=True)
class ModelSpec:
    """An engine name plus its hyperparameters, as flat fields.

    Randomness is not part of the spec: callers hand each fit its own
    stream (see :mod:`predstab.stability` for the derivation rule).
    """

    engine: str = "lasso_cv"
    n_folds: int = 10
    n_lambda: int = 100
    lambda_min_ratio: Optional[float] = None
    n_trees: int = 500
    mtry: Optional[int] = None
    min_node: int = 10
    dev_size: Optional[int] = None
    recal_size: Optional[int] = None
    max_iter: int = 100

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise DataError(f"unknown engine {self.engine!r}; choose from {', '.join(ENGINES)}")
        if self.n_folds < 2:
            raise DataError("n_folds must be at least 2")
        if self.n_trees < 1:
            raise DataError("n_trees must be at least 1")
        if self.n_lambda < 1:
            raise DataError("n_lambda must be at least 1")

    @property
    def uses_randomness(self):
        return self.engine in ("lasso_cv", "random_forest", "rf_platt")

    def build(self, random_state=None):
        """A fresh, unfitted scikit-learn compatible estimator for this strategy."""
        if self.engine == "logistic_full":
            return LogisticRegressionIRLS(max_iter=self.max_iter)
        if self.engine == "uniform_shrinkage":
            return UniformShrinkageLogistic(max_iter=self.max_iter)
        if self.engine == "lasso_cv":
            return LassoLogisticCV(n_folds=self.n_folds, n_lambda=self.n_lambda,
                                   lambda_min_ratio=self.lambda_min_ratio, random_state=random_state)
        if self.engine == "random_forest":
            return RandomForestRisk(n_trees=self.n_trees, mtry=self.mtry, min_node=self.min_node,
                                    random_state=random_state)
        return PlattRecalibratedForest(n_trees=self.n_trees, mtry=self.mtry, min_node=self.min_node,
                                       dev_size=self.dev_size, recal_size=self.recal_size,
                                       random_state=random_state)

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def spec_from_mapping(values, source="config"):
    """Build a ModelSpec from string key/values; unknown keys raise."""
    values = dict(values)
    kwargs = coerce_fields(ModelSpec, values, source=source)
    if values:
        raise DataError(f"{source}: unknown key(s) {', '.join(sorted(values))}")
    return ModelSpec(**kwargs)


def load_model_spec(path):
    return spec_from_mapping(read_flat_config(path), source=str(path))
