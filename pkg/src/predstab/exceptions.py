"""Exception hierarchy.

``FitError`` and its subclasses are the failures a bootstrap replicate may
log and skip; anything else propagates.
"""


class PredStabError(Exception):
    """Base class for all package errors."""


class DataError(PredStabError, ValueError):
    """Malformed or inadmissible input data."""


class FitError(PredStabError):
    """A model-building strategy could not produce a model."""


class SeparationError(FitError):
    """Maximum-likelihood estimates do not exist (complete or quasi-complete separation)."""


class ConvergenceError(FitError):
    """An iterative solver hit its iteration limit.

    ``trace`` holds whatever per-iteration diagnostics the solver recorded.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ShrinkageError(FitError):
    """Heuristic shrinkage factor is undefined (likelihood-ratio statistic <= P)."""


class SplitError(FitError):
    """No admissible development/recalibration split could be drawn."""


class StabilityError(PredStabError):
    """The bootstrap protocol itself cannot be completed."""


class CurveError(PredStabError, ValueError):
    """Smoothing or curve construction is not possible for the given inputs."""


class SingleClassError(FitError, DataError):
    """Fitting needs both outcome classes but only one is present."""
