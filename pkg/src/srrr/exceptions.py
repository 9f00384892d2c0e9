"""Exception types shared across the package.

The CLI maps these onto process exit codes: invalid parameters -> 2,
bad input data -> 3, solver failures -> 4.
"""


class SrrrError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SrrrError, ValueError):
    """A parameter is outside its documented range."""


class ShapeError(SrrrError, ValueError):
    """Matrix dimensions are inconsistent with the operation."""


class InputDataError(SrrrError, ValueError):
    """Input data is empty, non-numeric, or non-finite."""


class NotPositiveDefiniteError(SrrrError):
    """Cholesky factorization hit a non-positive pivot."""


class SingularSystemError(SrrrError):
    """Normal equations are rank deficient even after regularization."""


class SolverError(SrrrError):
    """An iterative solver failed (non-finite iterate or internal breakdown)."""


class ConvergenceError(SolverError):
    """Iteration limit reached before the tolerance was met.

    Carries the best iterate found so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateTruncationError(SolverError):
    """Sparsification zeroed out every entry of the iterate."""


class DegenerateFactorError(SolverError):
    """A unit-rank factor collapsed (u'Pu numerically zero)."""


class NearNullVectorError(SolverError):
    """The fast eigensolver could not locate a near-null sparse vector."""


class UndefinedMetricError(SrrrError, ValueError):
    """A metric is undefined for the given inputs (e.g. one-class AUC)."""


class InsufficientDataError(InputDataError):
    """Not enough observations for the requested transform."""
