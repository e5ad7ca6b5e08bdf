"""Exception hierarchy shared by all estimators and I/O routines."""


class HoiError(Exception):
    """Base class for every error raised by hoinfo."""


class InputError(HoiError, ValueError):
    """Malformed or invalid input data (files, arrays, parameters)."""


class SingularCovarianceError(HoiError, ArithmeticError):
    """Covariance (or one of its principal minors) is not positive definite.

    ``tuple`` holds the channel tuple being evaluated when known, and
    ``excluded`` the position left out when a leave-one-out minor failed.
    """

    def __init__(self, message, tuple=None, excluded=None):
        super().__init__(message)
        self.tuple = tuple
        self.excluded = excluded


class DegenerateBandwidthError(HoiError, ValueError):
    """Median heuristic cannot resolve a bandwidth (all samples identical)."""


class EstimatorError(HoiError, ArithmeticError):
    """Numerical failure inside an entropy estimator."""

    def __init__(self, message, tuple=None):
        super().__init__(message)
        self.tuple = tuple


class DefectThresholdExceeded(HoiError):
    """Too many tuples failed during a sweep; ``result`` keeps the partial output."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
