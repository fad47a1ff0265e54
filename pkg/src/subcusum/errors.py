"""Exception hierarchy shared across the package."""


class SubcusumError(Exception):
    """Base class for all package errors."""


class InvalidInput(SubcusumError, ValueError):
    pass


class EmptyComplement(SubcusumError, ValueError):
    """The basis already spans the ambient space."""


class DegenerateSpectrum(SubcusumError, ValueError):
    """Signal strengths too close together for the asymptotic formulas."""


class NoDetectableChange(SubcusumError, ValueError):
    """Post-change subspace lies inside the pre-change subspace."""


class ConvergenceError(SubcusumError, RuntimeError):
    pass


class ThresholdTooHigh(SubcusumError, RuntimeError):
    """Every Monte-Carlo replicate hit the run-length cap."""


class CalibrationFailed(SubcusumError, RuntimeError):
    pass


class ParseError(SubcusumError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
