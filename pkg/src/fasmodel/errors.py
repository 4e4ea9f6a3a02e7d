"""Exception hierarchy shared by all modules."""


class FasError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FasError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConstructionError(FasError, ValueError):
    """A model cannot be built from the given parameters."""


class AccuracyError(FasError, ArithmeticError):
    """A numerical routine could not reach its requested accuracy.

    Attributes:
        partial: best value obtained before giving up (scalar or array).
        detail: free-form dictionary with diagnostics.
    """

    def __init__(self, message, partial=None, detail=None):
        super().__init__(message)
        self.partial = partial
        self.detail = dict(detail or {})


class ConvergenceError(FasError, ArithmeticError):
    """An iterative solver stopped before converging.

    Attributes:
        residual: size of what was left to eliminate when the solver stopped.
        sweeps: number of sweeps performed.
    """

    def __init__(self, message, residual=None, sweeps=None):
        super().__init__(message)
        self.residual = residual
        self.sweeps = sweeps
