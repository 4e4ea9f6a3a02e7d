"""Fluid antenna system channel models: exact, first stage and second stage.

Modules:
    specfun     Bessel J0, scaled I0 and the first-order Marcum Q function.
    covariance  Jake's covariance, its spectrum and epsilon-rank tools.
    channel     samplers, model types and replication-count selection.
    outage      CDF and outage evaluators plus empirical-CDF utilities.
    validate    invariant suites and the acceptance table.
    cli         command-line front end (``fasmodel``).

Set FASMODEL_PURE_PYTHON=1 to force the pure-Python kernels.
"""
__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .errors import (AccuracyError, ConstructionError, ConvergenceError,  # noqa: E402
                     DomainError, FasError)

__all__ = ["BACKEND", "AccuracyError", "ConstructionError", "ConvergenceError",
           "DomainError", "FasError", "__version__"]
