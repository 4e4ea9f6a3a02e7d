"""Special functions: Bessel J0, scaled I0 and the first-order Marcum Q.

All functions accept scalars or array-likes (broadcast together) and return
a float for scalar input and an ndarray otherwise.

Evaluation schemes
------------------
``bessel_j0`` sums the power series for |x| <= 12 and the Hankel asymptotic
expansion, truncated at its smallest term, beyond.  Both regimes are
accurate to a few 1e-13 absolute.

``marcum_q1`` works with whichever of Q1(a, b) and 1 - Q1(a, b) is the
Rician tail on the far side of b, so that neither is formed by cancellation:

* a*b <= 200: the Bessel series
  Q1 = exp(-(a^2+b^2)/2) sum_{k>=0} (a/b)^k I_k(ab)          (b > a)
  1 - Q1 = exp(-(a^2+b^2)/2) sum_{k>=1} (b/a)^k I_k(ab)      (b <= a)
  with the I_k generated by normalised backward recurrence;
* a >= 15 and |b - a| <= a/3: an expansion of the Rician density about the
  Gaussian it approaches, integrated term by term against Gaussian tail
  moments;
* otherwise: 64-point Gauss-Legendre on the tail integral.

Every regime yields the logarithm of the tail, so results far below the
double-precision range of Q1 remain available through
``log_one_minus_q1``.
"""
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import AccuracyError, DomainError

# log_one_minus_q1(a, 0): the magnitude can never be below zero, so the
# conditional CDF at r = 0 is exactly zero
CERTAIN_MISS = -np.inf


@dataclass(frozen=True)
class Accuracy:
    """Accuracy controls for the series-based evaluators.

    Attributes:
        abs_tol: target absolute error of the returned function values.
        max_terms: cap on the number of series terms before giving up.
    """

    abs_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not (self.abs_tol > 0.0):
            raise DomainError(f"abs_tol must be positive, got {self.abs_tol}")
        if int(self.max_terms) < 1:
            raise DomainError(f"max_terms must be >= 1, got {self.max_terms}")

    @property
    def series_rtol(self):
        """Relative truncation level applied to each series sum."""
        return max(1e-3 * self.abs_tol, 1e-17)


DEFAULT_ACCURACY = Accuracy()


def _as_flat(*args):
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
    shape = arrays[0].shape
    flat = [np.ascontiguousarray(a.reshape(-1)) for a in arrays]
    return shape, flat


def _finish(values, shape, scalar):
    if scalar:
        return float(values[0])
    return values.reshape(shape)


def _is_scalar(*args):
    return all(np.ndim(a) == 0 for a in args)


def bessel_j0(x):
    """Bessel function of the first kind of order zero.

    Args:
        x: finite real scalar or array.

    Returns:
        J0(x), even in x by construction.

    Raises:
        DomainError: if any input is NaN or infinite.
    """
    shape, (flat,) = _as_flat(x)
    if not np.all(np.isfinite(flat)):
        raise DomainError("bessel_j0 requires finite arguments")
    return _finish(kernels.j0_array(np.abs(flat)), shape, _is_scalar(x))


def bessel_i0e(x):
    """Exponentially scaled modified Bessel function exp(-|x|) I0(x)."""
    shape, (flat,) = _as_flat(x)
    if not np.all(np.isfinite(flat)):
        raise DomainError("bessel_i0e requires finite arguments")
    return _finish(kernels.i0e_array(flat), shape, _is_scalar(x))


def _check_marcum_args(a, b):
    if np.any(np.isnan(a)) or np.any(np.isnan(b)):
        raise DomainError("Marcum Q arguments must not be NaN")
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise DomainError("Marcum Q arguments must be non-negative")
    if np.any(np.isinf(a)) or np.any(np.isinf(b)):
        raise DomainError("Marcum Q arguments must be finite")


def marcum_q1(a, b, accuracy=DEFAULT_ACCURACY):
    """First-order Marcum Q-function Q1(a, b).

    Q1(a, b) is the probability that a Rician variable with noncentrality a
    and unit scale exceeds b.

    Args:
        a: noncentrality, >= 0.
        b: threshold, >= 0.
        accuracy: series controls.

    Returns:
        Q1(a, b) in [0, 1].

    Raises:
        DomainError: for negative or non-finite arguments.
        AccuracyError: when a series needs more than ``accuracy.max_terms``
            terms; ``partial`` carries the truncated value(s).
    """
    shape, (fa, fb) = _as_flat(a, b)
    _check_marcum_args(fa, fb)
    vals, status = kernels.marcum_q1_array(fa, fb, accuracy.series_rtol,
                                           int(accuracy.max_terms))
    out = _finish(vals, shape, _is_scalar(a, b))
    if np.any(status):
        raise AccuracyError(
            f"Marcum Q1 series did not converge within {accuracy.max_terms} terms "
            f"for {int(np.count_nonzero(status))} argument pair(s)",
            partial=out, detail={"max_terms": accuracy.max_terms})
    return out


def log_one_minus_q1(a, b, accuracy=DEFAULT_ACCURACY):
    """Natural log of the Rician CDF, ln(1 - Q1(a, b)).

    The complement is evaluated directly by its own series, so the result
    keeps full relative accuracy when Q1 is close to 1 and far below the
    smallest representable double.

    Args:
        a: noncentrality, >= 0.
        b: threshold, >= 0.  ``b == 0`` gives ``CERTAIN_MISS`` (-inf).
        accuracy: series controls.

    Raises:
        DomainError: for negative or non-finite arguments.
        AccuracyError: on series non-convergence, with ``partial`` set.
    """
    shape, (fa, fb) = _as_flat(a, b)
    _check_marcum_args(fa, fb)
    vals, status = kernels.log_one_minus_q1_array(fa, fb, accuracy.series_rtol,
                                                  int(accuracy.max_terms))
    out = _finish(vals, shape, _is_scalar(a, b))
    if np.any(status):
        raise AccuracyError(
            f"Marcum Q1 series did not converge within {accuracy.max_terms} terms "
            f"for {int(np.count_nonzero(status))} argument pair(s)",
            partial=out, detail={"max_terms": accuracy.max_terms})
    return out


def rician_cdf(r, nu, scale):
    """CDF of |nu + scale * (x + j y)| with x, y ~ N(0, 1/2), at r.

    Equals 1 - Q1(sqrt(2) nu / scale, sqrt(2) r / scale).
    """
    r = np.asarray(r, dtype=float)
    a = np.sqrt(2.0) * np.asarray(nu, dtype=float) / scale
    b = np.sqrt(2.0) * r / scale
    return np.exp(log_one_minus_q1(a, b))
