import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from fasmodel import specfun
from fasmodel.errors import AccuracyError, DomainError
from fasmodel.specfun import Accuracy, bessel_j0, log_one_minus_q1, marcum_q1

from .oracles import J0, LOG_ONE_MINUS_Q1, Q1


@pytest.mark.parametrize("x,expected", sorted(J0.items()))
def test_j0_frozen_oracle(x, expected):
    assert abs(bessel_j0(x) - expected) < 1e-12
    assert bessel_j0(-x) == bessel_j0(x)


def test_j0_examples():
    assert bessel_j0(0.0) == 1.0
    assert abs(bessel_j0(1.52) - 0.5) < 2e-3
    assert abs(bessel_j0(2.404826)) < 1e-5


def test_j0_against_mpmath_dense():
    x = np.linspace(0.0, 50.0, 301)
    ref = np.array([float(mp.besselj(0, mp.mpf(float(v)))) for v in x])
    assert np.max(np.abs(bessel_j0(x) - ref)) < 1e-10


def test_j0_accurate_across_regime_switch():
    x = 12.0 + np.array([-1e-6, -1e-12, 0.0, 1e-12, 1e-6])
    ref = np.array([float(mp.besselj(0, mp.mpf(float(v)))) for v in x])
    assert np.max(np.abs(bessel_j0(x) - ref)) < 1e-12


def test_j0_rejects_non_finite():
    with pytest.raises(DomainError):
        bessel_j0(np.inf)
    with pytest.raises(DomainError):
        bessel_j0([1.0, np.nan])


def test_i0e_against_mpmath():
    for x in (0.0, 0.3, 5.0, 19.9, 20.1, 80.0, 700.0):
        ref = float(mp.besseli(0, x) * mp.exp(-x))
        assert abs(specfun.bessel_i0e(x) / ref - 1.0) < 1e-14


@pytest.mark.parametrize("ab,expected", sorted(Q1.items()))
def test_marcum_frozen_oracle(ab, expected):
    a, b = ab
    assert abs(marcum_q1(a, b) - expected) < 1e-13
    assert abs(marcum_q1(a, b) / expected - 1.0) < 1e-11


@pytest.mark.parametrize("ab,expected", sorted(LOG_ONE_MINUS_Q1.items()))
def test_log_complement_deep_tail(ab, expected):
    a, b = ab
    assert abs(log_one_minus_q1(a, b) / expected - 1.0) < 1e-10


def test_marcum_density_integration_oracle():
    # Q1(1, 1) as the integral of the Rician density beyond b
    def dens(x):
        return x * math.exp(-0.5 * (x - 1.0) ** 2) * special.i0e(x)
    val, _ = integrate.quad(dens, 1.0, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert abs(marcum_q1(1.0, 1.0) - val) < 1e-8


def test_marcum_identities():
    b = np.linspace(0.0, 10.0, 41)
    assert np.allclose(marcum_q1(0.0, b), np.exp(-b * b / 2), rtol=1e-13, atol=0)
    a = np.linspace(0.0, 40.0, 41)
    assert np.all(marcum_q1(a, 0.0) == 1.0)
    assert np.allclose(np.exp(log_one_minus_q1(0.0, b[1:])), -np.expm1(-b[1:] ** 2 / 2),
                       rtol=1e-13, atol=0)


@pytest.mark.parametrize("a,b", [(1.0, 1e-81), (1e-72, 1.0), (1e-200, 1e-200),
                                 (1e-4, 2e-4), (2.0, 3e-4), (0.03, 0.02), (5e-4, 1.0)])
def test_tiny_arguments_against_mpmath(a, b):
    # products a*b far below one used to overflow the backward recurrence
    with mp.workdps(50):
        am, bm = mp.mpf(a), mp.mpf(b)
        p = mp.quad(lambda x: x * mp.exp(-(x * x + am * am) / 2) * mp.besseli(0, am * x), [0, bm])
        ref_log_p, ref_q = float(mp.log(p)), float(1 - p)
    assert abs(log_one_minus_q1(a, b) / ref_log_p - 1.0) < 1e-13
    assert abs(marcum_q1(a, b) - ref_q) < 1e-15


def test_log_complement_b_zero_is_certain_miss():
    assert log_one_minus_q1(3.0, 0.0) == specfun.CERTAIN_MISS == -np.inf


def test_broadcasting_and_types():
    out = marcum_q1([[0.5], [2.0]], [1.0, 2.0, 3.0])
    assert out.shape == (2, 3)
    assert isinstance(marcum_q1(1.0, 2.0), float)


def test_negative_and_nan_rejected():
    for a, b in ((-1.0, 1.0), (1.0, -0.1), (np.nan, 1.0), (1.0, np.inf)):
        with pytest.raises(DomainError):
            marcum_q1(a, b)
        with pytest.raises(DomainError):
            log_one_minus_q1(a, b)


def test_accuracy_validation():
    with pytest.raises(DomainError):
        Accuracy(abs_tol=0.0)
    with pytest.raises(DomainError):
        Accuracy(max_terms=0)


def test_accuracy_error_carries_partial():
    with pytest.raises(AccuracyError) as info:
        marcum_q1(9.0, 11.0, Accuracy(max_terms=2))
    assert info.value.partial is not None
    assert 0.0 <= info.value.partial <= 1.0


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.0, 60.0), b1=st.floats(0.0, 60.0), b2=st.floats(0.0, 60.0))
def test_marcum_bounded_and_monotone_in_b(a, b1, b2):
    lo, hi = min(b1, b2), max(b1, b2)
    q_lo, q_hi = marcum_q1(a, lo), marcum_q1(a, hi)
    assert 0.0 <= q_hi <= q_lo <= 1.0


@settings(max_examples=200, deadline=None)
@given(b=st.floats(0.0, 60.0), a1=st.floats(0.0, 60.0), a2=st.floats(0.0, 60.0))
def test_marcum_monotone_in_a(b, a1, a2):
    lo, hi = min(a1, a2), max(a1, a2)
    assert marcum_q1(lo, b) <= marcum_q1(hi, b)


@settings(max_examples=150, deadline=None)
@given(a=st.floats(0.0, 30.0), b=st.floats(0.01, 30.0))
def test_complement_identity(a, b):
    q = marcum_q1(a, b)
    if 1e-6 <= q <= 1 - 1e-6:
        assert abs(math.exp(log_one_minus_q1(a, b)) + q - 1.0) < 1e-9


def test_log_complement_matches_direct_path_near_half():
    # where Q1 ~ 0.5 both paths are well conditioned
    for a in (0.5, 2.0, 7.0, 20.0):
        b = a + 0.3
        assert abs(log_one_minus_q1(a, b) - math.log1p(-marcum_q1(a, b))) < 1e-10


def test_rician_cdf_matches_sampling():
    rng = np.random.default_rng(5)
    nu, scale = 1.3, 0.7
    z = nu + scale * (rng.standard_normal(400_000) + 1j * rng.standard_normal(400_000)) * math.sqrt(0.5)
    r = 1.6
    emp = np.mean(np.abs(z) <= r)
    assert abs(specfun.rician_cdf(r, nu, scale) - emp) < 4 * math.sqrt(0.25 / z.size)
