import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fasmodel import covariance as cov
from fasmodel.covariance import FasConfig
from fasmodel.errors import ConvergenceError, DomainError

from .oracles import J0


def test_config_validation():
    for bad in (dict(n_ports=0, width=1.0), dict(n_ports=2.5, width=1.0),
                dict(n_ports=4, width=0.0), dict(n_ports=4, width=math.inf),
                dict(n_ports=4, width=1.0, sigma2=-1.0),
                dict(n_ports=4, width=1.0, snr_target_db=math.nan)):
        with pytest.raises(DomainError):
            FasConfig(**bad)
    cfg = FasConfig(4, 1.0)
    assert cfg.spacing == pytest.approx(1 / 3)
    assert FasConfig(1, 1.0).spacing == math.inf
    with pytest.raises(DomainError):
        FasConfig(3, 1.0).require_asymptotic_regime()


def test_jake_examples():
    m = cov.build_jake_covariance(FasConfig(2, 0.5, 1.0))
    assert abs(m[0, 1] - J0[math.pi]) < 1e-13
    m = cov.build_jake_covariance(FasConfig(3, 1.0, 1.0))
    assert abs(m[0, 2] - J0[2 * math.pi]) < 1e-13
    assert np.array_equal(cov.build_jake_covariance(FasConfig(1, 1.0, 2.5)), [[2.5]])


@pytest.mark.parametrize("n,w,s2", [(5, 0.3, 1.0), (40, 2.0, 3.0), (100, 1.0, 10.0)])
def test_jake_structure(n, w, s2):
    m = cov.build_jake_covariance(FasConfig(n, w, s2))
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == s2)
    # Toeplitz: every diagonal is constant
    for d in range(n):
        assert np.all(np.diagonal(m, d) == m[0, d])


def test_spectral_invariants(headline):
    cfg, spec = headline
    res = spec.residuals()
    assert res["reconstruction"] < 1e-8 * cfg.sigma2
    assert res["orthogonality"] < 1e-10
    assert res["row_energy"] < 1e-8 * cfg.sigma2
    s = spec.eigenvalues
    assert np.all(np.diff(s) <= 0.0)
    assert np.all(s >= -1e-9 * cfg.sigma2)
    assert abs(s.sum() - cfg.n_ports * cfg.sigma2) < 1e-8 * cfg.n_ports * cfg.sigma2
    assert not spec.eigenvalues.flags.writeable


def test_spectrum_against_lapack(headline):
    cfg, spec = headline
    ref = np.sort(np.linalg.eigvalsh(spec.matrix))[::-1]
    assert np.max(np.abs(spec.eigenvalues - ref)) < 1e-8


def test_dense_and_factored_routes_agree():
    cfg = FasConfig(60, 1.5, 2.0)
    a = cov.spectral_model(cfg, method="dense-jacobi")
    b = cov.spectral_model(cfg)
    c = cov.spectral_model(cfg, method="lapack")
    assert np.max(np.abs(a.eigenvalues - b.eigenvalues)) < 1e-10
    assert np.max(np.abs(c.eigenvalues - b.eigenvalues)) < 1e-12
    assert a.method == "dense-jacobi" and b.method == "jacobi-factored"


def test_factored_spectrum_keeps_tiny_eigenvalues_relative():
    # beyond the dense-solver noise floor the factored spectrum still decays
    cfg = FasConfig(100, 1.0, 1.0)
    s = cov.jake_eigenvalues(cfg)
    assert s[15] > 0.0 and s[15] < 1e-15
    assert np.all(np.diff(np.log(s[:20])) < 0.0)


def test_eigendecompose_closed_forms():
    rho = 0.37
    vals, vecs = cov.eigendecompose([[1.0, rho], [rho, 1.0]])
    assert np.allclose(vals, [1 + rho, 1 - rho], atol=1e-15)
    assert np.allclose(vecs.T @ vecs, np.eye(2), atol=1e-15)
    vals, vecs = cov.eigendecompose(3.0 * np.eye(5))
    assert np.allclose(vals, 3.0) and np.allclose(vecs.T @ vecs, np.eye(5))


def test_eigendecompose_errors():
    with pytest.raises(DomainError):
        cov.eigendecompose(np.ones((2, 3)))
    with pytest.raises(DomainError):
        cov.eigendecompose([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(DomainError):
        cov.eigendecompose(np.eye(2), method="qr")
    m = cov.build_jake_covariance(FasConfig(30, 2.0))
    with pytest.raises(ConvergenceError) as info:
        cov.eigendecompose(m, max_sweeps=1)
    assert info.value.residual > 0.0


def test_epsilon_rank_examples(headline):
    _, spec = headline
    s = spec.eigenvalues
    assert cov.epsilon_rank(spec, 1.01 * s[0]).rank == 0
    pos = s[s > 0]
    assert cov.epsilon_rank(pos, 0.5 * pos[-1]).rank == pos.size
    r = cov.epsilon_rank(spec, s[3])
    assert r.rank == 3
    assert r.truncation_energy == pytest.approx(s[3:].sum())
    with pytest.raises(DomainError):
        cov.epsilon_rank(spec, 0.0)


def test_epsilon_rank_paper_example():
    spec = cov.spectral_model(FasConfig(200, 0.2, 1.0))
    assert cov.epsilon_rank(spec, 3e-15).rank <= 9


def test_epsilon_rank_monotone(headline):
    _, spec = headline
    thr = np.logspace(-20, 2, 60)
    ranks = [cov.epsilon_rank(spec, t).rank for t in thr]
    assert all(a >= b for a, b in zip(ranks, ranks[1:]))


def test_epsilon_rank_formula_examples():
    assert cov.epsilon_rank_formula(FasConfig(100, 1.0)) == 4
    assert cov.epsilon_rank_formula(FasConfig(2, 0.1)) == 1
    cfg = FasConfig(200, 2.0)
    assert cov.epsilon_rank_formula(cfg) == 7
    assert abs(cov.numeric_epsilon_rank(cfg) - 7) <= 1
    # clamp to N - 1
    assert cov.epsilon_rank_formula(FasConfig(3, 0.9), a_const=6.0) == 2
    with pytest.raises(DomainError):
        cov.epsilon_rank_formula(FasConfig(1, 1.0))
    with pytest.raises(DomainError):
        cov.epsilon_rank_formula(FasConfig(5, 1.0), a_const=0.0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 300), w=st.floats(0.05, 5.0))
def test_threshold_below_eq24_bound(n, w):
    if w / (n - 1) < 0.5:
        assert 1.0 / (2 * n) < (n - 1) / (math.pi * w)


def test_fit_single_point_zero_residual():
    res = cov.fit_a_constant(n_grid=(100,), w_grid=(1.0,))
    k = res.numeric_ranks[0]
    assert res.mse == 0.0
    lo, hi = res.interval
    assert math.ceil(lo * 100 / 99) == k and math.ceil(hi * 100 / 99) == k
    # the run is maximal: two scan steps out the rank changes
    assert math.ceil((lo - 2e-4) * 100 / 99) == k - 1
    assert math.ceil((hi + 2e-4) * 100 / 99) == k + 1
    assert lo <= res.a <= hi


def test_fit_is_fixed_point():
    ng, wg = (20, 50, 80), (0.5, 1.0, 2.0)
    res = cov.fit_a_constant(ng, wg)
    again = cov.fit_a_constant(ng, wg, ranks=res.numeric_ranks)
    assert again.a == res.a
    pred = [min(max(math.ceil(res.a * w * n / (n - 1)), 1), n - 1) for n, w in res.pairs]
    mse = np.mean((np.array(pred) - np.array(res.numeric_ranks)) ** 2)
    assert mse == pytest.approx(res.mse)


def test_fit_grid_validation():
    with pytest.raises(DomainError):
        cov.fit_grid_pairs((10,), (5.0,))
    pairs, dropped = cov.fit_grid_pairs((10, 20), (5.0,), drop_invalid=True)
    assert pairs == ((20, 5.0),) and dropped == ((10, 5.0),)
    with pytest.raises(DomainError):
        cov.fit_grid_pairs((10,), (5.0,), drop_invalid=True)


def test_limiting_cdf_shape():
    c, s2 = 0.1, 2.0
    knee = s2 / (math.pi * c)
    assert cov.limiting_eigen_cdf(knee, c, s2) == pytest.approx(1 - 2 * c)
    assert cov.limiting_eigen_cdf(0.5 * knee, c, s2) == pytest.approx(1 - 2 * c)
    assert cov.limiting_eigen_cdf(1e12, c, s2) == pytest.approx(1.0)
    x = np.logspace(-3, 4, 200)
    d = cov.limiting_eigen_cdf(x, c, s2)
    assert np.all(np.diff(d) >= 0.0)
    assert np.all((d >= 1 - 2 * c) & (d <= 1.0))
    for bad in (0.0, 0.5, -0.1):
        with pytest.raises(DomainError):
            cov.limiting_eigen_cdf(1.0, bad)


def test_limiting_cdf_against_moderate_n():
    cfg = FasConfig(1000, 0.02 * 999, 1.0)
    s = cov.jake_eigenvalues(cfg)
    x = np.logspace(-6, 2, 400)
    emp = np.array([np.mean(s <= v) for v in x])
    assert np.max(np.abs(emp - cov.limiting_eigen_cdf(x, cfg.spacing))) < 0.05
