import math

import numpy as np
import pytest

from fasmodel import channel as ch
from fasmodel import covariance as cov
from fasmodel import outage as out
from fasmodel.covariance import FasConfig
from fasmodel.errors import AccuracyError, DomainError
from fasmodel.outage import OutageQuery, QuadratureSpec


@pytest.fixture(scope="module")
def small():
    sp = cov.spectral_model(FasConfig(12, 1.0, 2.0))
    return sp, ch.build_stage1(sp, 3)


@pytest.fixture(scope="module")
def headline_stage2(headline):
    _, sp = headline
    return ch.Stage2Model(ch.build_stage1(sp, 4), 23)


# ---------------------------------------------------------------------------
# empirical utilities


def test_empirical_cdf_basics():
    e = out.EmpiricalCdf([3.0, 1.0, 2.0, 2.0])
    assert e.count == 4
    assert e(0.5) == 0.0 and e(2.0) == 0.75 and e(10.0) == 1.0
    assert np.allclose(e([1.0, 3.0]), [0.25, 1.0])
    assert e.std_error(2.0) == pytest.approx(math.sqrt(0.75 * 0.25 / 4))
    with pytest.raises(DomainError):
        out.EmpiricalCdf([])


def test_empirical_from_batch_uses_row_max(small):
    sp, _ = small
    batch = ch.sample_exact(sp, 1000, seed=1)
    e = out.empirical_cdf(batch)
    assert np.array_equal(e.sorted_samples, np.sort(batch.gains.max(axis=1)))
    assert np.array_equal(out.empirical_cdf(batch.gains).sorted_samples, e.sorted_samples)


def test_rayleigh_within_dkw():
    sp = cov.spectral_model(FasConfig(1, 1.0, 1.0))
    e = out.empirical_cdf(ch.sample_exact(sp, 1_000_000, seed=11))
    ray = lambda r: out.rayleigh_max_cdf(r, 1.0)
    assert out.ks_distance(e, ray) < out.dkw_bound(e.count)


def test_independent_ports_within_dkw():
    cfg = FasConfig(6, 1.0, 2.0)
    e = out.empirical_cdf(ch.sample_independent(cfg, 300_000, seed=2))
    ana = lambda r: out.rayleigh_max_cdf(r, 2.0, 6)
    assert out.ks_distance(e, ana) < out.dkw_bound(e.count)


def test_ks_identical_is_zero():
    e = out.EmpiricalCdf(np.random.default_rng(0).random(500))
    assert out.ks_distance(e, e) == 0.0
    with pytest.raises(DomainError):
        out.ks_grid(lambda r: r)


def test_ks_grid_contents():
    e = out.EmpiricalCdf(np.linspace(0.1, 2.0, 20))
    g = out.ks_grid(e, points=11, upper=1.0)
    assert g[0] == 0.0 and g[-1] == 1.0
    assert np.all(np.diff(g) > 0)
    assert set(np.round(e.sorted_samples[e.sorted_samples <= 1.0], 12)) <= set(np.round(g, 12))


def test_tabulated_cdf():
    r = np.linspace(0.0, 2.0, 9)
    t = out.TabulatedCdf(r, r / 2.0)
    assert t(-1.0) == 0.0 and t(5.0) == 1.0 and t(0.75) == pytest.approx(0.375)
    c = out.TabulatedCdf(r, 1 - np.exp(-r ** 2), kind="cubic")
    x = np.linspace(0.0, 2.0, 101)
    assert np.max(np.abs(c(x) - (1 - np.exp(-x ** 2)))) < 2e-3
    assert c(-0.1) == 0.0


# ---------------------------------------------------------------------------
# queries and quadrature


def test_outage_query():
    cfg = FasConfig(10, 1.0, 4.0, snr_target_db=3.0)
    q = OutageQuery.from_config(cfg)
    assert q.threshold_magnitude ** 2 / cfg.sigma2 == pytest.approx(10 ** 0.3)
    assert q.snr_db == pytest.approx(3.0)
    q0 = OutageQuery.from_config(cfg, snr_db=-math.inf)
    assert q0.threshold_magnitude == 0.0 and q0.snr_db == -math.inf
    for bad in (math.nan, math.inf):
        with pytest.raises(DomainError):
            OutageQuery.from_config(cfg, snr_db=bad)
    with pytest.raises(DomainError):
        OutageQuery(cfg, -1.0)


def test_quadrature_spec_validation():
    for kw in (dict(nodes=4), dict(nodes=9.5), dict(scheme="simpson"), dict(rel_tol=0.0)):
        with pytest.raises(DomainError):
            QuadratureSpec(**kw)


def test_gauss_laguerre_moments():
    x, w = out.gauss_laguerre(40)
    for k in range(8):
        assert np.sum(w * x ** k) == pytest.approx(math.factorial(k), rel=1e-12)
    x, w = out.gauss_laguerre(384)
    assert np.all(np.isfinite(x)) and np.all(w >= 0)


# ---------------------------------------------------------------------------
# first stage


def test_stage1_endpoints_and_monotone(small):
    _, m = small
    r = np.array([0.0, 0.5, 1.0, 2.0, 3.0, 5.0, np.inf])
    est, se = out.stage1_cdf(m, r, 2000, seed=1)
    assert est[0] == 0.0 and est[-1] == 1.0
    assert np.all(np.diff(est) >= 0.0)
    assert est[-2] > 0.999
    assert np.all(se >= 0)
    # order of the grid does not matter
    est2, _ = out.stage1_cdf(m, r[::-1], 2000, seed=1)
    assert np.array_equal(est2[::-1], est)
    with pytest.raises(DomainError):
        out.stage1_cdf(m, 1.0, 99, seed=1)
    with pytest.raises(DomainError):
        out.stage1_cdf(m, -1.0, 1000, seed=1)


def test_stage1_outage_matches_sampler(small):
    sp, m = small
    q = OutageQuery.from_config(sp.config, 0.0)
    est, se = out.stage1_outage(m, q, 20_000, seed=3)
    assert (est, se) == out.stage1_cdf(m, q.threshold_magnitude, 20_000, seed=3)
    emp = out.empirical_cdf(ch.sample_stage1(m, 400_000, seed=4))(q.threshold_magnitude)
    sig = math.hypot(se, math.sqrt(emp * (1 - emp) / 400_000))
    assert abs(est - emp) < 3 * sig
    q0 = OutageQuery.from_config(sp.config, -math.inf)
    assert out.stage1_outage(m, q0, 1000, seed=3)[0] == 0.0


def test_stage1_tabulated_matches_grid(small):
    _, m = small
    t = out.stage1_tabulated(m, 4.0, 5000, seed=2)
    x = np.linspace(0.05, 3.95, 37)
    est, se = out.stage1_cdf(m, x, 5000, seed=2)
    assert np.max(np.abs(t(x) - est)) < 1e-3


def test_stage1_uses_2m_latent_dimensions(small):
    _, m = small
    assert m.loading().shape == (12, 3)
    assert m.latent_dimension == 2 * m.eps_rank < m.n_ports


# ---------------------------------------------------------------------------
# second stage


def test_stage2_r1_is_independent_rayleigh(small):
    sp, m = small
    m2 = ch.Stage2Model(m, 1)
    r = np.linspace(0.1, 5.0, 25)
    ref = out.rayleigh_max_cdf(r, sp.config.sigma2, sp.n_ports)
    assert np.max(np.abs(out.stage2_cdf(m2, r) / ref - 1.0)) < 1e-8


def test_stage2_endpoints_monotone_deterministic(headline_stage2):
    r = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 10.0, 20.0, np.inf])
    a = out.stage2_cdf(headline_stage2, r)
    b = out.stage2_cdf(headline_stage2, r)
    assert np.array_equal(a, b)
    assert a[0] == 0.0 and a[-1] == 1.0 and a[-2] > 1 - 1e-12
    assert np.all(np.diff(a) >= 0.0)
    assert isinstance(out.stage2_cdf(headline_stage2, 3.0), float)


def test_stage2_node_doubling_converges(headline_stage2):
    r = np.linspace(0.5, 8.0, 16)
    a = out.stage2_cdf(headline_stage2, r, QuadratureSpec(nodes=96))
    b = out.stage2_cdf(headline_stage2, r, QuadratureSpec(nodes=384))
    assert np.max(np.abs(np.log(a / b))) < 1e-7


def test_stage2_laguerre_self_check_fails_loudly(headline_stage2):
    with pytest.raises(AccuracyError) as info:
        out.stage2_cdf(headline_stage2, 3.0, QuadratureSpec(scheme="gauss-laguerre"))
    assert info.value.detail["nodes"] == (96, 192)
    v96, v192 = info.value.detail["values"]
    assert v96 != v192


def test_stage2_laguerre_ok_when_residuals_are_wide(small):
    # with broad residual scales plain Gauss-Laguerre is adequate
    sp, _ = small
    m2 = ch.Stage2Model(ch.build_stage1(sp, 1), 2)
    r = np.linspace(0.5, 4.0, 8)
    lag = out.stage2_cdf(m2, r, QuadratureSpec(scheme="gauss-laguerre", rel_tol=1e-6))
    ada = out.stage2_cdf(m2, r)
    assert np.max(np.abs(lag / ada - 1)) < 1e-6


def test_stage2_outage_flat_in_n():
    vals = []
    for n in (40, 100, 200):
        cfg = FasConfig(n, 1.0, 10.0)
        st1 = ch.build_stage1(cov.spectral_model(cfg), cov.epsilon_rank_formula(cfg))
        m2 = ch.Stage2Model(st1, ch.select_replication(cfg))
        vals.append(out.stage2_outage(m2, OutageQuery.from_config(cfg, 0.0)))
    assert all(0.03 < v < 0.3 for v in vals)
    assert max(vals) / min(vals) < 2.0


def test_stage2_outage_decreases_with_width():
    vals = []
    for w in (0.5, 0.75, 1.0):
        cfg = FasConfig(100, w, 10.0)
        st1 = ch.build_stage1(cov.spectral_model(cfg), cov.epsilon_rank_formula(cfg))
        m2 = ch.Stage2Model(st1, ch.select_replication(cfg))
        vals.append(out.stage2_outage(m2, OutageQuery.from_config(cfg, 0.0)))
    assert vals[0] > vals[1] > vals[2]


def test_stage2_minus_inf_db(headline_stage2):
    q = OutageQuery.from_config(headline_stage2.config, -math.inf)
    assert out.stage2_outage(headline_stage2, q) == 0.0


def test_stage2_log_cdf_keeps_tiny_values(small):
    _, m = small
    m2 = ch.Stage2Model(m, 1)
    r = 1e-15
    lg = out.stage2_log_cdf(m2, r)
    ref = m.n_ports * math.log(-math.expm1(-r * r / m.config.sigma2))
    assert ref < math.log(1e-300)
    assert abs(lg / ref - 1) < 1e-10


def test_power_identity_small(small):
    # F of the max over an N x R independent-column matrix is F_max^R
    sp = cov.spectral_model(FasConfig(5, 1.0, 1.0))
    st1 = ch.build_stage1(sp, 2)
    g = out.empirical_cdf(ch.sample_ghat_matrix(ch.Stage2Model(st1, 2), 100_000, seed=5))
    r = np.array([0.8, 1.1, 1.4])
    f, se = out.stage1_cdf(st1, r, 100_000, seed=6)
    emp = g(r)
    sig = np.hypot(2 * f * se, np.sqrt(emp * (1 - emp) / g.count))
    assert np.all(np.abs(emp - f ** 2) < 3 * sig)


@pytest.mark.parametrize("n", [8, 12])
def test_objective_proximity_bound(n):
    def norm1(a):
        return float(np.max(np.sum(np.abs(a), axis=0)))

    for w in (0.5, 1.0):
        cfg = FasConfig(n, w, 1.0)
        sp = cov.spectral_model(cfg)
        for eps_prime in (1e-1, 1e-3):
            rank = cov.epsilon_rank(sp, eps_prime / (2 * n)).rank
            if not 1 <= rank < n:
                continue
            st1 = ch.build_stage1(sp, rank)
            for r in ch.divisors(n):
                m2 = ch.Stage2Model(st1, r)
                # put both replicated matrices in port-major order
                perm = np.array([j * n + k for k in range(n) for j in range(r)])
                ghat = ch.ghat_covariance(m2)[np.ix_(perm, perm)]
                gfull = np.kron(np.eye(r), sp.matrix)[np.ix_(perm, perm)]
                ones = cfg.sigma2 * np.kron(np.eye(n), np.ones((r, r)))
                gap = abs(norm1(ghat - ch.gtilde_covariance(m2)) - norm1(gfull - ones))
                assert gap < eps_prime


# ---------------------------------------------------------------------------
# reference model


def test_reference_two_ports_matches_exact():
    cfg = FasConfig(2, 1.0, 1.0)
    q = OutageQuery.from_config(cfg, 0.0)
    p = out.reference_outage_fas1(cfg, q)
    e = out.empirical_cdf(ch.exact_maxima(cov.spectral_model(cfg), 1_000_000, 3))
    emp = e(q.threshold_magnitude)
    assert abs(p - emp) < 3 * math.sqrt(emp * (1 - emp) / e.count)


def test_reference_cdf_shape():
    cfg = FasConfig(10, 1.0, 1.0)
    r = np.array([0.0, 0.5, 1.0, 1.5, 2.5, np.inf])
    c = out.reference_cdf(cfg, r)
    assert c[0] == 0.0 and c[-1] == 1.0 and np.all(np.diff(c) >= 0.0)
    assert isinstance(out.reference_cdf(cfg, 1.0), float)


def test_reference_deep_tail_is_representable():
    cfg = FasConfig(150, 1.0, 1.0)
    p = out.reference_outage_fas1(cfg, OutageQuery.from_config(cfg, 0.0))
    assert 1e-25 < p < 1e-21


def test_reference_errors():
    with pytest.raises(DomainError):
        out.reference_log_outage(FasConfig(1, 1.0), 1.0)
    with pytest.raises(DomainError) as info:
        out.reference_log_outage(FasConfig(3, 1e-12), 1.0)
    assert "port 2" in str(info.value)
    with pytest.raises(DomainError):
        out.reference_log_outage(FasConfig(3, 1.0), -1.0)
    assert out.reference_log_outage(FasConfig(3, 1.0), 0.0) == -math.inf
