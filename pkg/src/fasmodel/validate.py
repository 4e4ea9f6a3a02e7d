"""Invariant suites and the acceptance table.

``run("quick")`` checks special-function identities, covariance
reconstruction and small-N structural facts in a few seconds.
``run("full")`` adds every acceptance criterion at its stated scale
(several minutes, dominated by the Monte Carlo comparisons).

Every check yields a ``CheckResult`` holding the measured value next to its
bound.  The full level's criteria are also exposed one by one through
``ACCEPTANCE`` so the test suite can run them individually.
"""
import contextlib
import math
import time
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np
from scipy import stats

from . import channel, covariance, outage, specfun
from ._backend import BACKEND
from .covariance import FasConfig

SEED = 20240917


@dataclass
class CheckResult:
    """Outcome of one named check."""

    key: str
    name: str
    passed: bool
    measured: str
    bound: str
    detail: str = ""
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} [{self.key}] {self.name}: {self.measured} (bound: {self.bound})"
        if self.detail:
            text += f" -- {self.detail}"
        return text


def _timed(key, name, fn):
    t0 = time.perf_counter()
    try:
        res = fn()
    except Exception as exc:  # a crashing check is a failed check
        res = CheckResult(key, name, False, f"error {type(exc).__name__}", "no error", str(exc))
    res.key, res.name = key, name
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# oracles shared by several checks


def j0_series_oracle(x, digits=80, terms=200):
    """J0 by its power series in decimal arithmetic (independent of the kernels)."""
    out = np.empty(np.size(x))
    with localcontext() as ctx:
        ctx.prec = digits
        for i, xi in enumerate(np.ravel(x)):
            q = (Decimal(repr(float(xi))) / 2) ** 2
            term = Decimal(1)
            total = Decimal(1)
            for k in range(1, terms):
                term = -term * q / (k * k)
                total += term
            out[i] = float(total)
    return out.reshape(np.shape(x))


def p3_bruteforce(config, r):
    """||kron(I_R, Sigma_g) - sigma2 kron(I_N, 1_RxR)||_1 from the full NR x NR matrices."""
    sig = covariance.build_jake_covariance(config)
    n = config.n_ports
    big = np.kron(np.eye(r), sig) - config.sigma2 * np.kron(np.eye(n), np.ones((r, r)))
    return float(np.linalg.norm(big, 1))


# ---------------------------------------------------------------------------
# acceptance criteria


def crit_exact_identity():
    worst, worst_case = 0.0, None
    for n in (4, 16, 64):
        for w in (0.5, 1.0, 3.0):
            for s2 in (1.0, 10.0):
                sp = covariance.spectral_model(FasConfig(n, w, s2))
                cov_h = channel.exact_model_parameters(sp).covariance()
                err = float(np.max(np.abs(cov_h - sp.matrix))) / s2
                if err > worst:
                    worst, worst_case = err, (n, w, s2)
    return CheckResult("", "", worst < 1e-9, f"max |Sigma_h - Sigma_g|/sigma2 = {worst:.2e}",
                       "< 1e-9", f"worst at (N, W, sigma2) = {worst_case}")


def crit_truncation_energy():
    vals = covariance.jake_eigenvalues(FasConfig(200, 0.2, 1.0))
    count = int(np.count_nonzero(vals > 3e-15))
    return CheckResult("", "", count <= 9, f"{count} eigenvalues > 3e-15", "<= 9")


def crit_fit_a():
    fit = covariance.fit_a_constant()
    ok = 3.0 <= fit.a <= 3.4
    return CheckResult("", "", ok, f"a = {fit.a:.5f}", "in [3.0, 3.4]",
                       f"minimising run [{fit.interval[0]:.4f}, {fit.interval[1]:.4f}], "
                       f"MSE {fit.mse:.4f}, {len(fit.pairs)} pairs")


def crit_replication():
    r = channel.select_replication(FasConfig(100, 1.0))
    return CheckResult("", "", r == 23, f"R* = {r}", "== 23")


def crit_p3_oracle():
    bad = []
    for n in (12, 24, 36):
        for w in (0.5, 1.0):
            cfg = FasConfig(n, w, 1.0)
            brute = {d: p3_bruteforce(cfg, d) for d in channel.divisors(n)}
            best = min(brute.values())
            argmin = max(d for d, v in brute.items() if v <= best + 1e-12 * max(best, 1.0))
            got = channel.solve_p3(cfg)
            if got != argmin:
                bad.append((n, w, got, argmin))
    return CheckResult("", "", not bad, f"{6 - len(bad)}/6 cases agree", "6/6",
                       f"mismatches {bad}" if bad else "")


def _headline():
    cfg = FasConfig(100, 1.0, 10.0)
    sp = covariance.spectral_model(cfg)
    return cfg, sp


def _exact_oracle(sp, draws, seed):
    return outage.empirical_cdf(channel.exact_maxima(sp, draws, seed))


def crit_stage1_convergence(mc_draws=100_000, exact_draws=1_000_000):
    _, sp = _headline()
    emp = _exact_oracle(sp, exact_draws, SEED)
    upper = emp.quantile(outage.KS_UPPER_QUANTILE)
    grid = outage.ks_grid(emp)
    ks = {}
    for m in (1, 2, 3, 5):
        tab = outage.stage1_tabulated(channel.build_stage1(sp, m), upper, mc_draws, SEED + m)
        ks[m] = outage.ks_distance(tab, emp, grid)
    seq = [ks[m] for m in (1, 2, 3, 5)]
    decreasing = all(a > b for a, b in zip(seq, seq[1:]))
    ok = decreasing and ks[5] <= 0.02
    meas = ", ".join(f"eps_rank {m}: {v:.4f}" for m, v in ks.items())
    return CheckResult("", "", ok, f"KS {meas}", "strictly decreasing and <= 0.02 at eps_rank 5")


def crit_stage2_accuracy(exact_draws=1_000_000):
    cfg, sp = _headline()
    emp = _exact_oracle(sp, exact_draws, SEED)
    upper = emp.quantile(outage.KS_UPPER_QUANTILE)
    r = np.linspace(0.0, upper, outage.KS_GRID_POINTS)
    grid = outage.ks_grid(emp)
    st1 = channel.build_stage1(sp, covariance.epsilon_rank_formula(cfg))
    ks = {}
    for rep in (8, 23, 35):
        tab = outage.TabulatedCdf(r, outage.stage2_cdf(channel.Stage2Model(st1, rep), r))
        ks[rep] = outage.ks_distance(tab, emp, grid)
    ok = ks[23] <= 0.03 and ks[8] > ks[23] and ks[35] > ks[23]
    meas = ", ".join(f"R={k}: {v:.4f}" for k, v in ks.items())
    return CheckResult("", "", ok, f"KS {meas}", "R=23 <= 0.03, R=8 and R=35 larger",
                       f"eps_rank {st1.eps_rank}")


def crit_reference_tail():
    vals = {}
    for n in (10, 150):
        cfg = FasConfig(n, 1.0, 1.0)
        vals[n] = outage.reference_outage_fas1(cfg, outage.OutageQuery.from_config(cfg))
    d10 = abs(math.log10(vals[10] / 1e-2))
    d150 = abs(math.log10(vals[150] / 1.52e-23))
    ok = d10 <= 0.3 and d150 <= 0.5
    return CheckResult("", "", ok, f"N=10: {vals[10]:.4e} (|dlog10| {d10:.3f}), "
                       f"N=150: {vals[150]:.4e} (|dlog10| {d150:.3f})",
                       "|dlog10| <= 0.3 and <= 0.5")


def crit_flat_outage(draws=1_000_000):
    vals = {}
    for n in (10, 50, 100, 150):
        cfg = FasConfig(n, 1.0, 10.0)
        emp = _exact_oracle(covariance.spectral_model(cfg), draws, SEED + n)
        vals[n] = emp(outage.OutageQuery.from_config(cfg).threshold_magnitude)
    lo, hi = min(vals.values()), max(vals.values())
    ok = lo >= 0.05 and hi <= 0.2 and hi / lo <= 2.0
    meas = ", ".join(f"N={k}: {v:.4f}" for k, v in vals.items())
    return CheckResult("", "", ok, meas, "all in [0.05, 0.2], max/min <= 2",
                       f"max/min {hi / lo:.3f}")


def crit_power_identity(draws=100_000, mc_draws=100_000):
    worst = 0.0
    details = []
    ok = True
    for n, rep in ((5, 2), (8, 4)):
        cfg = FasConfig(n, 1.0, 1.0)
        sp = covariance.spectral_model(cfg)
        st1 = channel.build_stage1(sp, covariance.epsilon_rank_formula(cfg))
        omega = outage.empirical_cdf(channel.sample_ghat_matrix(
            channel.Stage2Model(st1, rep), draws, SEED + n))
        g = np.array([omega.quantile(q) for q in (0.1, 0.3, 0.5, 0.7, 0.9)])
        f1, se1 = outage.stage1_cdf_grid(st1, g, mc_draws, SEED + 100 + n)
        lhs = omega(g)
        rhs = f1 ** rep
        se = np.sqrt(omega.std_error(g) ** 2 + (rep * f1 ** (rep - 1) * se1) ** 2)
        z = np.abs(lhs - rhs) / se
        worst = max(worst, float(np.max(z)))
        ok &= bool(np.all(z <= 3.0))
        details.append(f"(N={n}, R={rep}) max z {np.max(z):.2f}")
    return CheckResult("", "", ok, f"max |F_Omega - F^R| / se = {worst:.2f}", "<= 3",
                       "; ".join(details))


def crit_limiting_spectrum():
    c, n = 0.01, 4000
    cfg = FasConfig(n, c * (n - 1), 1.0)
    vals = np.sort(covariance.jake_eigenvalues(cfg))
    x = np.unique(np.concatenate([np.logspace(-6, 2, 4001),
                                  vals[(vals >= 1e-6) & (vals <= 100.0)]]))
    emp = np.searchsorted(vals, x, side="right") / n
    dist = float(np.max(np.abs(emp - covariance.limiting_eigen_cdf(x, c, 1.0))))
    return CheckResult("", "", dist <= 0.05, f"sup |F_N - D| = {dist:.4f}", "<= 0.05")


def crit_latent_law(draws=100_000):
    cfg = FasConfig(50, 1.0, 1.0)
    st1 = channel.build_stage1(covariance.spectral_model(cfg), 4)
    z = channel.sample_latent_energy(st1, draws, SEED)
    m = np.asarray(st1.port_mixture_power)
    rel = np.abs(z.mean(axis=0) / m - 1.0)
    ks = np.array([stats.kstest(z[:, k], "expon", args=(0.0, m[k])).statistic
                   for k in range(cfg.n_ports)])
    bound = outage.dkw_bound(draws, 0.01)
    ok = bool(np.all(rel <= 0.01) and np.all(ks < bound))
    return CheckResult("", "", ok, f"max mean error {rel.max():.4f}, max KS {ks.max():.5f}",
                       f"mean error <= 0.01, KS < {bound:.5f}")


def crit_block_structure(draws=100_000):
    cfg = FasConfig(8, 1.0, 1.0)
    st1 = channel.build_stage1(covariance.spectral_model(cfg), covariance.epsilon_rank_formula(cfg))
    model = channel.Stage2Model(st1, 3)
    n, rep = cfg.n_ports, model.replication
    ghat = channel.sample_ghat_matrix(model, draws, SEED, keep_complex=True).complex_gains
    gtil = channel.sample_gtilde_matrix(model, draws, SEED, keep_complex=True).complex_gains
    # column-major stacking for the independent-column matrix, row-major for the other
    v_hat = np.transpose(ghat, (0, 2, 1)).reshape(draws, n * rep)
    v_til = gtil.reshape(draws, n * rep)
    c_hat = v_hat.T @ v_hat.conj() / draws
    c_til = v_til.T @ v_til.conj() / draws
    e_hat = float(np.max(np.abs(c_hat - channel.ghat_covariance(model))))
    e_til = float(np.max(np.abs(c_til - channel.gtilde_covariance(model))))
    ok = max(e_hat, e_til) <= 0.02 * cfg.sigma2
    return CheckResult("", "", ok, f"max error Ghat {e_hat:.4f}, Gtilde {e_til:.4f}",
                       "<= 0.02 sigma2")


def crit_special_functions():
    x = np.linspace(-50.0, 50.0, 2001)
    j0_err = float(np.max(np.abs(specfun.bessel_j0(x) - j0_series_oracle(x))))
    b = np.linspace(0.0, 12.0, 50)
    q0 = specfun.marcum_q1(np.zeros_like(b), b)
    id1 = float(np.max(np.abs(q0 - np.exp(-b * b / 2.0))))
    a = np.linspace(0.0, 30.0, 50)
    id2 = float(np.max(np.abs(specfun.marcum_q1(a, np.zeros_like(a)) - 1.0)))
    aa, bb = np.meshgrid(a, np.linspace(0.0, 30.0, 50), indexing="ij")
    q = specfun.marcum_q1(aa, bb)
    mono = bool(np.all(np.diff(q, axis=1) <= 0.0) and np.all(np.diff(q, axis=0) >= 0.0))
    half = abs(specfun.bessel_j0(1.52) - 0.5)
    ok = j0_err < 1e-10 and id1 < 1e-12 and id2 < 1e-12 and mono and half < 2e-3
    return CheckResult("", "", ok,
                       f"J0 err {j0_err:.1e}, Q1(0,b) err {id1:.1e}, Q1(a,0) err {id2:.1e}, "
                       f"monotone {mono}, |J0(1.52)-0.5| {half:.2e}",
                       "J0 < 1e-10, identities < 1e-12, monotone, < 2e-3")


ACCEPTANCE = (
    ("A1", "exact-model covariance identity", crit_exact_identity),
    ("A2", "spectral truncation energy", crit_truncation_energy),
    ("A3", "epsilon-rank constant fit", crit_fit_a),
    ("A4", "replication rule", crit_replication),
    ("A5", "block-structure argmin oracle", crit_p3_oracle),
    ("A6", "stage-1 convergence", crit_stage1_convergence),
    ("A7", "stage-2 accuracy", crit_stage2_accuracy),
    ("A8", "reference-model tail", crit_reference_tail),
    ("A9", "flat empirical outage", crit_flat_outage),
    ("A10", "power identity", crit_power_identity),
    ("A11", "limiting eigenvalue distribution", crit_limiting_spectrum),
    ("A12", "latent energy law", crit_latent_law),
    ("A13", "replicated block structure", crit_block_structure),
    ("A14", "special-function suite", crit_special_functions),
)


def run_criterion(key):
    for k, name, fn in ACCEPTANCE:
        if k == key:
            return _timed(k, name, fn)
    raise KeyError(key)


# ---------------------------------------------------------------------------
# quick suite


def _q_complement():
    a, b = np.meshgrid(np.linspace(0.0, 8.0, 41), np.linspace(0.05, 8.0, 41))
    q = specfun.marcum_q1(a, b)
    p = np.exp(specfun.log_one_minus_q1(a, b))
    mask = (q > 1e-6) & (q < 1 - 1e-6)
    err = float(np.max(np.abs(p + q - 1.0)[mask]))
    return CheckResult("", "", err < 1e-9, f"max |P + Q - 1| = {err:.1e}", "< 1e-9")


def _q_reconstruction():
    sp = covariance.spectral_model(FasConfig(64, 1.0, 2.0))
    res = sp.residuals()
    trace = abs(float(np.sum(sp.eigenvalues)) / (64 * 2.0) - 1.0)
    ok = (res["reconstruction"] < 1e-8 * 2.0 and res["orthogonality"] < 1e-10
          and res["row_energy"] < 1e-8 * 2.0 and trace < 1e-8)
    return CheckResult("", "", ok,
                       f"recon {res['reconstruction']:.1e}, orth {res['orthogonality']:.1e}, "
                       f"row {res['row_energy']:.1e}, trace {trace:.1e}",
                       "recon/row < 1e-8 sigma2, orth < 1e-10, trace < 1e-8")


def _q_dense_jacobi():
    cfg = FasConfig(40, 1.5, 1.0)
    vals, _ = covariance.eigendecompose(covariance.build_jake_covariance(cfg))
    ref = covariance.jake_eigenvalues(cfg)
    err = float(np.max(np.abs(vals - ref)))
    return CheckResult("", "", err < 1e-8, f"max eigenvalue difference {err:.1e}", "< 1e-8")


def _q_stage1_invariants():
    cfg = FasConfig(30, 1.0, 3.0)
    st1 = channel.build_stage1(covariance.spectral_model(cfg), 4)
    err = float(np.max(np.abs(st1.port_mixture_power + st1.port_residual_var - cfg.sigma2)))
    dims = st1.latent_dimension == 8
    ok = err <= 4e-16 * cfg.sigma2 and dims and np.all(st1.port_residual_std > 0)
    return CheckResult("", "", bool(ok), f"max |m + tau^2 - sigma2| = {err:.1e}, latent dims {st1.latent_dimension}",
                       "rounding level, 2 * eps_rank")


def _q_stage2_shape():
    cfg = FasConfig(20, 1.0, 1.0)
    st1 = channel.build_stage1(covariance.spectral_model(cfg), 3)
    model = channel.Stage2Model(st1, channel.select_replication(cfg))
    r = np.linspace(0.0, 6.0, 61)
    f = outage.stage2_cdf(model, r)
    ok = f[0] == 0.0 and np.all(np.diff(f) >= -1e-15) and f[-1] > 1 - 1e-9
    return CheckResult("", "", bool(ok), f"F(0) = {f[0]}, F(6) = {f[-1]:.12f}",
                       "0 at r = 0, non-decreasing, -> 1")


def _q_backends():
    from . import _pykernels
    a = np.array([0.0, 0.5, 3.0, 20.0, 40.0])
    b = np.array([1.0, 2.5, 3.0, 21.0, 5.0])
    ref, _ = _pykernels.log_one_minus_q1_array(a, b, 1e-16, 500)
    got = specfun.log_one_minus_q1(a, b, specfun.Accuracy(abs_tol=1e-13))
    err = float(np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)))
    return CheckResult("", "", err < 1e-12, f"backend {BACKEND}, max rel diff vs python {err:.1e}",
                       "< 1e-12")


QUICK = (
    ("Q1", "Marcum complement identity", _q_complement),
    ("Q2", "spectral reconstruction", _q_reconstruction),
    ("Q3", "dense Jacobi vs factored spectrum", _q_dense_jacobi),
    ("Q4", "first-stage invariants", _q_stage1_invariants),
    ("Q5", "second-stage CDF shape", _q_stage2_shape),
    ("Q6", "compiled and python kernels agree", _q_backends),
)

QUICK_ACCEPTANCE = ("A1", "A4", "A5", "A14")


@contextlib.contextmanager
def corrupted_j0(offset=1e-3):
    """Test hook: perturb J0 everywhere the package evaluates it."""
    original = specfun.bessel_j0

    def bad(x):
        return original(x) + offset

    specfun.bessel_j0 = bad
    covariance.bessel_j0 = bad
    try:
        yield
    finally:
        specfun.bessel_j0 = original
        covariance.bessel_j0 = original


def run(level="quick", corrupt_j0=False, progress=None):
    """Run a validation level and return the list of CheckResults."""
    if level not in ("quick", "full"):
        raise ValueError(f"unknown level {level!r}")
    plan = [(k, n, f) for k, n, f in QUICK]
    if level == "quick":
        plan += [(k, n, f) for k, n, f in ACCEPTANCE if k in QUICK_ACCEPTANCE]
    else:
        plan += list(ACCEPTANCE)
    ctx = corrupted_j0() if corrupt_j0 else contextlib.nullcontext()
    results = []
    with ctx:
        for key, name, fn in plan:
            res = _timed(key, name, fn)
            results.append(res)
            if progress is not None:
                progress(res)
    return results
