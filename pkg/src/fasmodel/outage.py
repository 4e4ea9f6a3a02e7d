"""CDF and outage evaluators for the FAS channel gain g_FAS = max_k |g_k|.

* ``stage1_cdf``: Monte Carlo over the 2*eps_rank real latents of the
  first-stage model; each draw contributes prod_k P(|g^_k| <= r | latents),
  a product of Rician CDFs accumulated in the log domain.
* ``stage2_cdf``: the power-of-single-integrals form
  prod_k [E_t (1 - Q1(sqrt(2t)/tau_k, sqrt(2) r/tau_k))^R]^(1/R) with
  t ~ Exp(mean m_k), evaluated by quadrature with a node-doubling check.
* ``reference_outage_fas1``: the single-latent reference model, one finite
  integral over the latent energy, evaluated adaptively.

The outage event at SNR target gamma_th/Gamma (in dB) is
g_FAS < r_th with r_th = sigma 10^(dB/20).
"""
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from ._backend import kernels
from .channel import CHUNK, Stage1Model, Stage2Model, chunk_generator, complex_normal, reference_mu
from .covariance import FasConfig
from .errors import AccuracyError, DomainError
from .specfun import DEFAULT_ACCURACY

STREAM_STAGE1_MC = 11
KS_GRID_POINTS = 512
KS_UPPER_QUANTILE = 0.9999
MAX_DOUBLINGS = 4


# ---------------------------------------------------------------------------
# empirical and tabulated CDFs


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical CDF of a sample."""

    sorted_samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.asarray(self.sorted_samples, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise DomainError("an empirical CDF needs a non-empty 1-D sample")
        if np.any(np.diff(x) < 0):
            x = np.sort(x)
        x.flags.writeable = False
        object.__setattr__(self, "sorted_samples", x)

    @property
    def count(self):
        return self.sorted_samples.size

    def __call__(self, r):
        """Fraction of samples <= r."""
        idx = np.searchsorted(self.sorted_samples, r, side="right")
        out = idx / self.count
        return float(out) if np.ndim(r) == 0 else out

    def std_error(self, r):
        """Binomial standard error of the estimate at r."""
        p = np.asarray(self(r))
        return np.sqrt(p * (1.0 - p) / self.count)

    def quantile(self, q):
        return float(np.quantile(self.sorted_samples, q))


@dataclass(frozen=True)
class TabulatedCdf:
    """A CDF known on an ascending grid and interpolated in between.

    ``kind`` is "linear" or "cubic" (a not-a-knot cubic spline, clipped to
    [0, 1]).  Below the grid the value is 0 (every CDF here starts at
    r = 0); beyond it the last value is held.
    """

    r: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    std_error: np.ndarray = field(default=None, repr=False)
    kind: str = "linear"

    def __call__(self, r):
        x = np.asarray(r, dtype=float)
        if self.kind == "cubic" and self.r.size >= 4:
            inside = np.clip(x, self.r[0], self.r[-1])
            out = np.clip(CubicSpline(self.r, self.values)(inside), 0.0, 1.0)
            out = np.where(x < self.r[0], 0.0, out)
        else:
            out = np.interp(x, self.r, self.values, left=0.0)
        return float(out) if np.ndim(r) == 0 else out


def empirical_cdf(batch):
    """Empirical CDF of the per-draw maximum.

    Args:
        batch: a ChannelSampleBatch, an S x N (or S x N x R) gain array, or
            a 1-D array of already reduced maxima.
    """
    if hasattr(batch, "maxima"):
        samples = batch.maxima()
    else:
        arr = np.asarray(batch, dtype=float)
        samples = arr if arr.ndim == 1 else arr.reshape(arr.shape[0], -1).max(axis=1)
    return EmpiricalCdf(np.sort(samples))


def dkw_bound(count, alpha=0.01):
    """Half-width of the (1 - alpha) DKW band for ``count`` samples."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * count))


def rayleigh_max_cdf(r, sigma2, n_ports=1):
    """CDF of the max of ``n_ports`` independent CN(0, sigma2) magnitudes."""
    r = np.asarray(r, dtype=float)
    out = (-np.expm1(-r * r / sigma2)) ** n_ports
    return float(out) if out.ndim == 0 else out


def ks_grid(*cdfs, points=KS_GRID_POINTS, upper=None):
    """Evaluation grid: ``points`` uniform points on [0, upper] plus sample points.

    ``upper`` defaults to the 99.99th percentile of the first empirical
    input.
    """
    empiricals = [c for c in cdfs if isinstance(c, EmpiricalCdf)]
    if upper is None:
        if not empiricals:
            raise DomainError("ks_grid needs an empirical input or an explicit upper limit")
        upper = empiricals[0].quantile(KS_UPPER_QUANTILE)
    parts = [np.linspace(0.0, upper, points)]
    parts += [c.sorted_samples[c.sorted_samples <= upper] for c in empiricals]
    return np.unique(np.concatenate(parts))


def ks_distance(a, b, grid=None):
    """sup |F_a - F_b| over a shared grid (see ``ks_grid``)."""
    if grid is None:
        grid = ks_grid(a, b)
    return float(np.max(np.abs(np.asarray(a(grid)) - np.asarray(b(grid)))))


# ---------------------------------------------------------------------------
# outage query and quadrature settings


@dataclass(frozen=True)
class OutageQuery:
    """Outage threshold on the channel magnitude.

    ``threshold_magnitude`` is r_th = sigma 10^(snr_db/20).  A target of
    -inf dB gives r_th = 0, for which every outage probability is 0.
    """

    config: FasConfig
    threshold_magnitude: float

    def __post_init__(self):
        if not (self.threshold_magnitude >= 0.0) or math.isinf(self.threshold_magnitude):
            raise DomainError(f"threshold magnitude must be finite and >= 0, got {self.threshold_magnitude}")

    @classmethod
    def from_config(cls, config, snr_db=None):
        db = config.snr_target_db if snr_db is None else snr_db
        if math.isnan(db) or db == math.inf:
            raise DomainError(f"invalid SNR target {db} dB")
        r_th = 0.0 if db == -math.inf else math.sqrt(config.sigma2) * 10.0 ** (db / 20.0)
        return cls(config=config, threshold_magnitude=r_th)

    @property
    def snr_db(self):
        if self.threshold_magnitude == 0.0:
            return -math.inf
        return 10.0 * math.log10(self.threshold_magnitude ** 2 / self.config.sigma2)


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings for the single-integral evaluators.

    Attributes:
        nodes: base node count; the self-check compares against 2*nodes.
        scheme: "adaptive" integrates each factor in the noncentrality
            variable over a window around the Rician transition with
            Gauss-Legendre, doubling nodes until converged; "gauss-laguerre"
            applies plain Gauss-Laguerre in u = t/m_k with one doubling
            check.
        rel_tol: relative tolerance of the self-check.
    """

    nodes: int = 96
    scheme: str = "adaptive"
    rel_tol: float = 1e-8

    def __post_init__(self):
        if int(self.nodes) != self.nodes or self.nodes < 8:
            raise DomainError(f"nodes must be an integer >= 8, got {self.nodes}")
        if self.scheme not in ("adaptive", "gauss-laguerre"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if not (self.rel_tol > 0.0):
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")


DEFAULT_QUAD = QuadratureSpec()


def gauss_laguerre(n):
    """Gauss-Laguerre nodes and weights (weight e^-u) by Golub-Welsch.

    Weights below the double range underflow to zero harmlessly.
    """
    i = np.arange(n, dtype=float)
    x, v = eigh_tridiagonal(2.0 * i + 1.0, i[1:])
    return x, v[0] ** 2


def gauss_legendre(n):
    return leggauss(n)


# ---------------------------------------------------------------------------
# first stage


def _check_grid(r):
    r = np.asarray(r, dtype=float)
    if np.any(np.isnan(r)) or np.any(r < 0.0):
        raise DomainError("r must be non-negative")
    return r


def stage1_cdf_grid(model, r, mc_draws, seed, accuracy=DEFAULT_ACCURACY):
    """First-stage CDF estimates on a grid of r values.

    Returns:
        (estimate, std_error) arrays with the shape of ``r``.  The same
        latent draws are used at every grid point.
    """
    if not isinstance(model, Stage1Model):
        raise DomainError("stage1_cdf needs a Stage1Model")
    if int(mc_draws) < 100:
        raise DomainError(f"mc_draws must be >= 100, got {mc_draws}")
    r = _check_grid(r)
    flat = r.reshape(-1)
    order = np.argsort(flat, kind="stable")
    r_sorted = np.ascontiguousarray(flat[order])
    # r = inf is handled outside the kernel
    finite = np.isfinite(r_sorted)
    r_fin = np.ascontiguousarray(r_sorted[finite])
    acc = np.zeros(r_fin.size)
    acc2 = np.zeros(r_fin.size)
    loading = np.ascontiguousarray(model.loading())
    tau = np.ascontiguousarray(model.port_residual_std, dtype=float)
    nfail = 0
    draws = int(mc_draws)
    for i in range(-(-draws // CHUNK)):
        rows = min(CHUNK, draws - i * CHUNK)
        z = complex_normal(chunk_generator(seed, STREAM_STAGE1_MC, i), (rows, loading.shape[1]))
        nu = np.ascontiguousarray(np.abs(z @ loading.T))
        nfail += kernels.stage1_accumulate(nu, tau, r_fin, accuracy.series_rtol,
                                           int(accuracy.max_terms), acc, acc2)
    mean = acc / draws
    var = np.maximum(acc2 / draws - mean * mean, 0.0) * draws / max(draws - 1, 1)
    est = np.ones(r_sorted.size)
    se = np.zeros(r_sorted.size)
    est[finite] = mean
    se[finite] = np.sqrt(var / draws)
    out_est = np.empty_like(est)
    out_se = np.empty_like(se)
    out_est[order] = est
    out_se[order] = se
    if nfail:
        raise AccuracyError(f"{nfail} Marcum Q1 evaluations did not converge",
                            partial=out_est.reshape(r.shape), detail={"failures": nfail})
    return out_est.reshape(r.shape), out_se.reshape(r.shape)


def stage1_cdf(model, r, mc_draws, seed, accuracy=DEFAULT_ACCURACY):
    """Monte Carlo estimate of the first-stage CDF of g_FAS at r.

    Returns:
        (estimate, std_error); floats for scalar r.
    """
    est, se = stage1_cdf_grid(model, r, mc_draws, seed, accuracy)
    if np.ndim(r) == 0:
        return float(est), float(se)
    return est, se


def stage1_tabulated(model, upper, mc_draws, seed, nodes=None, accuracy=DEFAULT_ACCURACY):
    """Stage-1 CDF on [0, upper] as a cubic-spline ``TabulatedCdf``.

    Each draw contributes a product of Rician CDFs that varies on the
    scale tau_min in r, so by default the uniform grid spacing is about
    tau_min, with between 33 and ``KS_GRID_POINTS`` nodes.  When every
    tau_k is large this is far cheaper than evaluating the full KS grid,
    and the spline error stays around 1e-4 or below.
    """
    if nodes is None:
        tau_min = float(np.min(model.port_residual_std))
        nodes = int(np.clip(math.ceil(upper / tau_min) + 1, 33, KS_GRID_POINTS))
    grid = np.linspace(0.0, float(upper), int(nodes))
    est, se = stage1_cdf_grid(model, grid, mc_draws, seed, accuracy)
    return TabulatedCdf(grid, est, se, kind="cubic")


def stage1_outage(model, query, mc_draws, seed, accuracy=DEFAULT_ACCURACY):
    """First-stage outage probability: stage1_cdf at the query threshold."""
    return stage1_cdf(model, query.threshold_magnitude, mc_draws, seed, accuracy)


# ---------------------------------------------------------------------------
# second stage


def _stage2_log(model, r, n, scheme, accuracy):
    st1 = model.stage1
    m = np.ascontiguousarray(st1.port_mixture_power, dtype=float)
    tau = np.ascontiguousarray(st1.port_residual_std, dtype=float)
    if scheme == "adaptive":
        x, w = gauss_legendre(n)
        vals, nfail = kernels.stage2_log_factors_window(
            m, tau, r, model.replication, np.ascontiguousarray(x), np.ascontiguousarray(w),
            accuracy.series_rtol, int(accuracy.max_terms))
    else:
        x, w = gauss_laguerre(n)
        vals, nfail = kernels.stage2_log_factors(
            m, tau, r, model.replication, np.ascontiguousarray(x), np.ascontiguousarray(w),
            accuracy.series_rtol, int(accuracy.max_terms))
    if nfail:
        raise AccuracyError(f"{nfail} Marcum Q1 evaluations did not converge",
                            partial=np.exp(vals), detail={"failures": nfail})
    return np.asarray(vals)


def _log_disagreement(a, b):
    both_dead = np.isneginf(a) & np.isneginf(b)
    with np.errstate(invalid="ignore"):
        diff = np.abs(np.where(both_dead, 0.0, a - b))
    return np.where(np.isnan(diff), np.inf, diff)


def stage2_log_cdf(model, r, quad=DEFAULT_QUAD, accuracy=DEFAULT_ACCURACY):
    """Natural log of the second-stage CDF (keeps values below 1e-308)."""
    if not isinstance(model, Stage2Model):
        raise DomainError("stage2_cdf needs a Stage2Model")
    r = _check_grid(r)
    flat = np.ascontiguousarray(r.reshape(-1))
    finite = np.isfinite(flat)
    out = np.zeros(flat.size)
    rf = np.ascontiguousarray(flat[finite])
    n = int(quad.nodes)
    coarse = _stage2_log(model, rf, n, quad.scheme, accuracy)
    doublings = 1 if quad.scheme == "gauss-laguerre" else MAX_DOUBLINGS
    for step in range(doublings):
        fine = _stage2_log(model, rf, 2 * n, quad.scheme, accuracy)
        # |log F_n - log F_2n| approximates the relative error of F_n
        err = _log_disagreement(coarse, fine)
        if np.all(err <= quad.rel_tol):
            break
        if step == doublings - 1:
            worst = int(np.argmax(err))
            raise AccuracyError(
                f"stage-2 quadrature self-check failed: relative disagreement {err[worst]:.3e} "
                f"between {n} and {2 * n} nodes at r={rf[worst]:.6g} (rel_tol {quad.rel_tol:g})",
                partial=np.exp(fine),
                detail={"nodes": (n, 2 * n), "values": (float(np.exp(coarse[worst])),
                                                        float(np.exp(fine[worst])))})
        coarse, n = fine, 2 * n
    out[finite] = fine
    out = out.reshape(r.shape)
    return float(out) if np.ndim(r) == 0 else out


def stage2_cdf(model, r, quad=DEFAULT_QUAD, accuracy=DEFAULT_ACCURACY):
    """Second-stage CDF of g_FAS at r (scalar or array).

    Raises:
        AccuracyError: when the node-doubling self-check exceeds
            ``quad.rel_tol``; ``detail`` holds both node counts and values.
    """
    return np.exp(stage2_log_cdf(model, r, quad, accuracy))


def stage2_outage(model, query, quad=DEFAULT_QUAD, accuracy=DEFAULT_ACCURACY):
    """Second-stage outage probability at the query threshold."""
    return stage2_cdf(model, query.threshold_magnitude, quad, accuracy)


# ---------------------------------------------------------------------------
# reference model


def _reference_mu_checked(config):
    if config.n_ports < 2:
        raise DomainError("the reference model needs N >= 2")
    mu = reference_mu(config)[1:]
    bad = np.flatnonzero(np.abs(mu) >= 1.0)
    if bad.size:
        raise DomainError(f"reference correlation |mu_k| = 1 at port {int(bad[0]) + 2}; residual vanishes")
    return np.ascontiguousarray(mu)


def reference_log_outage(config, r, quad=DEFAULT_QUAD, accuracy=DEFAULT_ACCURACY):
    """log P(max_k |h_k| <= r) under the reference model.

    Port 1 is deterministic given the latent energy z, which truncates the
    integral to z <= r^2/sigma2; the remaining ports contribute Rician CDFs.
    """
    mu = _reference_mu_checked(config)
    r = float(r)
    if r < 0.0 or math.isnan(r):
        raise DomainError("r must be non-negative")
    if r == 0.0:
        return -math.inf
    r_over_sigma = r / math.sqrt(config.sigma2)
    z_max = r_over_sigma ** 2
    rtol, max_terms = accuracy.series_rtol, int(accuracy.max_terms)
    fails = []

    def log_f(z):
        vals, nfail = kernels.reference_log_integrand(np.array([float(z)]), mu, r_over_sigma,
                                                      rtol, max_terms)
        if nfail:
            fails.append(z)
        return float(vals[0])

    # rescale by the integrand maximum on a coarse grid so quad sees O(1) values
    probe = np.linspace(0.0, z_max, 65)[1:]
    log_probe, _ = kernels.reference_log_integrand(probe, mu, r_over_sigma, rtol, max_terms)
    shift = float(np.max(log_probe))
    if shift == -math.inf:
        return -math.inf
    val, err = integrate.quad(lambda z: math.exp(log_f(z) - shift), 0.0, z_max,
                              epsabs=0.0, epsrel=quad.rel_tol, limit=200,
                              points=[float(probe[int(np.argmax(log_probe))])])
    if fails:
        raise AccuracyError(f"{len(fails)} Marcum Q1 evaluations did not converge",
                            partial=math.exp(shift) * val)
    if not (val > 0.0) or err > 10.0 * quad.rel_tol * val + 1e-300:
        raise AccuracyError(f"reference integral did not reach rel_tol {quad.rel_tol:g} "
                            f"(value {val:.6e}, error estimate {err:.3e})",
                            partial=math.exp(shift) * val)
    return shift + math.log(val)


def reference_outage_fas1(config, query, quad=DEFAULT_QUAD, accuracy=DEFAULT_ACCURACY):
    """Outage probability of the single-latent reference model."""
    return math.exp(reference_log_outage(config, query.threshold_magnitude, quad, accuracy))


def reference_cdf(config, r, quad=DEFAULT_QUAD, accuracy=DEFAULT_ACCURACY):
    """Reference-model CDF of the max gain on a grid of r."""
    r = _check_grid(r)
    out = np.array([math.exp(reference_log_outage(config, x, quad, accuracy)) if np.isfinite(x) else 1.0
                    for x in r.reshape(-1)]).reshape(r.shape)
    return float(out) if np.ndim(r) == 0 else out
