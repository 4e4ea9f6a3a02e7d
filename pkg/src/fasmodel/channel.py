"""Channel models, samplers and replication-count selection.

All models share one latent convention: every real latent (x_k, y_k, a_l,
b_l) is zero-mean normal with variance 1/2, so each complex latent
x + j y has unit power.

General model
-------------
A channel vector h is parameterised by sigma_h and an N x M coefficient
matrix alpha:

    h_k = sigma_h sqrt(1 - sum_l alpha_kl^2) (x_k + j y_k)
          + sigma_h sum_l alpha_kl (a_l + j b_l).

* exact model: M = N, alpha_kl = sqrt(s_l) u_kl / sigma (residual vanishes);
* first-stage model: keep the first eps_rank eigenpairs;
* reference model: M = 1, alpha_k1 = J0(2 pi (k-1) W/(N-1)).

Random numbers
--------------
Draws are generated in fixed chunks of ``CHUNK`` draws.  Chunk i of a
sampler uses a Philox generator keyed by (seed, stream, i), where the
stream identifies the sampler.  Results are therefore reproducible,
independent of how many draws are requested downstream of a chunk
boundary, and chunks can be produced in any order.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import FasConfig, SpectralModel, jake_correlation
from .errors import ConstructionError, DomainError

CHUNK = 8192
HALF_SQRT = math.sqrt(0.5)

STREAM_EXACT = 1
STREAM_STAGE1 = 2
STREAM_REFERENCE = 3
STREAM_GHAT = 4
STREAM_GTILDE = 5
STREAM_LATENT = 6
STREAM_INDEPENDENT = 7

# J0 crosses 1/2 near this argument
J0_HALF_ARG = 1.52


def chunk_generator(seed, stream, chunk):
    """Generator for one chunk of one sampler stream."""
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream), int(chunk)])
    return np.random.Generator(np.random.Philox(seq))


def complex_normal(rng, shape):
    """Complex normal array whose real and imaginary parts have variance 1/2."""
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * HALF_SQRT


def iter_chunks(draws, seed, stream):
    """Yield (chunk index, rows in chunk, generator) covering ``draws`` draws."""
    if int(draws) < 1:
        raise DomainError(f"draws must be >= 1, got {draws}")
    n_chunks = -(-int(draws) // CHUNK)
    for i in range(n_chunks):
        rows = min(CHUNK, int(draws) - i * CHUNK)
        yield i, rows, chunk_generator(seed, stream, i)


# ---------------------------------------------------------------------------
# model types


@dataclass(frozen=True)
class GeneralModel:
    """Parameters (sigma_h, alpha) of the general correlated channel model."""

    sigma_h: float
    alpha: np.ndarray = field(repr=False)

    def residual_weights(self):
        """1 - sum_l alpha_kl^2 per port (clipped at zero)."""
        return np.maximum(1.0 - np.sum(self.alpha ** 2, axis=1), 0.0)

    def covariance(self):
        """Covariance of h: sigma_h^2 on the diagonal, sigma_h^2 alpha alpha^T off it."""
        cov = self.sigma_h ** 2 * (self.alpha @ self.alpha.T)
        np.fill_diagonal(cov, self.sigma_h ** 2)
        return cov


def exact_model_parameters(spectral):
    """General-model parameters that reproduce the Jake covariance exactly."""
    sigma = math.sqrt(spectral.config.sigma2)
    alpha = spectral.eigenvectors * np.sqrt(spectral.eigenvalues) / sigma
    return GeneralModel(sigma_h=sigma, alpha=alpha)


def reference_mu(config):
    """Reference-port correlations mu_k = J0(2 pi (k-1) W/(N-1)), mu_1 = 1."""
    mu = np.asarray(jake_correlation(config, np.arange(config.n_ports)),
                    dtype=float).reshape(config.n_ports) / config.sigma2
    mu[0] = 1.0
    return np.clip(mu, -1.0, 1.0)


def reference_model_parameters(config):
    """Single-latent reference parameterisation (M = 1)."""
    return GeneralModel(sigma_h=math.sqrt(config.sigma2),
                        alpha=reference_mu(config)[:, None])


@dataclass(frozen=True)
class Stage1Model:
    """First-stage approximation: eps_rank shared latents plus per-port residuals.

    Attributes:
        spectral: source spectrum.
        eps_rank: number of retained eigenpairs M, 1 <= M < N.
        retained_values: s_1..s_M.
        retained_vectors: N x M, columns u_1..u_M.
        port_mixture_power: m_k = sum_{l<=M} s_l u_kl^2, stored as
            sigma2 - tau_k^2.
        port_residual_var: tau_k^2, evaluated as the discarded tail
            sum_{l>M} s_l u_kl^2 so that it keeps full relative accuracy
            when it is tiny.
        port_residual_std: tau_k.
    """

    spectral: SpectralModel = field(repr=False)
    eps_rank: int
    retained_values: np.ndarray = field(repr=False)
    retained_vectors: np.ndarray = field(repr=False)
    port_mixture_power: np.ndarray = field(repr=False)
    port_residual_var: np.ndarray = field(repr=False)
    port_residual_std: np.ndarray = field(repr=False)

    @property
    def config(self):
        return self.spectral.config

    @property
    def n_ports(self):
        return self.spectral.config.n_ports

    @property
    def latent_dimension(self):
        """Real latent dimensions integrated over by the first-stage CDF."""
        return 2 * self.eps_rank

    def loading(self):
        """N x M matrix sqrt(s_l) u_kl mapping latents to ports."""
        return self.retained_vectors * np.sqrt(self.retained_values)

    def parameters(self):
        """Equivalent general-model parameters."""
        sigma = math.sqrt(self.config.sigma2)
        return GeneralModel(sigma_h=sigma, alpha=self.loading() / sigma)

    def covariance(self):
        """Covariance of the first-stage vector: sigma2 on the diagonal."""
        cov = self.loading() @ self.loading().T
        np.fill_diagonal(cov, self.config.sigma2)
        return cov


def build_stage1(spectral, eps_rank):
    """First-stage model keeping the ``eps_rank`` largest eigenpairs.

    Raises:
        ConstructionError: unless 1 <= eps_rank < N and every residual
            scale is positive.
    """
    n = spectral.config.n_ports
    if n < 2:
        raise ConstructionError("the first-stage model needs N >= 2 (use the Rayleigh form for N = 1)")
    if int(eps_rank) != eps_rank or not 1 <= eps_rank < n:
        raise ConstructionError(f"eps_rank must satisfy 1 <= eps_rank < N={n}, got {eps_rank}")
    eps_rank = int(eps_rank)
    s = np.asarray(spectral.eigenvalues, dtype=float)
    u = np.asarray(spectral.eigenvectors, dtype=float)
    weighted = u * u * s
    tail = weighted[:, eps_rank:].sum(axis=1)
    if np.any(tail <= 0.0):
        bad = np.flatnonzero(tail <= 0.0)
        raise ConstructionError(
            f"residual scale vanishes at ports {bad.tolist()[:10]} for eps_rank={eps_rank}")
    # m_k is derived from the stored residual so both sides share one source
    m = spectral.config.sigma2 - tail
    out = Stage1Model(spectral=spectral, eps_rank=eps_rank,
                      retained_values=s[:eps_rank].copy(),
                      retained_vectors=u[:, :eps_rank].copy(),
                      port_mixture_power=m, port_residual_var=tail,
                      port_residual_std=np.sqrt(tail))
    for arr in (out.retained_values, out.retained_vectors, out.port_mixture_power,
                out.port_residual_var, out.port_residual_std):
        arr.flags.writeable = False
    return out


@dataclass(frozen=True)
class Stage2Model:
    """First-stage model plus the replication count R."""

    stage1: Stage1Model
    replication: int

    def __post_init__(self):
        if int(self.replication) != self.replication or self.replication < 1:
            raise ConstructionError(f"replication must be a positive integer, got {self.replication}")
        object.__setattr__(self, "replication", int(self.replication))

    @property
    def config(self):
        return self.stage1.config


@dataclass(frozen=True)
class ChannelSampleBatch:
    """Sampled port magnitudes.

    Attributes:
        gains: S x N array of |g_k| (S x N x R for replicated matrices).
        seed: seed used.
        model_tag: "exact", "stage1", "reference", "ghat", "gtilde" or
            "independent".
        complex_gains: the complex gains when requested, else None.
    """

    gains: np.ndarray = field(repr=False)
    seed: int
    model_tag: str
    complex_gains: np.ndarray = field(default=None, repr=False)

    @property
    def draws(self):
        return self.gains.shape[0]

    def maxima(self):
        """Per-draw maximum magnitude over all ports (and columns)."""
        return self.gains.reshape(self.gains.shape[0], -1).max(axis=1)


# ---------------------------------------------------------------------------
# samplers


def _exact_chunk(loading, rows, rng):
    z = complex_normal(rng, (rows, loading.shape[1]))
    return z @ loading.T


def _exact_loading(spectral):
    s = np.asarray(spectral.eigenvalues)
    keep = s > 0.0
    return np.ascontiguousarray(spectral.eigenvectors[:, keep] * np.sqrt(s[keep]))


def _stage1_chunk(loading, tau, rows, rng):
    z = complex_normal(rng, (rows, loading.shape[1]))
    w = complex_normal(rng, (rows, tau.size))
    return w * tau + z @ loading.T


def _reference_chunk(sigma, mu, rows, rng):
    z = complex_normal(rng, (rows, 1))
    w = complex_normal(rng, (rows, mu.size))
    return sigma * (np.sqrt(1.0 - mu * mu) * w + mu * z)


def _collect(chunk_fn, draws, seed, stream, keep_complex, tag, reduce=None):
    parts, cparts = [], []
    for _, rows, rng in iter_chunks(draws, seed, stream):
        g = chunk_fn(rows, rng)
        mag = np.abs(g)
        parts.append(reduce(mag) if reduce else mag)
        if keep_complex:
            cparts.append(g)
    if reduce is not None:
        return np.concatenate(parts)
    return ChannelSampleBatch(gains=np.concatenate(parts), seed=int(seed), model_tag=tag,
                              complex_gains=np.concatenate(cparts) if keep_complex else None)


def _row_max(mag):
    return mag.reshape(mag.shape[0], -1).max(axis=1)


def sample_exact(spectral, draws, seed, keep_complex=False):
    """Exact channel draws g = sum_l sqrt(s_l) u_l (a_l + j b_l).

    Uses the eigen-representation with only the non-zero eigenvalues, which
    is distributionally exact.
    """
    loading = _exact_loading(spectral)
    return _collect(lambda rows, rng: _exact_chunk(loading, rows, rng),
                    draws, seed, STREAM_EXACT, keep_complex, "exact")


def exact_maxima(spectral, draws, seed):
    """max_k |g_k| per draw; equals sample_exact(...).maxima() without storing S x N."""
    loading = _exact_loading(spectral)
    return _collect(lambda rows, rng: _exact_chunk(loading, rows, rng),
                    draws, seed, STREAM_EXACT, False, "exact", reduce=_row_max)


def sample_stage1(model, draws, seed, keep_complex=False):
    """First-stage draws: shared eigen-latents plus independent residuals."""
    if not isinstance(model, Stage1Model):
        raise ConstructionError("sample_stage1 needs a Stage1Model")
    loading = np.ascontiguousarray(model.loading())
    tau = np.asarray(model.port_residual_std)
    return _collect(lambda rows, rng: _stage1_chunk(loading, tau, rows, rng),
                    draws, seed, STREAM_STAGE1, keep_complex, "stage1")


def stage1_maxima(model, draws, seed):
    """max_k |g^_k| per draw; equals sample_stage1(...).maxima()."""
    loading = np.ascontiguousarray(model.loading())
    tau = np.asarray(model.port_residual_std)
    return _collect(lambda rows, rng: _stage1_chunk(loading, tau, rows, rng),
                    draws, seed, STREAM_STAGE1, False, "stage1", reduce=_row_max)


def sample_reference_fas1(spectral, draws, seed, keep_complex=False):
    """Reference-model draws: one shared latent, correlations mu_k to port 1."""
    config = spectral.config if isinstance(spectral, SpectralModel) else spectral
    if config.n_ports < 2:
        raise DomainError("the reference model needs N >= 2")
    mu = reference_mu(config)
    sigma = math.sqrt(config.sigma2)
    return _collect(lambda rows, rng: _reference_chunk(sigma, mu, rows, rng),
                    draws, seed, STREAM_REFERENCE, keep_complex, "reference")


def reference_maxima(config, draws, seed):
    """max_k |h_k| per draw under the reference model."""
    mu = reference_mu(config)
    sigma = math.sqrt(config.sigma2)
    return _collect(lambda rows, rng: _reference_chunk(sigma, mu, rows, rng),
                    draws, seed, STREAM_REFERENCE, False, "reference", reduce=_row_max)


def sample_independent(config, draws, seed, keep_complex=False):
    """Independent CN(0, sigma2) ports; a closed-form test case for the max."""
    sigma = math.sqrt(config.sigma2)
    n = config.n_ports
    return _collect(lambda rows, rng: sigma * complex_normal(rng, (rows, n)),
                    draws, seed, STREAM_INDEPENDENT, keep_complex, "independent")


def sample_ghat_matrix(model, draws, seed, keep_complex=False):
    """Draws of the N x R matrix with independent first-stage columns.

    Column r has its own latents (a_lr, b_lr); residuals are fresh per
    entry.  ``gains`` has shape S x N x R.
    """
    st1 = model.stage1
    loading = np.ascontiguousarray(st1.loading())
    tau = np.asarray(st1.port_residual_std)[:, None]
    n_rep = model.replication

    def chunk(rows, rng):
        z = complex_normal(rng, (rows, loading.shape[1], n_rep))
        w = complex_normal(rng, (rows, loading.shape[0], n_rep))
        return w * tau + np.einsum("kl,slr->skr", loading, z)

    return _collect(chunk, draws, seed, STREAM_GHAT, keep_complex, "ghat")


def sample_gtilde_matrix(model, draws, seed, keep_complex=False):
    """Draws of the N x R matrix with independent rows.

    Row k has its own latents (a_lk, b_lk) shared by every column r;
    residuals are fresh per entry.  ``gains`` has shape S x N x R.
    """
    st1 = model.stage1
    loading = np.ascontiguousarray(st1.loading())
    tau = np.asarray(st1.port_residual_std)[:, None]
    n_rep = model.replication

    def chunk(rows, rng):
        z = complex_normal(rng, (rows, loading.shape[0], loading.shape[1]))
        w = complex_normal(rng, (rows, loading.shape[0], n_rep))
        shared = np.einsum("kl,skl->sk", loading, z)
        return w * tau + shared[:, :, None]

    return _collect(chunk, draws, seed, STREAM_GTILDE, keep_complex, "gtilde")


def sample_latent_energy(model, draws, seed):
    """Per-port latent energy |sum_l sqrt(s_l) u_kl (a_l + j b_l)|^2, S x N.

    Each column is exponential with mean m_k.
    """
    loading = np.ascontiguousarray(model.loading())
    parts = []
    for _, rows, rng in iter_chunks(draws, seed, STREAM_LATENT):
        z = complex_normal(rng, (rows, loading.shape[1]))
        parts.append(np.abs(z @ loading.T) ** 2)
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# covariance blocks of the replicated matrices


def ghat_covariance(model):
    """Covariance of the column-stacked independent-column matrix (NR x NR)."""
    return np.kron(np.eye(model.replication), model.stage1.covariance())


def gtilde_covariance(model):
    """Covariance of the row-stacked independent-row matrix (NR x NR).

    Block k is R x R with sigma2 on the diagonal and m_k elsewhere.
    """
    st1 = model.stage1
    n_rep = model.replication
    blocks = []
    for m in st1.port_mixture_power:
        b = np.full((n_rep, n_rep), m)
        np.fill_diagonal(b, st1.config.sigma2)
        blocks.append(b)
    out = np.zeros((st1.n_ports * n_rep,) * 2)
    for k, b in enumerate(blocks):
        out[k * n_rep:(k + 1) * n_rep, k * n_rep:(k + 1) * n_rep] = b
    return out


def induced_one_norm(matrix):
    """Maximum absolute column sum."""
    return float(np.max(np.sum(np.abs(matrix), axis=0)))


# ---------------------------------------------------------------------------
# replication count


def select_replication(config):
    """R* = max(1, min(floor(1.52 (N-1)/(2 pi W)), N)).

    The lower clamp keeps the exponent 1/R defined when the floor is 0.
    """
    n = config.n_ports
    if n < 2:
        return 1
    raw = math.floor(J0_HALF_ARG * (n - 1) / (2.0 * math.pi * config.width))
    return int(max(1, min(raw, n)))


def divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def p3_objective(config, r):
    """||Sigma_G(R) - sigma2 I(R)||_1 through the per-column sums.

    Sigma_G(R) repeats the Jake matrix on R diagonal blocks and I(R) is
    block diagonal with all-ones R x R blocks.  For R dividing N the norm
    equals that of Sigma_g minus sigma2 on its own R x R diagonal blocks,
    i.e. the largest column sum of |sigma2 J0(...) - sigma2 [same block]|.
    """
    n = config.n_ports
    if int(r) != r or r < 1 or n % int(r):
        raise DomainError(f"R={r} is not a divisor of N={n}")
    r = int(r)
    lags = np.asarray(jake_correlation(config, np.arange(n)), dtype=float).reshape(n)
    lags[0] = config.sigma2
    k = np.arange(n)
    best = 0.0
    for col in range(n):
        block = col // r
        same = (k // r) == block
        vals = lags[np.abs(k - col)] - np.where(same, config.sigma2, 0.0)
        best = max(best, float(np.sum(np.abs(vals))))
    return best


@dataclass(frozen=True)
class P3Solution:
    """Divisor choice for the block-structure problem.

    Attributes:
        r: divisor of N minimising the objective (largest one on ties).
        objectives: {divisor: objective}.
        rule_r: greatest divisor with J0(2 pi (R-1) W/(N-1)) >= 1/2, the
            first-lobe threshold rule; None when only R = 1 qualifies.
        rule_literal_r: greatest divisor > 1 with J0(...) <= 1/2 (the
            inequality as printed in the source derivation); 1 if none.
        rule_agrees: whether ``rule_r`` equals ``r``.
        literal_condition_met: whether any divisor > 1 satisfied the
            printed inequality.
    """

    r: int
    objectives: dict
    rule_r: int
    rule_literal_r: int
    rule_agrees: bool
    literal_condition_met: bool


def solve_p3(config):
    """Divisor of N minimising the block-structure objective (largest on ties)."""
    return solve_p3_details(config).r


def solve_p3_details(config):
    """Minimise the block-structure objective and report the threshold rules."""
    n = config.n_ports
    if n < 2:
        raise DomainError("solve_p3 needs N >= 2")
    objectives = {d: p3_objective(config, d) for d in divisors(n)}
    best = min(objectives.values())
    # tolerate rounding-level ties
    tie = 1e-12 * max(best, config.sigma2)
    r_opt = max(d for d, v in objectives.items() if v <= best + tie)
    j0_vals = {d: float(jake_correlation(config, d - 1)) / config.sigma2 for d in objectives}
    first_lobe = [d for d in objectives
                  if all(j0_vals[e] >= 0.5 for e in range(1, d + 1) if e in j0_vals)
                  and j0_vals[d] >= 0.5]
    rule_r = max(first_lobe) if first_lobe else 1
    literal = [d for d in objectives if d > 1 and j0_vals[d] <= 0.5]
    return P3Solution(r=r_opt, objectives=objectives, rule_r=rule_r,
                      rule_literal_r=max(literal) if literal else 1,
                      rule_agrees=rule_r == r_opt,
                      literal_condition_met=bool(literal))
