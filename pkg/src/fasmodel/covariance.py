"""Jake's-model covariance, its spectrum, and epsilon-rank tools.

Port k of an N-port fluid antenna sits (k-1) W/(N-1) wavelengths from port
1, so under isotropic scattering

    Cov[g_k, g_l] = sigma2 * J0(2 pi (k - l) W / (N - 1)).

Spectrum
--------
The matrix is a sampled Bessel kernel and its spectrum decays
super-exponentially: most eigenvalues sit far below the rounding level of a
dense eigensolver (about 1e-16 * ||Sigma||).  ``spectral_model`` therefore
works from an exact low-rank factor instead of the matrix itself.  Using
J0(z) = (1/2pi) int cos(z sin t) dt and the midpoint rule, which is
exponentially accurate for periodic integrands,

    Sigma ~= F F^T,   F = sqrt(4 sigma2/Q) [cos(2 pi c k sin t_q), sin(...)],

with t_q = 2 pi (q + 1/2)/Q over the first quarter period (the other three
quarters repeat the same columns).  With Q >= 2 pi W + 64 the factor
reproduces the matrix to ~1e-15 sigma2.  One-sided Jacobi on F then gives
eigenvalues with small *relative* error, which is what counts when
thresholds such as 3e-15 are applied.

``eigendecompose`` is a general cyclic Jacobi eigensolver for any
symmetric matrix.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import ConvergenceError, DomainError
from .specfun import bessel_j0

DEFAULT_A_CONST = 3.1935
DEFAULT_FIT_N_GRID = tuple(range(10, 301, 10))
DEFAULT_FIT_W_GRID = tuple(round(0.1 * i, 1) for i in range(1, 51))
FIT_SCAN = (1.0, 6.0, 1e-4)

# work (rows * cols * min(rows, cols)) above which the factored spectrum is
# handed to LAPACK instead of the Jacobi kernel
JACOBI_WORK_LIMIT = 2.0e8


@dataclass(frozen=True)
class FasConfig:
    """One fluid antenna scenario.

    Attributes:
        n_ports: number of ports N.
        width: aperture W in wavelengths.
        sigma2: per-port channel power.
        snr_target_db: ratio of SNR threshold to average SNR, in dB.
    """

    n_ports: int
    width: float
    sigma2: float = 1.0
    snr_target_db: float = 0.0

    def __post_init__(self):
        if int(self.n_ports) != self.n_ports or self.n_ports < 1:
            raise DomainError(f"n_ports must be a positive integer, got {self.n_ports}")
        if not (math.isfinite(self.width) and self.width > 0.0):
            raise DomainError(f"width must be positive and finite, got {self.width}")
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0.0):
            raise DomainError(f"sigma2 must be positive and finite, got {self.sigma2}")
        if math.isnan(self.snr_target_db):
            raise DomainError("snr_target_db must not be NaN")
        object.__setattr__(self, "n_ports", int(self.n_ports))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "snr_target_db", float(self.snr_target_db))

    @property
    def spacing(self):
        """Port spacing c = W/(N-1) in wavelengths (inf for a single port)."""
        if self.n_ports == 1:
            return math.inf
        return self.width / (self.n_ports - 1)

    def require_asymptotic_regime(self):
        """Raise unless 0 < c < 1/2, the regime of the limiting spectrum."""
        if not self.spacing < 0.5:
            raise DomainError(
                f"port spacing W/(N-1) = {self.spacing:g} must be below 1/2 "
                f"(N={self.n_ports}, W={self.width:g})")

    def to_dict(self):
        return {"n_ports": self.n_ports, "width": self.width,
                "sigma2": self.sigma2, "snr_target_db": self.snr_target_db}


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpectralModel:
    """Jake covariance with its eigenpairs sorted non-increasingly.

    Attributes:
        config: the scenario.
        matrix: N x N covariance.
        eigenvalues: s_1 >= ... >= s_N >= 0.
        eigenvectors: N x N orthonormal, column l paired with s_l.
        method: how the spectrum was computed.
    """

    config: FasConfig
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    method: str = "jacobi-factored"

    @property
    def n_ports(self):
        return self.config.n_ports

    def truncation_energy(self, rank):
        """Sum of the eigenvalues beyond the first ``rank``."""
        return float(np.sum(self.eigenvalues[rank:]))

    def residuals(self):
        """Reconstruction, orthogonality and row-energy residuals (max-abs)."""
        u = self.eigenvectors
        s = self.eigenvalues
        recon = (u * s) @ u.T - self.matrix
        orth = u.T @ u - np.eye(u.shape[1])
        rows = (u * u) @ s - self.config.sigma2
        return {"reconstruction": float(np.max(np.abs(recon))),
                "orthogonality": float(np.max(np.abs(orth))),
                "row_energy": float(np.max(np.abs(rows)))}


@dataclass(frozen=True)
class EpsilonRank:
    """Number of eigenvalues above a threshold, with the discarded energy."""

    threshold: float
    rank: int
    truncation_energy: float


def jake_correlation(config, lags):
    """sigma2 * J0(2 pi lag W/(N-1)) for integer port lags."""
    lags = np.asarray(lags, dtype=float)
    if config.n_ports == 1:
        return np.where(lags == 0, config.sigma2, np.nan)
    return config.sigma2 * bessel_j0(2.0 * np.pi * lags * config.spacing)


def build_jake_covariance(config):
    """N x N Jake covariance matrix.

    Built from the N distinct lags, so it is exactly symmetric, exactly
    Toeplitz and has diagonal exactly sigma2.
    """
    n = config.n_ports
    col = np.asarray(jake_correlation(config, np.arange(n)), dtype=float).reshape(n)
    col[0] = config.sigma2
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return col[idx]


def plane_wave_factor(config):
    """Low-rank factor F with F F^T equal to the Jake matrix to ~1e-15 sigma2."""
    n = config.n_ports
    if n == 1:
        return np.full((1, 1), math.sqrt(config.sigma2))
    q = 4 * math.ceil((2.0 * math.pi * config.width + 64.0) / 4.0)
    t = 2.0 * np.pi * (np.arange(q // 4) + 0.5) / q
    x = 2.0 * np.pi * config.spacing * np.outer(np.arange(n), np.sin(t))
    return np.hstack([np.cos(x), np.sin(x)]) * math.sqrt(4.0 * config.sigma2 / q)


def _sort_pairs(values, vectors):
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    # deterministic signs: largest-magnitude entry of each vector positive
    pick = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pick, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return values, vectors * signs


def _factor_svd_jacobi(f, max_sweeps, tol):
    n, m = f.shape
    if n <= m:
        rows = np.array(f, dtype=float, order="C")
        v = np.eye(n)
        sweeps, ok = kernels.hestenes_sweeps(rows, v, max_sweeps, tol)
        vals = np.einsum("ij,ij->i", rows, rows)
        vecs = v.T.copy()
    else:
        rows = np.array(f.T, dtype=float, order="C")
        sweeps, ok = kernels.hestenes_sweeps(rows, np.empty((0, 0)), max_sweeps, tol)
        vals = np.einsum("ij,ij->i", rows, rows)
        norms = np.sqrt(vals)
        keep = norms > 0.0
        vecs = np.zeros((n, m))
        vecs[:, keep] = (rows[keep] / norms[keep, None]).T
    if not ok:
        raise ConvergenceError(
            f"one-sided Jacobi did not converge in {max_sweeps} sweeps",
            sweeps=sweeps)
    return vals, vecs


def _complete_basis(vals, vecs, n):
    """Extend k <= n orthonormal columns to a full basis with zero eigenvalues."""
    keep = vals > 0.0
    vals = vals[keep]
    vecs = vecs[:, keep]
    k = vecs.shape[1]
    if k < n:
        # re-orthonormalise then append an orthonormal complement
        qfull, _ = np.linalg.qr(vecs, mode="complete")
        vecs = np.hstack([vecs, qfull[:, k:]])
        vals = np.concatenate([vals, np.zeros(n - k)])
    return vals, vecs


def factored_spectrum(config, method="auto", max_sweeps=60, tol=1e-15,
                      vectors=True):
    """Eigenvalues (and optionally eigenvectors) of the Jake matrix via its factor.

    Args:
        config: scenario.
        method: "jacobi" (one-sided Jacobi kernel), "lapack" (numpy SVD)
            or "auto" (Jacobi unless the problem is large).
        max_sweeps, tol: Jacobi controls.
        vectors: also return a full orthonormal eigenvector matrix.

    Returns:
        (eigenvalues, eigenvectors or None, method used).
    """
    f = plane_wave_factor(config)
    n, m = f.shape
    if method == "auto":
        work = float(n) * m * min(n, m)
        method = "jacobi" if work <= JACOBI_WORK_LIMIT else "lapack"
    if method == "jacobi":
        vals, vecs = _factor_svd_jacobi(f, max_sweeps, tol)
    elif method == "lapack":
        if vectors:
            u, sv, _ = np.linalg.svd(f, full_matrices=False)
            vals, vecs = sv * sv, u
        else:
            sv = np.linalg.svd(f, compute_uv=False)
            vals, vecs = sv * sv, None
    else:
        raise DomainError(f"unknown spectrum method {method!r}")
    if not vectors:
        vals = np.sort(vals)[::-1]
        return np.concatenate([vals, np.zeros(max(n - vals.size, 0))])[:n], None, method
    vals, vecs = _complete_basis(vals, vecs, n)
    vals, vecs = _sort_pairs(vals, vecs)
    return vals[:n], vecs[:, :n], method


def jake_eigenvalues(config, method="auto"):
    """Sorted eigenvalues of the Jake matrix (no eigenvectors)."""
    vals, _, _ = factored_spectrum(config, method=method, vectors=False)
    return vals


def eigendecompose(matrix, max_sweeps=50, tol=1e-14, method="jacobi"):
    """Full symmetric eigendecomposition.

    Args:
        matrix: N x N symmetric matrix.
        max_sweeps: sweep limit for the cyclic Jacobi solver.
        tol: stop once the off-diagonal Frobenius norm is below
            ``tol * ||matrix||_F``.
        method: "jacobi" (default) or "lapack" (numpy.linalg.eigh, useful
            as a cross-check).

    Returns:
        (eigenvalues sorted non-increasingly, orthonormal eigenvectors as
        columns).

    Raises:
        DomainError: for non-square or non-symmetric input.
        ConvergenceError: when the sweep limit is reached; ``residual``
            holds the remaining off-diagonal norm.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("eigendecompose needs a square matrix")
    scale = max(float(np.max(np.abs(a))), 1e-300) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise DomainError("eigendecompose needs a symmetric matrix")
    n = a.shape[0]
    if method == "lapack":
        vals, vecs = np.linalg.eigh(a)
        return _sort_pairs(vals, vecs)
    if method != "jacobi":
        raise DomainError(f"unknown eigensolver {method!r}")
    a = np.ascontiguousarray(0.5 * (a + a.T))
    v = np.eye(n)
    sweeps, off = kernels.jacobi_eigh(a, v, max_sweeps, tol)
    norm = float(np.linalg.norm(matrix))
    if off > tol * norm:
        raise ConvergenceError(
            f"Jacobi eigensolver stopped after {sweeps} sweeps with off-diagonal "
            f"norm {off:.3e}", residual=off, sweeps=sweeps)
    return _sort_pairs(np.diag(a).copy(), v)


def spectral_model(config, method="auto"):
    """Build the covariance and its eigenpairs for ``config``.

    Args:
        config: scenario.
        method: "auto" / "jacobi" / "lapack" use the factored spectrum (see
            module notes); "dense-jacobi" runs ``eigendecompose`` on the
            matrix itself.

    Tiny negative eigenvalues (dense route only) are clamped to zero.
    """
    matrix = build_jake_covariance(config)
    if method == "dense-jacobi":
        vals, vecs = eigendecompose(matrix)
        used = method
    else:
        vals, vecs, used = factored_spectrum(config, method=method)
        used = f"{used}-factored"
    vals = np.maximum(vals, 0.0)
    return SpectralModel(config=config, matrix=_readonly(matrix),
                         eigenvalues=_readonly(vals), eigenvectors=_readonly(vecs),
                         method=used)


def epsilon_rank(spectral, threshold):
    """Count of eigenvalues strictly above ``threshold``.

    Accepts a SpectralModel or a plain array of eigenvalues.
    """
    if not threshold > 0.0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    vals = spectral.eigenvalues if isinstance(spectral, SpectralModel) else np.asarray(spectral)
    rank = int(np.count_nonzero(vals > threshold))
    order = np.sort(vals)[::-1]
    return EpsilonRank(threshold=float(threshold), rank=rank,
                       truncation_energy=float(np.sum(order[rank:])))


def epsilon_rank_formula(config, a_const=DEFAULT_A_CONST):
    """Closed-form epsilon-rank ceil(a W N/(N-1)), clamped to [1, N-1]."""
    if config.n_ports < 2:
        raise DomainError("epsilon_rank_formula needs at least two ports")
    if not a_const > 0.0:
        raise DomainError(f"a_const must be positive, got {a_const}")
    n = config.n_ports
    raw = math.ceil(a_const * config.width * n / (n - 1))
    return int(min(max(raw, 1), n - 1))


@dataclass(frozen=True)
class FitResult:
    """Outcome of the epsilon-rank constant fit.

    Attributes:
        a: fitted constant (centre of the minimising run of scan values).
        mse: mean squared rank error at ``a``.
        interval: first and last scan values of that minimising run.
        pairs: (N, W) pairs used.
        numeric_ranks: numeric epsilon-rank per pair.
        dropped: pairs left out because W/(N-1) >= 1/2.
    """

    a: float
    mse: float
    interval: tuple
    pairs: tuple
    numeric_ranks: tuple
    dropped: tuple = ()

    @property
    def width(self):
        return self.interval[1] - self.interval[0]


def fit_grid_pairs(n_grid, w_grid, drop_invalid=False):
    """Cartesian grid of (N, W), checking the spacing condition.

    Returns (valid pairs, dropped pairs).  Raises DomainError listing the
    offenders unless ``drop_invalid``.
    """
    pairs, bad = [], []
    for n in n_grid:
        for w in w_grid:
            if n < 2 or not w / (n - 1) < 0.5:
                bad.append((int(n), float(w)))
            else:
                pairs.append((int(n), float(w)))
    if bad and not drop_invalid:
        raise DomainError(f"grid pairs with W/(N-1) >= 1/2: {bad}")
    if not pairs:
        raise DomainError("fit grid is empty")
    return tuple(pairs), tuple(bad)


def _scan_fit(pairs, ranks, scan):
    lo, hi, step = scan
    grid_a = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    ns = np.array([p[0] for p in pairs], dtype=float)
    ws = np.array([p[1] for p in pairs], dtype=float)
    x = ws * ns / (ns - 1.0)
    target = np.asarray(ranks, dtype=float)
    mse = np.empty(grid_a.size)
    for start in range(0, grid_a.size, 2048):
        a = grid_a[start:start + 2048, None]
        pred = np.clip(np.ceil(a * x[None, :]), 1.0, ns[None, :] - 1.0)
        mse[start:start + 2048] = np.mean((target[None, :] - pred) ** 2, axis=1)
    best = float(np.min(mse))
    i0 = int(np.argmax(mse == best))
    i1 = i0
    while i1 + 1 < mse.size and mse[i1 + 1] == best:
        i1 += 1
    return 0.5 * (grid_a[i0] + grid_a[i1]), best, (float(grid_a[i0]), float(grid_a[i1]))


def fit_a_constant(n_grid=DEFAULT_FIT_N_GRID, w_grid=DEFAULT_FIT_W_GRID,
                   sigma2=1.0, scan=FIT_SCAN, drop_invalid=None, ranks=None):
    """Least-squares fit of a in epsilon-rank ~ ceil(a W N/(N-1)).

    The numeric epsilon-rank uses the threshold sigma2/(2N).  The mean
    squared error is piecewise constant in a, so it is scanned on
    ``scan = (lo, hi, step)`` and the centre of the first minimising run
    is returned.

    Args:
        n_grid, w_grid: grid axes; every pair needs W/(N-1) < 1/2.
        sigma2: channel power (the ranks do not depend on it).
        scan: (lo, hi, step) of the a scan.
        drop_invalid: skip pairs violating the spacing condition instead of
            raising.  Defaults to True for the built-in grid (it contains
            N=10 with W >= 4.5) and False otherwise.
        ranks: optional precomputed numeric ranks (one per valid pair).
    """
    if drop_invalid is None:
        drop_invalid = (tuple(n_grid) == DEFAULT_FIT_N_GRID
                        and tuple(w_grid) == DEFAULT_FIT_W_GRID)
    pairs, dropped = fit_grid_pairs(n_grid, w_grid, drop_invalid)
    if ranks is None:
        ranks = tuple(numeric_epsilon_rank(FasConfig(n, w, sigma2)) for n, w in pairs)
    a, mse, interval = _scan_fit(pairs, ranks, scan)
    return FitResult(a=float(a), mse=float(mse), interval=interval, pairs=pairs,
                     numeric_ranks=tuple(int(r) for r in ranks), dropped=dropped)


def numeric_epsilon_rank(config, threshold=None):
    """Numeric epsilon-rank with the default threshold sigma2/(2N)."""
    if threshold is None:
        threshold = config.sigma2 / (2.0 * config.n_ports)
    return epsilon_rank(jake_eigenvalues(config), threshold).rank


def limiting_eigen_cdf(x, c, sigma2=1.0):
    """Limiting eigenvalue distribution of large Jake matrices.

    For port spacing 0 < c < 1/2 the empirical eigenvalue CDF tends to

        D(x) = 1 - 2c                                  for x < sigma2/(pi c)
        D(x) = 1 - 2c + sqrt((2c)^2 - 4 sigma2^2/(pi x)^2)   otherwise.

    A fraction 1 - 2c of the eigenvalues collapses to zero.
    """
    if not 0.0 < c < 0.5:
        raise DomainError(f"c must lie in (0, 1/2), got {c}")
    xa = np.asarray(x, dtype=float)
    knee = sigma2 / (np.pi * c)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(np.maximum((2.0 * c) ** 2 - 4.0 * sigma2 ** 2 / (np.pi * xa) ** 2, 0.0))
    out = np.where(xa >= knee, 1.0 - 2.0 * c + root, 1.0 - 2.0 * c)
    return float(out) if np.ndim(x) == 0 else out
