# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Scalar special functions, the Marcum Q1 evaluator, the Jacobi eigen/SVD
sweeps and the per-grid CDF accumulators used by the outage evaluators.
``_pykernels`` holds a line-by-line pure-Python twin of everything here.
"""
import numpy as np

from libc.math cimport (sqrt, exp, log, expm1, cos, sin, fabs, ceil,
                        erfc, lgamma, INFINITY, M_PI)

cdef double SQRT_2PI = sqrt(2.0 * M_PI)
cdef double LOG_SQRT_2PI = 0.5 * log(2.0 * M_PI)
cdef double SQRT2 = sqrt(2.0)
cdef double PI_4 = 0.25 * M_PI
cdef double LN2 = log(2.0)

cdef double J0_SERIES_MAX = 12.0
cdef double I0E_SERIES_MAX = 20.0
cdef double MARCUM_SERIES_MAX_AB = 200.0
# weighted Bessel sum switches to its power series below these
cdef double SMALL_X = 1e-3
cdef double TINY_RHO = 1e-100
cdef double MARCUM_EXPANSION_MIN_A = 15.0
cdef double TAIL_LOG_CUT = 45.0

# factor is 1 to double precision once b - a exceeds this
cdef double UPPER_SKIP = 9.5
# factor underflows (log < -800) once a - b exceeds this
cdef double LOWER_DEAD = 40.0
cdef double LOG_DEAD = -750.0
# stage-2 window: phi <= exp(-WINDOW_HI^2/2) beyond b + WINDOW_HI; weight cut at u = WEIGHT_CUT
cdef double WINDOW_HI = 12.0
cdef double WEIGHT_CUT = 64.0

cdef double GL_X[64]
cdef double GL_W[64]

_x, _w = np.polynomial.legendre.leggauss(64)
for _i in range(64):
    GL_X[_i] = 0.5 * (_x[_i] + 1.0)
    GL_W[_i] = 0.5 * _w[_i]


cdef double c_j0(double x) noexcept nogil:
    cdef double q, term, total, p, coef, prev, chi
    cdef int k, m
    x = fabs(x)
    if x <= J0_SERIES_MAX:
        q = -0.25 * x * x
        term = 1.0
        total = 1.0
        k = 1
        while True:
            term *= q / (k * k)
            total += term
            if fabs(term) <= 1e-17 * max(fabs(total), 1e-3) and k > 2:
                break
            k += 1
        return total
    p = 1.0
    q = 0.0
    coef = 1.0
    prev = INFINITY
    k = 1
    while k < 60:
        coef *= (2 * k - 1) * (2 * k - 1) / (8.0 * k * x)
        if coef >= prev or coef < 1e-18:
            break
        prev = coef
        m = k // 2
        if k % 2 == 1:
            q += (-coef if m % 2 == 0 else coef)
        else:
            p += (coef if m % 2 == 0 else -coef)
        k += 1
    chi = x - PI_4
    return sqrt(2.0 / (M_PI * x)) * (p * cos(chi) - q * sin(chi))


cdef double c_i0e(double x) noexcept nogil:
    cdef double q, term, total, coef, nxt
    cdef int k
    x = fabs(x)
    if x <= I0E_SERIES_MAX:
        q = 0.25 * x * x
        term = 1.0
        total = 1.0
        k = 1
        while term > 1e-17 * total:
            term *= q / (k * k)
            total += term
            k += 1
        return total * exp(-x)
    coef = 1.0
    total = 1.0
    k = 1
    while k < 80:
        nxt = coef * (2 * k - 1) * (2 * k - 1) / (8.0 * k * x)
        if nxt >= coef or nxt < 1e-18:
            break
        coef = nxt
        total += coef
        k += 1
    return total / sqrt(2.0 * M_PI * x)


cdef double c_erfcx(double x) noexcept nogil:
    cdef double inv, term, total
    cdef int k
    if x < 25.0:
        return exp(x * x) * erfc(x)
    inv = 1.0 / (2.0 * x * x)
    term = 1.0
    total = 1.0
    k = 1
    while k < 30:
        term *= -(2 * k - 1) * inv
        total += term
        if fabs(term) < 1e-17:
            break
        k += 1
    return total / (x * sqrt(M_PI))


cdef int c_weighted_small(double x, double rho, int start, double rtol,
                          double* out) noexcept nogil:
    cdef double y = 0.5 * x
    cdef double q = y * y
    cdef double lead = start * (log(rho) + log(y)) - lgamma(start + 1.0) - x
    cdef double inner, term, total, base
    cdef int j, k
    if rho < TINY_RHO:
        inner = 1.0
        term = 1.0
        for j in range(1, 2000):
            term *= q / (j * (start + j))
            inner += term
            if term <= 1e-17 * inner:
                break
        out[0] = lead + log(inner)
        return 0
    total = 0.0
    base = 1.0
    k = start
    while True:
        inner = 1.0
        term = 1.0
        j = 1
        while True:
            term *= q / (j * (k + j))
            inner += term
            if term <= 1e-17 * inner:
                break
            j += 1
        total += base * inner
        if base * inner <= rtol * total or k - start >= 200:
            break
        k += 1
        base *= rho * y / k
    out[0] = lead + log(total)
    return 0


cdef int c_weighted_sum(double x, double rho, int start, int nmax, double rtol,
                        int max_terms, double* out) noexcept nogil:
    if x < SMALL_X or rho < TINY_RHO:
        return c_weighted_small(x, rho, start, rtol, out)
    cdef double xr = x * rho
    cdef double inv_rho2 = 1.0 / (rho * rho)
    cdef int kmax = nmax, top, k
    cdef double t_next, t_cur, t_prev, total, tail_term, norm
    cdef bint converged
    while True:
        if kmax > max_terms:
            kmax = max_terms
        top = <int>ceil(sqrt(<double>kmax * kmax + 40.0 * x)) + 10
        t_next = 0.0
        t_cur = 1e-280
        total = 0.0
        tail_term = 0.0
        k = top
        while k > 0:
            t_prev = t_next * inv_rho2 + (2.0 * k / xr) * t_cur
            t_next = t_cur
            t_cur = t_prev
            if k <= kmax and k >= start:
                total += t_next
                if k == kmax:
                    tail_term = t_next
            if t_cur > 1e250:
                t_cur *= 1e-250
                t_next *= 1e-250
                total *= 1e-250
                tail_term *= 1e-250
            k -= 1
        if start == 0:
            total += t_cur
        norm = c_i0e(x) / t_cur
        converged = total > 0.0 and tail_term <= rtol * total
        if converged or kmax >= max_terms:
            if total <= 0.0:
                out[0] = -INFINITY
            else:
                out[0] = log(total) + log(norm)
            return 0 if converged else 1
        kmax *= 2


cdef int c_series_terms(double x, double rho, double b) noexcept nogil:
    cdef double k1, k2
    k2 = sqrt(80.0 * x) + 25.0
    if rho < 1.0:
        k1 = 40.0 / -log(rho) if rho > 0.0 else 1.0
        return <int>min(k1, k2) + 5
    return <int>(0.5 * b * b + 7.0 * b + 25.0)


cdef int c_log_q_series(double a, double b, double rtol, int max_terms,
                        double* out) noexcept nogil:
    cdef double s
    cdef int st
    st = c_weighted_sum(a * b, a / b, 0, c_series_terms(a * b, a / b, b),
                        rtol, max_terms, &s)
    out[0] = -0.5 * (a - b) * (a - b) + s
    return st


cdef int c_log_p_series(double a, double b, double rtol, int max_terms,
                        double* out) noexcept nogil:
    cdef double s
    cdef int st
    st = c_weighted_sum(a * b, b / a, 1, c_series_terms(a * b, b / a, b),
                        rtol, max_terms, &s)
    out[0] = -0.5 * (a - b) * (a - b) + s
    return st


cdef bint c_tail_expansion(double a, double b, double rtol, double* out) noexcept nogil:
    cdef double d = b - a
    cdef double big_d = fabs(d)
    cdef double sgn = 1.0 if d >= 0.0 else -1.0
    cdef double inv_a = 1.0 / a
    cdef double inv_a2 = inv_a * inv_a
    cdef double ck[20]
    cdef double powers[20]
    cdef double binoms[20]
    cdef int nc = 1, k, i, j, small_run = 0
    cdef double c = 1.0, m_prev2, m_prev1, m_j, d_pow, total, scale_a, gamma, term
    ck[0] = 1.0
    k = 1
    while k < 20:
        c *= (2 * k - 1) * (2 * k - 1) / (8.0 * k) * inv_a2
        if c * 1.5 ** k < 1e-3 * rtol:
            break
        ck[nc] = c
        nc += 1
        k += 1
    for i in range(nc):
        powers[i] = 0.5 - i
        binoms[i] = 1.0
    m_prev2 = sqrt(0.5 * M_PI) * c_erfcx(big_d / SQRT2)
    m_prev1 = 1.0
    d_pow = 1.0
    total = 0.0
    scale_a = 1.0
    for j in range(120):
        if j == 0:
            m_j = m_prev2
        elif j == 1:
            m_j = m_prev1
        else:
            d_pow = d_pow * big_d if j > 2 else big_d
            m_j = d_pow + (j - 1) * m_prev2
            m_prev2 = m_prev1
            m_prev1 = m_j
        if j >= 1:
            for i in range(nc):
                binoms[i] *= (powers[i] - (j - 1)) / j
            scale_a *= inv_a * sgn
        gamma = 0.0
        for i in range(nc):
            gamma += ck[i] * binoms[i]
        term = gamma * scale_a * m_j
        total += term
        if j >= 2 and fabs(term) <= rtol * fabs(total):
            small_run += 1
            if small_run >= 2:
                if total <= 0.0:
                    return False
                out[0] = -0.5 * big_d * big_d - LOG_SQRT_2PI + log(total)
                return True
        else:
            small_run = 0
    return False


cdef double c_tail_quadrature(double a, double b) noexcept nogil:
    cdef double d = b - a
    cdef double big_d = fabs(d)
    cdef double span = -big_d + sqrt(big_d * big_d + 2.0 * TAIL_LOG_CUT)
    cdef double total = 0.0, s, u, t, g
    cdef int i
    if d < 0.0 and b < span:
        span = b
    for i in range(64):
        s = span * GL_X[i]
        u = d + s if d >= 0.0 else d - s
        t = a + u
        g = SQRT_2PI * t * c_i0e(a * t)
        total += GL_W[i] * exp(-big_d * s - 0.5 * s * s) * g
    total *= span
    if total <= 0.0:
        return -INFINITY
    return -0.5 * big_d * big_d - LOG_SQRT_2PI + log(total)


cdef int c_marcum_log_tail(double a, double b, double rtol, int max_terms,
                           double* lt, bint* is_q) noexcept nogil:
    cdef int st
    if b == 0.0:
        lt[0] = 0.0
        is_q[0] = True
        return 0
    if b < 1e-150:
        lt[0] = 2.0 * log(b) - LN2 - 0.5 * a * a
        is_q[0] = False
        return 0
    if a < 1e-150:
        lt[0] = -0.5 * b * b
        is_q[0] = True
        return 0
    if a * b <= MARCUM_SERIES_MAX_AB:
        if b > a:
            is_q[0] = True
            return c_log_q_series(a, b, rtol, max_terms, lt)
        is_q[0] = False
        return c_log_p_series(a, b, rtol, max_terms, lt)
    is_q[0] = b >= a
    if a >= MARCUM_EXPANSION_MIN_A and fabs(b - a) <= a / 3.0:
        if c_tail_expansion(a, b, rtol, lt):
            return 0
    lt[0] = c_tail_quadrature(a, b)
    return 0


cdef int c_marcum_q1(double a, double b, double rtol, int max_terms,
                     double* out) noexcept nogil:
    cdef double lt
    cdef bint is_q
    cdef int st = c_marcum_log_tail(a, b, rtol, max_terms, &lt, &is_q)
    if is_q:
        out[0] = min(1.0, exp(lt))
    else:
        out[0] = max(0.0, -expm1(lt))
    return st


cdef int c_log1mq1(double a, double b, double rtol, int max_terms,
                   double* out) noexcept nogil:
    cdef double lt, lp
    cdef bint is_q
    cdef int st
    if b == 0.0:
        out[0] = -INFINITY
        return 0
    st = c_marcum_log_tail(a, b, rtol, max_terms, &lt, &is_q)
    if not is_q:
        out[0] = min(lt, 0.0)
        return st
    if lt > -LN2 and b > a >= 1e-150 and a * b <= MARCUM_SERIES_MAX_AB:
        st = c_log_p_series(a, b, rtol, max_terms, &lp)
        out[0] = min(lp, 0.0)
        return st
    out[0] = log(-expm1(lt)) if lt < 0.0 else -INFINITY
    return st


# ---------------------------------------------------------------------------
# array entry points

def j0_array(const double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = c_j0(x[i])
    return out


def i0e_array(const double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = c_i0e(x[i])
    return out


def marcum_q1_array(const double[::1] a, const double[::1] b, double rtol,
                    int max_terms):
    cdef Py_ssize_t i, n = a.shape[0]
    out = np.empty(n)
    status = np.zeros(n, dtype=np.int32)
    cdef double[::1] o = out
    cdef int[::1] s = status
    with nogil:
        for i in range(n):
            s[i] = c_marcum_q1(a[i], b[i], rtol, max_terms, &o[i])
    return out, status


def log_one_minus_q1_array(const double[::1] a, const double[::1] b,
                           double rtol, int max_terms):
    cdef Py_ssize_t i, n = a.shape[0]
    out = np.empty(n)
    status = np.zeros(n, dtype=np.int32)
    cdef double[::1] o = out
    cdef int[::1] s = status
    with nogil:
        for i in range(n):
            s[i] = c_log1mq1(a[i], b[i], rtol, max_terms, &o[i])
    return out, status


# ---------------------------------------------------------------------------
# Jacobi eigensolvers

cdef inline double c_rotation_tangent(double theta) noexcept nogil:
    # smaller root of t^2 + 2 theta t - 1 = 0, safe for huge theta
    if fabs(theta) > 1e150:
        return 0.5 / theta
    if theta >= 0.0:
        return 1.0 / (theta + sqrt(1.0 + theta * theta))
    return -1.0 / (-theta + sqrt(1.0 + theta * theta))


def jacobi_eigh(double[:, ::1] a, double[:, ::1] v, int max_sweeps, double tol):
    """Cyclic two-sided Jacobi on a symmetric matrix, in place.

    On return the diagonal of ``a`` holds the eigenvalues and the columns of
    ``v`` (which must start as the identity) the eigenvectors.  Returns
    (sweeps, off) where off is the final off-diagonal Frobenius norm.
    """
    cdef Py_ssize_t n = a.shape[0], p, q, k
    cdef int sweep = 0
    cdef double off, scale, apq, theta, t, c, s, tau, akp, akq, vkp, vkq, app, aqq
    with nogil:
        scale = 0.0
        for p in range(n):
            for q in range(n):
                scale += a[p, q] * a[p, q]
        scale = sqrt(scale)
        while True:
            off = 0.0
            for p in range(n):
                for q in range(p + 1, n):
                    off += 2.0 * a[p, q] * a[p, q]
            off = sqrt(off)
            if off <= tol * scale or sweep >= max_sweeps:
                break
            sweep += 1
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if fabs(apq) <= 1e-300:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    theta = (aqq - app) / (2.0 * apq)
                    t = c_rotation_tangent(theta)
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    tau = s / (1.0 + c)
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        if k != p and k != q:
                            akp = a[k, p]
                            akq = a[k, q]
                            a[k, p] = akp - s * (akq + tau * akp)
                            a[k, q] = akq + s * (akp - tau * akq)
                            a[p, k] = a[k, p]
                            a[q, k] = a[k, q]
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = vkp - s * (vkq + tau * vkp)
                        v[k, q] = vkq + s * (vkp - tau * vkq)
    return sweep, off


def hestenes_sweeps(double[:, ::1] rows, double[:, ::1] v, int max_sweeps, double tol):
    """One-sided Jacobi orthogonalisation of the rows of ``rows``, in place.

    ``v`` (n_rows x n_rows, identity on entry, or shape (0, 0) to skip)
    accumulates the rotations applied to the rows.  Returns
    (sweeps, converged).
    """
    cdef Py_ssize_t n = rows.shape[0], m = rows.shape[1], i, j, k
    cdef Py_ssize_t nv = v.shape[1]
    cdef int sweep = 0
    cdef bint rotated = True
    cdef double alpha, beta, gamma, zeta, t, c, s, x, y
    with nogil:
        while rotated and sweep < max_sweeps:
            rotated = False
            sweep += 1
            for i in range(n - 1):
                for j in range(i + 1, n):
                    alpha = 0.0
                    beta = 0.0
                    gamma = 0.0
                    for k in range(m):
                        alpha += rows[i, k] * rows[i, k]
                        beta += rows[j, k] * rows[j, k]
                        gamma += rows[i, k] * rows[j, k]
                    if fabs(gamma) <= tol * sqrt(alpha * beta) or gamma == 0.0:
                        continue
                    rotated = True
                    zeta = (beta - alpha) / (2.0 * gamma)
                    t = c_rotation_tangent(zeta)
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = c * t
                    for k in range(m):
                        x = rows[i, k]
                        y = rows[j, k]
                        rows[i, k] = c * x - s * y
                        rows[j, k] = s * x + c * y
                    if nv > 0:
                        for k in range(nv):
                            x = v[i, k]
                            y = v[j, k]
                            v[i, k] = c * x - s * y
                            v[j, k] = s * x + c * y
    return sweep, not rotated


# ---------------------------------------------------------------------------
# CDF accumulators

cdef Py_ssize_t lower_index(const double[::1] r, double x) noexcept nogil:
    # first index with r[i] >= x
    cdef Py_ssize_t lo = 0, hi = r.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if r[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def stage1_accumulate(const double[:, ::1] nu, const double[::1] tau,
                      const double[::1] r, double rtol, int max_terms,
                      double[::1] acc, double[::1] acc2):
    """Add per-draw conditional CDFs prod_k P(|g_k| <= r | latents) into acc.

    ``nu`` holds |sum_l sqrt(s_l) u_kl (a_l + j b_l)| per draw and port,
    ``r`` an ascending grid.  acc / acc2 receive the sums of the conditional
    CDF and of its square.  Returns the number of Marcum evaluations that
    hit the term limit.
    """
    cdef Py_ssize_t n_draw = nu.shape[0], n_port = nu.shape[1], n_grid = r.shape[0]
    cdef Py_ssize_t d, k, g, g0
    cdef double rdead, lim, val, A, B, inv_t, lo
    cdef int nfail = 0
    logf_arr = np.empty(n_grid)
    cdef double[::1] logf = logf_arr
    with nogil:
        for d in range(n_draw):
            rdead = -INFINITY
            for k in range(n_port):
                lo = nu[d, k] - LOWER_DEAD * tau[k] / SQRT2
                if lo > rdead:
                    rdead = lo
            g0 = lower_index(r, rdead)
            for g in range(g0, n_grid):
                logf[g] = 0.0
            for k in range(n_port):
                inv_t = SQRT2 / tau[k]
                A = nu[d, k] * inv_t
                lim = nu[d, k] + UPPER_SKIP / inv_t
                g = g0
                while g < n_grid and r[g] <= lim:
                    if logf[g] > LOG_DEAD:
                        B = r[g] * inv_t
                        if c_log1mq1(A, B, rtol, max_terms, &val) != 0:
                            nfail += 1
                        logf[g] += val
                    g += 1
            for g in range(g0, n_grid):
                if logf[g] > LOG_DEAD:
                    val = exp(logf[g])
                    acc[g] += val
                    acc2[g] += val * val
    return nfail


def stage2_log_factors(const double[::1] m, const double[::1] tau,
                       const double[::1] r, int replication,
                       const double[::1] nodes, const double[::1] weights,
                       double rtol, int max_terms):
    """Per-grid log of prod_k [int e^-u (1 - Q1(sqrt(2 u m_k)/tau_k, sqrt2 r/tau_k))^R du]^(1/R).

    Gauss-Laguerre nodes/weights must carry the e^-u weight.  Returns
    (log_cdf, n_fail).
    """
    cdef Py_ssize_t n_port = m.shape[0], n_grid = r.shape[0], n_node = nodes.shape[0]
    cdef Py_ssize_t k, g, i
    cdef double total, s, A, B, inv_t, val, R = replication
    cdef int nfail = 0
    out = np.empty(n_grid)
    cdef double[::1] o = out
    with nogil:
        for g in range(n_grid):
            total = 0.0
            for k in range(n_port):
                inv_t = SQRT2 / tau[k]
                B = r[g] * inv_t
                s = 0.0
                for i in range(n_node):
                    A = sqrt(nodes[i] * m[k]) * inv_t
                    if B - A > UPPER_SKIP:
                        s += weights[i]
                        continue
                    if A - B > LOWER_DEAD:
                        continue
                    if c_log1mq1(A, B, rtol, max_terms, &val) != 0:
                        nfail += 1
                    s += weights[i] * exp(R * val)
                if s <= 0.0:
                    total = -INFINITY
                    break
                total += log(s) / R
            o[g] = total
    return out, nfail


def stage2_log_factors_window(const double[::1] m, const double[::1] tau,
                              const double[::1] r, int replication,
                              const double[::1] x, const double[::1] w,
                              double rtol, int max_terms):
    """Same quantity as stage2_log_factors, integrated in the noncentrality a.

    With u = kappa a^2 and kappa = tau^2/(2 m), each factor is
    (1 - exp(-kappa a_lo^2)) + int_{a_lo}^{a_hi} 2 kappa a exp(-kappa a^2) phi(a) da
    where phi = 1 on [0, a_lo] exactly.  The window [a_lo, a_hi] covers the
    transition at a = b and is integrated with the Gauss-Legendre rule
    (x, w) given on [-1, 1].  Returns (log_cdf, n_fail).
    """
    cdef Py_ssize_t n_port = m.shape[0], n_grid = r.shape[0], n_node = x.shape[0]
    cdef Py_ssize_t k, g, i
    cdef double total, s, A, B, inv_t, val, kappa, lo, hi, half, mid, R = replication
    cdef int nfail = 0
    out = np.empty(n_grid)
    cdef double[::1] o = out
    with nogil:
        for g in range(n_grid):
            total = 0.0
            for k in range(n_port):
                inv_t = SQRT2 / tau[k]
                B = r[g] * inv_t
                if B <= 0.0:
                    total = -INFINITY
                    break
                kappa = tau[k] * tau[k] / (2.0 * m[k])
                lo = B - UPPER_SKIP
                if lo < 0.0:
                    lo = 0.0
                hi = B + WINDOW_HI
                if hi > sqrt(WEIGHT_CUT / kappa):
                    hi = sqrt(WEIGHT_CUT / kappa)
                s = -expm1(-kappa * lo * lo)
                if hi > lo:
                    half = 0.5 * (hi - lo)
                    mid = 0.5 * (hi + lo)
                    for i in range(n_node):
                        A = mid + half * x[i]
                        if A <= 0.0:
                            continue
                        if c_log1mq1(A, B, rtol, max_terms, &val) != 0:
                            nfail += 1
                        s += half * w[i] * exp(log(2.0 * kappa * A) - kappa * A * A + R * val)
                if s <= 0.0:
                    total = -INFINITY
                    break
                total += log(s) / R
            o[g] = total
    return out, nfail


def reference_log_integrand(const double[::1] z, const double[::1] mu,
                            double r_over_sigma, double rtol, int max_terms):
    """-z + sum_k log(1 - Q1(mu_k sqrt(2z)/sqrt(1-mu_k^2), sqrt2 r/(sigma sqrt(1-mu_k^2)))).

    Returns (values, n_fail).
    """
    cdef Py_ssize_t n_z = z.shape[0], n_mu = mu.shape[0], i, k
    cdef double total, rho, A, B, val
    cdef int nfail = 0
    out = np.empty(n_z)
    cdef double[::1] o = out
    with nogil:
        for i in range(n_z):
            total = -z[i]
            for k in range(n_mu):
                rho = sqrt(1.0 - mu[k] * mu[k])
                A = fabs(mu[k]) * sqrt(2.0 * z[i]) / rho
                B = SQRT2 * r_over_sigma / rho
                if B - A > UPPER_SKIP:
                    continue
                if c_log1mq1(A, B, rtol, max_terms, &val) != 0:
                    nfail += 1
                total += val
            o[i] = total
    return out, nfail
