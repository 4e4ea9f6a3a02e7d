"""Pure-Python reference kernels.

These mirror the compiled routines in ``_ckernels.pyx`` one for one and are
used whenever the extension is unavailable (or ``FASMODEL_PURE_PYTHON`` is
set).  They favour clarity over speed; every routine works on plain floats
or numpy arrays exactly like its compiled twin.
"""
import math

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
PI_4 = 0.25 * math.pi

# switchover between the power series and the Hankel expansion for J0
J0_SERIES_MAX = 12.0
# switchover between the power series and the asymptotic expansion for I0e
I0E_SERIES_MAX = 20.0
# Marcum regimes: Bessel series below this product a*b
MARCUM_SERIES_MAX_AB = 200.0
# weighted Bessel sum switches to its power series below these
SMALL_X = 1e-3
TINY_RHO = 1e-100
# Marcum regimes: large-argument moment expansion needs a >= this
MARCUM_EXPANSION_MIN_A = 15.0
# tail integrals are cut where the Gaussian weight has dropped by exp(-45)
TAIL_LOG_CUT = 45.0

STATUS_OK = 0
STATUS_NO_CONVERGENCE = 1

_GL64_X, _GL64_W = np.polynomial.legendre.leggauss(64)
# nodes/weights mapped to [0, 1]
GL_NODES = tuple(0.5 * (_GL64_X + 1.0))
GL_WEIGHTS = tuple(0.5 * _GL64_W)


def j0(x):
    """Bessel J0 of a finite float."""
    x = abs(x)
    if x <= J0_SERIES_MAX:
        q = -0.25 * x * x
        term = 1.0
        total = 1.0
        k = 1
        while True:
            term *= q / (k * k)
            total += term
            if abs(term) <= 1e-17 * max(abs(total), 1e-3) and k > 2:
                break
            k += 1
        return total
    # Hankel expansion, truncated at its smallest term
    p = 1.0
    q = 0.0
    coef = 1.0
    prev = math.inf
    k = 1
    while k < 60:
        coef *= (2 * k - 1) ** 2 / (8.0 * k * x)
        if coef >= prev or coef < 1e-18:
            break
        prev = coef
        m, odd = divmod(k, 2)
        if odd:
            q += (-1.0) ** (m + 1) * coef
        else:
            p += (-1.0) ** m * coef
        k += 1
    chi = x - PI_4
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def i0e(x):
    """Exponentially scaled modified Bessel I0: exp(-|x|) I0(x)."""
    x = abs(x)
    if x <= I0E_SERIES_MAX:
        q = 0.25 * x * x
        term = 1.0
        total = 1.0
        k = 1
        while term > 1e-17 * total:
            term *= q / (k * k)
            total += term
            k += 1
        return total * math.exp(-x)
    coef = 1.0
    total = 1.0
    k = 1
    while k < 80:
        nxt = coef * (2 * k - 1) ** 2 / (8.0 * k * x)
        if nxt >= coef or nxt < 1e-18:
            break
        coef = nxt
        total += coef
        k += 1
    return total / math.sqrt(2.0 * math.pi * x)


def erfcx(x):
    """exp(x^2) erfc(x) for x >= 0."""
    if x < 25.0:
        return math.exp(x * x) * math.erfc(x)
    inv = 1.0 / (2.0 * x * x)
    term = 1.0
    total = 1.0
    k = 1
    while k < 30:
        term *= -(2 * k - 1) * inv
        total += term
        if abs(term) < 1e-17:
            break
        k += 1
    return total / (x * math.sqrt(math.pi))


def _weighted_bessel_sum(x, rho, start, nmax, rtol, max_terms):
    """Sum_{k>=start} rho^k I_k(x) e^{-x} by normalised backward recurrence.

    Works on t_k = rho^k I_k(x), which obeys
    t_{k-1} = t_{k+1} / rho^2 + (2k / (x rho)) t_k, and normalises with a
    direct I0e evaluation so the result never depends on sum identities.
    Returns (log_sum, status).
    """
    if x < SMALL_X or rho < TINY_RHO:
        return _weighted_bessel_small(x, rho, start, rtol)
    xr = x * rho
    inv_rho2 = 1.0 / (rho * rho)
    kmax = nmax
    while True:
        if kmax > max_terms:
            kmax = max_terms
        top = int(math.ceil(math.sqrt(kmax * kmax + 40.0 * x))) + 10
        t_next = 0.0
        t_cur = 1e-280
        total = 0.0
        tail_term = 0.0
        for k in range(top, 0, -1):
            t_prev = t_next * inv_rho2 + (2.0 * k / xr) * t_cur
            t_next = t_cur
            t_cur = t_prev
            # t_cur now holds t_{k-1}
            if k <= kmax and k >= start:
                total += t_next
                if k == kmax:
                    tail_term = t_next
            if t_cur > 1e250:
                t_cur *= 1e-250
                t_next *= 1e-250
                total *= 1e-250
                tail_term *= 1e-250
        if start == 0:
            total += t_cur
        # t_cur is t_0 (unnormalised); true t_0 = I0e(x)
        norm = i0e(x) / t_cur
        converged = total > 0.0 and tail_term <= rtol * total
        if converged or kmax >= max_terms:
            if total <= 0.0:
                return -math.inf, STATUS_OK if converged else STATUS_NO_CONVERGENCE
            log_sum = math.log(total) + math.log(norm)
            return log_sum, STATUS_OK if converged else STATUS_NO_CONVERGENCE
        kmax *= 2


def _weighted_bessel_small(x, rho, start, rtol):
    """Power-series form of the weighted sum for small x or tiny rho.

    The backward recurrence divides by x rho and overflows there. Terms are
    summed relative to the leading one, t_start, and combined in logs.
    """
    y = 0.5 * x
    q = y * y
    lead = start * (math.log(rho) + math.log(y)) - math.lgamma(start + 1.0) - x
    if rho < TINY_RHO:
        # later terms are below 1e-100 of the first
        inner = 1.0
        term = 1.0
        for j in range(1, 2000):
            term *= q / (j * (start + j))
            inner += term
            if term <= 1e-17 * inner:
                break
        return lead + math.log(inner), STATUS_OK
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
    return lead + math.log(total), STATUS_OK


def _series_terms(x, rho, bound_b):
    """Heuristic truncation order for the Bessel series."""
    k2 = math.sqrt(80.0 * x) + 25.0
    if rho < 1.0:
        k1 = 40.0 / -math.log(rho) if rho > 0.0 else 1.0
        return int(min(k1, k2)) + 5
    return int(0.5 * bound_b * bound_b + 7.0 * bound_b + 25.0)


def _log_q_series(a, b, rtol, max_terms):
    """log Q1 from the Bessel series (any a, b > 0)."""
    x = a * b
    rho = a / b
    n = _series_terms(x, rho, b)
    s, st = _weighted_bessel_sum(x, rho, 0, n, rtol, max_terms)
    return -0.5 * (a - b) ** 2 + s, st


def _log_p_series(a, b, rtol, max_terms):
    """log(1 - Q1) from the complementary Bessel series (any a, b > 0)."""
    x = a * b
    rho = b / a
    n = _series_terms(x, rho, b)
    s, st = _weighted_bessel_sum(x, rho, 1, n, rtol, max_terms)
    return -0.5 * (a - b) ** 2 + s, st


def _log_tail_expansion(a, b, rtol):
    """Large-a moment expansion of the Rician tail nearest to b.

    Writes the density in u = t - a as phi(u) g(u) with
    g(u) = sqrt(1 + u/a) S(a(a+u)), S the asymptotic series of
    sqrt(2 pi z) I0e(z), and integrates the power series of g against the
    Gaussian tail moments.  Returns (log_tail, tail_is_q, ok).
    """
    d = b - a
    big_d = abs(d)
    sign = 1.0 if d >= 0.0 else -1.0
    inv_a = 1.0 / a
    inv_a2 = inv_a * inv_a
    # S coefficients c_k a^{-2k}, kept while they matter
    ck = [1.0]
    c = 1.0
    k = 1
    while k < 20:
        c *= (2 * k - 1) ** 2 / (8.0 * k) * inv_a2
        if c * 1.5 ** k < 1e-3 * rtol:
            break
        ck.append(c)
        k += 1
    powers = [0.5 - i for i in range(len(ck))]
    binoms = [1.0] * len(ck)
    # scaled tail moments m_j = M_j(D) / phi(D)
    m_prev2 = math.sqrt(0.5 * math.pi) * erfcx(big_d / math.sqrt(2.0))
    m_prev1 = 1.0
    d_pow = 1.0  # D^{j-1}
    total = 0.0
    scale_a = 1.0
    small_run = 0
    for j in range(0, 120):
        if j == 0:
            m_j = m_prev2
        elif j == 1:
            m_j = m_prev1
        else:
            d_pow = d_pow * big_d if j > 2 else big_d
            m_j = d_pow + (j - 1) * m_prev2
            m_prev2, m_prev1 = m_prev1, m_j
        if j >= 1:
            for i in range(len(ck)):
                binoms[i] *= (powers[i] - (j - 1)) / j
            scale_a *= inv_a * sign
        gamma = 0.0
        for i in range(len(ck)):
            gamma += ck[i] * binoms[i]
        term = gamma * scale_a * m_j
        total += term
        if j >= 2 and abs(term) <= rtol * abs(total):
            small_run += 1
            if small_run >= 2:
                if total <= 0.0:
                    return 0.0, d >= 0.0, False
                log_tail = -0.5 * big_d * big_d - LOG_SQRT_2PI + math.log(total)
                return log_tail, d >= 0.0, True
        else:
            small_run = 0
    return 0.0, d >= 0.0, False


def _log_tail_quadrature(a, b):
    """Gauss-Legendre integration of the Rician tail nearest to b.

    Returns (log_tail, tail_is_q).
    """
    d = b - a
    big_d = abs(d)
    span = -big_d + math.sqrt(big_d * big_d + 2.0 * TAIL_LOG_CUT)
    if d < 0.0:
        span = min(span, b)
    total = 0.0
    for xn, wn in zip(GL_NODES, GL_WEIGHTS):
        s = span * xn
        u = d + s if d >= 0.0 else d - s
        t = a + u
        g = SQRT_2PI * t * i0e(a * t)
        total += wn * math.exp(-big_d * s - 0.5 * s * s) * g
    total *= span
    if total <= 0.0:
        return -math.inf, d >= 0.0
    return -0.5 * big_d * big_d - LOG_SQRT_2PI + math.log(total), d >= 0.0


def marcum_log_tail(a, b, rtol, max_terms):
    """Core Marcum Q1 evaluator.

    Returns (log_tail, tail_is_q, status): log of whichever of Q1(a, b) or
    1 - Q1(a, b) is computed directly (the one that is not close to 1 except
    in the small-argument series regime), and a flag saying which.
    """
    if b == 0.0:
        return 0.0, True, STATUS_OK
    if a == 0.0:
        return -0.5 * b * b, True, STATUS_OK
    if b < 1e-150:
        return 2.0 * math.log(b) - math.log(2.0) - 0.5 * a * a, False, STATUS_OK
    if a < 1e-150:
        return -0.5 * b * b, True, STATUS_OK
    x = a * b
    if x <= MARCUM_SERIES_MAX_AB:
        if b > a:
            lt, st = _log_q_series(a, b, rtol, max_terms)
            return lt, True, st
        lt, st = _log_p_series(a, b, rtol, max_terms)
        return lt, False, st
    if a >= MARCUM_EXPANSION_MIN_A and abs(b - a) <= a / 3.0:
        lt, is_q, ok = _log_tail_expansion(a, b, rtol)
        if ok:
            return lt, is_q, STATUS_OK
    lt, is_q = _log_tail_quadrature(a, b)
    return lt, is_q, STATUS_OK


def marcum_q1(a, b, rtol=1e-16, max_terms=500):
    """Return (Q1(a, b), status)."""
    lt, is_q, st = marcum_log_tail(a, b, rtol, max_terms)
    if is_q:
        return min(1.0, math.exp(lt)), st
    return max(0.0, -math.expm1(lt)), st


def log_one_minus_q1(a, b, rtol=1e-16, max_terms=500):
    """Return (log(1 - Q1(a, b)), status); -inf when b == 0."""
    if b == 0.0:
        return -math.inf, STATUS_OK
    lt, is_q, st = marcum_log_tail(a, b, rtol, max_terms)
    if not is_q:
        return min(lt, 0.0), st
    if lt > -0.6931471805599453 and b > a >= 1e-150 and a * b <= MARCUM_SERIES_MAX_AB:
        # Q1 > 1/2 from the direct series: go to the complementary series
        # rather than cancelling 1 - Q1
        lp, st = _log_p_series(a, b, rtol, max_terms)
        return min(lp, 0.0), st
    return math.log(-math.expm1(lt)) if lt < 0.0 else -math.inf, st


# ---------------------------------------------------------------------------
# array entry points (same signatures as the compiled module)

SQRT2 = math.sqrt(2.0)
UPPER_SKIP = 9.5
LOWER_DEAD = 40.0
LOG_DEAD = -750.0
# stage-2 window: phi <= exp(-WINDOW_HI^2/2) beyond b + WINDOW_HI; weight cut at u = WEIGHT_CUT
WINDOW_HI = 12.0
WEIGHT_CUT = 64.0


def j0_array(x):
    return np.array([j0(v) for v in x], dtype=float)


def i0e_array(x):
    return np.array([i0e(v) for v in x], dtype=float)


def marcum_q1_array(a, b, rtol, max_terms):
    out = np.empty(len(a))
    status = np.zeros(len(a), dtype=np.int32)
    for i in range(len(a)):
        out[i], status[i] = marcum_q1(a[i], b[i], rtol, max_terms)
    return out, status


def log_one_minus_q1_array(a, b, rtol, max_terms):
    out = np.empty(len(a))
    status = np.zeros(len(a), dtype=np.int32)
    for i in range(len(a)):
        out[i], status[i] = log_one_minus_q1(a[i], b[i], rtol, max_terms)
    return out, status


def _rotation_tangent(theta):
    """Smaller root of t^2 + 2 theta t - 1 = 0, safe for huge theta."""
    theta = float(theta)
    if abs(theta) > 1e150:
        return 0.5 / theta
    if theta >= 0.0:
        return 1.0 / (theta + math.sqrt(1.0 + theta * theta))
    return -1.0 / (-theta + math.sqrt(1.0 + theta * theta))


def jacobi_eigh(a, v, max_sweeps, tol):
    """Cyclic two-sided Jacobi, in place; see the compiled twin."""
    n = a.shape[0]
    scale = math.sqrt(float(np.sum(a * a)))
    sweep = 0
    while True:
        # sum the off-diagonal squares directly; total minus diagonal cancels
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale or sweep >= max_sweeps:
            break
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = _rotation_tangent(theta)
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                akp = a[:, p].copy()
                akq = a[:, q].copy()
                a[:, p] = akp - s * (akq + tau * akp)
                a[:, q] = akq + s * (akp - tau * akq)
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vkp = v[:, p].copy()
                vkq = v[:, q].copy()
                v[:, p] = vkp - s * (vkq + tau * vkp)
                v[:, q] = vkq + s * (vkp - tau * vkq)
    return sweep, off


def hestenes_sweeps(rows, v, max_sweeps, tol):
    """One-sided Jacobi on the rows of ``rows``, in place."""
    n = rows.shape[0]
    track = v.shape[1] > 0
    sweep = 0
    rotated = True
    while rotated and sweep < max_sweeps:
        rotated = False
        sweep += 1
        for i in range(n - 1):
            for j in range(i + 1, n):
                ri = rows[i]
                rj = rows[j]
                alpha = float(ri @ ri)
                beta = float(rj @ rj)
                gamma = float(ri @ rj)
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = _rotation_tangent(zeta)
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                x = ri.copy()
                rows[i] = c * x - s * rj
                rows[j] = s * x + c * rows[j]
                if track:
                    x = v[i].copy()
                    v[i] = c * x - s * v[j]
                    v[j] = s * x + c * v[j]
    return sweep, not rotated


def stage1_accumulate(nu, tau, r, rtol, max_terms, acc, acc2):
    n_draw, n_port = nu.shape
    n_grid = len(r)
    nfail = 0
    logf = np.empty(n_grid)
    for d in range(n_draw):
        rdead = float(np.max(nu[d] - LOWER_DEAD * tau / SQRT2))
        g0 = int(np.searchsorted(r, rdead, side="left"))
        logf[g0:] = 0.0
        for k in range(n_port):
            inv_t = SQRT2 / tau[k]
            a = nu[d, k] * inv_t
            lim = nu[d, k] + UPPER_SKIP / inv_t
            g = g0
            while g < n_grid and r[g] <= lim:
                if logf[g] > LOG_DEAD:
                    val, st = log_one_minus_q1(a, r[g] * inv_t, rtol, max_terms)
                    nfail += st != 0
                    logf[g] += val
                g += 1
        live = logf[g0:] > LOG_DEAD
        vals = np.where(live, np.exp(np.where(live, logf[g0:], 0.0)), 0.0)
        acc[g0:] += vals
        acc2[g0:] += vals * vals
    return nfail


def stage2_log_factors(m, tau, r, replication, nodes, weights, rtol, max_terms):
    out = np.empty(len(r))
    nfail = 0
    big_r = float(replication)
    for g in range(len(r)):
        total = 0.0
        for k in range(len(m)):
            inv_t = SQRT2 / tau[k]
            b = r[g] * inv_t
            s = 0.0
            for i in range(len(nodes)):
                a = math.sqrt(nodes[i] * m[k]) * inv_t
                if b - a > UPPER_SKIP:
                    s += weights[i]
                    continue
                if a - b > LOWER_DEAD:
                    continue
                val, st = log_one_minus_q1(a, b, rtol, max_terms)
                nfail += st != 0
                s += weights[i] * math.exp(big_r * val)
            if s <= 0.0:
                total = -math.inf
                break
            total += math.log(s) / big_r
        out[g] = total
    return out, nfail


def stage2_log_factors_window(m, tau, r, replication, x, w, rtol, max_terms):
    out = np.empty(len(r))
    nfail = 0
    big_r = float(replication)
    for g in range(len(r)):
        total = 0.0
        for k in range(len(m)):
            inv_t = SQRT2 / tau[k]
            b = r[g] * inv_t
            if b <= 0.0:
                total = -math.inf
                break
            kappa = tau[k] * tau[k] / (2.0 * m[k])
            lo = max(b - UPPER_SKIP, 0.0)
            hi = min(b + WINDOW_HI, math.sqrt(WEIGHT_CUT / kappa))
            s = -math.expm1(-kappa * lo * lo)
            if hi > lo:
                half = 0.5 * (hi - lo)
                mid = 0.5 * (hi + lo)
                for i in range(len(x)):
                    a = mid + half * x[i]
                    if a <= 0.0:
                        continue
                    val, st = log_one_minus_q1(a, b, rtol, max_terms)
                    nfail += st != 0
                    s += half * w[i] * math.exp(math.log(2.0 * kappa * a) - kappa * a * a + big_r * val)
            if s <= 0.0:
                total = -math.inf
                break
            total += math.log(s) / big_r
        out[g] = total
    return out, nfail


def reference_log_integrand(z, mu, r_over_sigma, rtol, max_terms):
    out = np.empty(len(z))
    nfail = 0
    for i in range(len(z)):
        total = -z[i]
        for k in range(len(mu)):
            rho = math.sqrt(1.0 - mu[k] * mu[k])
            a = abs(mu[k]) * math.sqrt(2.0 * z[i]) / rho
            b = SQRT2 * r_over_sigma / rho
            if b - a > UPPER_SKIP:
                continue
            val, st = log_one_minus_q1(a, b, rtol, max_terms)
            nfail += st != 0
            total += val
        out[i] = total
    return out, nfail
