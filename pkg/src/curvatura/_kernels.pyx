# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled density kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, atan, tanh, cosh, pow, NAN

cnp.import_array()

cdef enum:
    NMAX = 6

cdef double SERIES_SWITCH = 1e-4
cdef double COSH_CLAMP = 350.0


cdef inline void _unpack(const double[:, ::1] hess, const Py_ssize_t[:, ::1] hidx,
                         Py_ssize_t p, int n, double h[NMAX][NMAX]) noexcept nogil:
    cdef int i, j
    for i in range(n):
        for j in range(n):
            h[i][j] = hess[p, hidx[i, j]]


cdef double _divergence_point(double val, const double* v, double h[NMAX][NMAX],
                              double t3[NMAX][NMAX][NMAX], int n, double level,
                              int k) noexcept nogil:
    cdef double w[NMAX][NMAX]
    cdef double a[NMAX][NMAX]
    cdef double mat[NMAX][NMAX]
    cdef double am[NMAX][NMAX]
    cdef double dw[NMAX][NMAX][NMAX]
    cdef double da[NMAX][NMAX][NMAX]
    cdef double dmat[NMAX][NMAX][NMAX]
    cdef double dam[NMAX][NMAX][NMAX]
    cdef double hv[NMAX]
    cdef double dp[NMAX]
    cdef double dc[NMAX]
    cdef double deta[NMAX]
    cdef double vv = 0.0, lap = 0.0, p, c = 0.0, s, tr
    cdef double t, eta, t2l, vvl, phi, out, cfac, vfac
    cdef int i, j, l, m, step
    cdef int ell = 3 * k - 2

    for i in range(n):
        vv += v[i] * v[i]
        lap += h[i][i]
        s = 0.0
        for j in range(n):
            s += h[i][j] * v[j]
        hv[i] = s

    if k == 1:
        p = 1.0
        for m in range(n):
            dp[m] = 0.0
    else:
        for i in range(n):
            for j in range(n):
                w[i][j] = (vv if i == j else 0.0) - v[i] * v[j]
                for m in range(n):
                    dw[i][j][m] = (2.0 * hv[m] if i == j else 0.0) - h[i][m] * v[j] - v[i] * h[j][m]
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += h[i][l] * w[l][j]
                a[i][j] = s
                for m in range(n):
                    s = 0.0
                    for l in range(n):
                        s += t3[i][l][m] * w[l][j] + h[i][l] * dw[l][j][m]
                    da[i][j][m] = s
                mat[i][j] = 1.0 if i == j else 0.0
                for m in range(n):
                    dmat[i][j][m] = 0.0
        for step in range(1, k):
            tr = 0.0
            for m in range(n):
                dc[m] = 0.0
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for l in range(n):
                        s += a[i][l] * mat[l][j]
                    am[i][j] = s
                    for m in range(n):
                        s = 0.0
                        for l in range(n):
                            s += da[i][l][m] * mat[l][j] + a[i][l] * dmat[l][j][m]
                        dam[i][j][m] = s
                tr += am[i][i]
                for m in range(n):
                    dc[m] += dam[i][i][m]
            c = -tr / step
            for m in range(n):
                dc[m] = -dc[m] / step
            for i in range(n):
                for j in range(n):
                    mat[i][j] = am[i][j] + (c if i == j else 0.0)
                    for m in range(n):
                        dmat[i][j][m] = dam[i][j][m] + (dc[m] if i == j else 0.0)
        s = -1.0 if (k - 1) % 2 else 1.0
        p = s * c
        for m in range(n):
            dp[m] = s * dc[m]

    t = val - level
    t2l = pow(t, 2 * ell)
    vvl = pow(vv, ell)
    eta = sqrt(t2l + vvl)
    if eta == 0.0:
        return NAN
    cfac = ell * pow(t, 2 * ell - 1)
    vfac = ell * pow(vv, ell - 1)
    phi = p / eta
    out = phi * lap
    for m in range(n):
        deta[m] = (cfac * v[m] + vfac * hv[m]) / eta
        out += (dp[m] / eta - p / (eta * eta) * deta[m]) * v[m]
    return out


def divergence_density(value, grad, hess, third, double level, int k):
    cdef const double[::1] val = np.ascontiguousarray(value, dtype=np.float64)
    cdef const double[:, ::1] g = np.ascontiguousarray(grad, dtype=np.float64)
    cdef const double[:, ::1] hp = np.ascontiguousarray(hess, dtype=np.float64)
    cdef const double[:, ::1] tp = np.ascontiguousarray(third, dtype=np.float64)
    cdef Py_ssize_t N = g.shape[0]
    cdef int n = g.shape[1]
    if n > NMAX:
        raise ValueError("dimension above 6 is not supported")
    from .field.jet import hess_index, third_index
    cdef const Py_ssize_t[:, ::1] hidx = np.ascontiguousarray(hess_index(n), dtype=np.intp)
    cdef const Py_ssize_t[:, :, ::1] tidx = np.ascontiguousarray(third_index(n), dtype=np.intp)
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double h[NMAX][NMAX]
    cdef double t3[NMAX][NMAX][NMAX]
    cdef Py_ssize_t p
    cdef int i, j, m
    with nogil:
        for p in range(N):
            _unpack(hp, hidx, p, n, h)
            for i in range(n):
                for j in range(n):
                    for m in range(n):
                        t3[i][j][m] = tp[p, tidx[i, j, m]]
            out[p] = _divergence_point(val[p], &g[p, 0], h, t3, n, level, k)
    return out_arr


def boundary_density(grad, hess, int k):
    cdef const double[:, ::1] g = np.ascontiguousarray(grad, dtype=np.float64)
    cdef const double[:, ::1] hp = np.ascontiguousarray(hess, dtype=np.float64)
    cdef Py_ssize_t N = g.shape[0]
    cdef int n = g.shape[1]
    if n > NMAX:
        raise ValueError("dimension above 6 is not supported")
    from .field.jet import hess_index
    cdef const Py_ssize_t[:, ::1] hidx = np.ascontiguousarray(hess_index(n), dtype=np.intp)
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double h[NMAX][NMAX]
    cdef double pr[NMAX][NMAX]
    cdef double sm[NMAX][NMAX]
    cdef double tmp[NMAX][NMAX]
    cdef double mat[NMAX][NMAX]
    cdef double am[NMAX][NMAX]
    cdef double vv, gn, s, c, tr
    cdef Py_ssize_t p
    cdef int i, j, l, step
    with nogil:
        for p in range(N):
            vv = 0.0
            for i in range(n):
                vv += g[p, i] * g[p, i]
            if vv == 0.0:
                out[p] = NAN
                continue
            if k == 1:
                out[p] = 1.0
                continue
            gn = sqrt(vv)
            _unpack(hp, hidx, p, n, h)
            for i in range(n):
                for j in range(n):
                    pr[i][j] = (1.0 if i == j else 0.0) - g[p, i] * g[p, j] / vv
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for l in range(n):
                        s += h[i][l] * pr[l][j]
                    tmp[i][j] = s / gn
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for l in range(n):
                        s += pr[i][l] * tmp[l][j]
                    sm[i][j] = s
                    mat[i][j] = 1.0 if i == j else 0.0
            c = 0.0
            for step in range(1, k):
                tr = 0.0
                for i in range(n):
                    for j in range(n):
                        s = 0.0
                        for l in range(n):
                            s += sm[i][l] * mat[l][j]
                        am[i][j] = s
                    tr += am[i][i]
                c = -tr / step
                for i in range(n):
                    for j in range(n):
                        mat[i][j] = am[i][j] + (c if i == j else 0.0)
            out[p] = -c if (k - 1) % 2 else c
    return out_arr


cdef double _nodal_point(double f, const double* v, double h[NMAX][NMAX], int n,
                         int variant) noexcept nogil:
    cdef double hv[NMAX]
    cdef double vv = 0.0, q = 0.0, lap = 0.0, hs2 = 0.0, hv2 = 0.0
    cdef double s, g, eta2, eta, sigma, absf, r, r2, lim, bracket, th, sech2, at, ch
    cdef int i, j
    for i in range(n):
        vv += v[i] * v[i]
        lap += h[i][i]
        s = 0.0
        for j in range(n):
            s += h[i][j] * v[j]
            hs2 += h[i][j] * h[i][j]
        hv[i] = s
        q += v[i] * s
        hv2 += s * s
    eta2 = f * f + vv
    if eta2 == 0.0:
        return NAN
    eta = sqrt(eta2)
    g = sqrt(vv)
    sigma = 1.0 if f > 0.0 else (-1.0 if f < 0.0 else 0.0)
    absf = fabs(f)
    if variant == 0:
        return sigma / (eta2 * eta) * (f * vv + q - eta2 * lap)
    if variant == 3:
        # flat metric: the Ric(grad f, grad f) contribution is zero
        return (absf / (eta2 * eta) * (vv - f * lap + lap * lap - hs2)
                + 3.0 * absf / (eta2 * eta2 * eta) * (f * q + hv2 - lap * (f * vv + q)))
    if f != 0.0 and g < SERIES_SWITCH * absf:
        r2 = vv / (f * f)
        if variant == 1:
            lim = 1.0 - r2 / 3.0 + r2 * r2 / 5.0
            bracket = 2.0 / 3.0 - 0.8 * r2 + 6.0 / 7.0 * r2 * r2
            return -lap / f * lim + q / (f * f * f) * bracket + r2 / (1.0 + r2)
        lim = 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0
        bracket = 2.0 / 3.0 - 8.0 / 15.0 * r2 + 34.0 / 105.0 * r2 * r2
        ch = cosh(sqrt(r2))
        return -lap / f * lim + q / (f * f * f) * bracket + r2 / (ch * ch)
    if variant == 1:
        at = atan(g / f) if f != 0.0 else 0.0
        return at / g * (q / vv - lap) + (vv - f * q / vv) / eta2
    th = tanh(g / f) if f != 0.0 else 0.0
    s = th / g * (q / vv - lap)
    if f != 0.0 and fabs(g / f) <= COSH_CLAMP:
        ch = cosh(g / f)
        s += (vv / (f * f) - q / (f * vv)) / (ch * ch)
    return s


def nodal_density(value, grad, hess, int variant):
    cdef const double[::1] val = np.ascontiguousarray(value, dtype=np.float64)
    cdef const double[:, ::1] g = np.ascontiguousarray(grad, dtype=np.float64)
    cdef const double[:, ::1] hp = np.ascontiguousarray(hess, dtype=np.float64)
    cdef Py_ssize_t N = g.shape[0]
    cdef int n = g.shape[1]
    if n > NMAX:
        raise ValueError("dimension above 6 is not supported")
    if variant < 0 or variant > 3:
        raise ValueError(f"unknown nodal variant {variant!r}")
    from .field.jet import hess_index
    cdef const Py_ssize_t[:, ::1] hidx = np.ascontiguousarray(hess_index(n), dtype=np.intp)
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double h[NMAX][NMAX]
    cdef Py_ssize_t p
    with nogil:
        for p in range(N):
            _unpack(hp, hidx, p, n, h)
            out[p] = _nodal_point(val[p], &g[p, 0], h, n, variant)
    return out_arr
