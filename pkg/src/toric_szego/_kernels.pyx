# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: batched potential derivatives, the monomial-norm
integrand, and the int64 shift-add used by the partition convolution."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

BACKEND = "cython"

cdef enum:
    MAXM = 3
    MAXK = 4096


cdef inline double _det(double h[MAXM][MAXM], int m) noexcept nogil:
    if m == 1:
        return h[0][0]
    if m == 2:
        return h[0][0] * h[1][1] - h[0][1] * h[1][0]
    return (h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
            - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]))


cdef void _point(const double[::1] rho, const double[:, ::1] B, const double[::1] logw,
                 double* wbuf, double* f_out, double* g_out,
                 double h_out[MAXM][MAXM]) noexcept nogil:
    cdef Py_ssize_t k = B.shape[0], i, a, b
    cdef int m = B.shape[1]
    cdef double top = -1e308, s = 0.0, v, d_a
    for i in range(k):
        v = logw[i]
        for a in range(m):
            v += rho[a] * B[i, a]
        wbuf[i] = v
        if v > top:
            top = v
    for i in range(k):
        wbuf[i] = exp(wbuf[i] - top)
        s += wbuf[i]
    f_out[0] = top + log(s)
    for a in range(m):
        g_out[a] = 0.0
    for i in range(k):
        wbuf[i] /= s
        for a in range(m):
            g_out[a] += wbuf[i] * B[i, a]
    for a in range(m):
        for b in range(m):
            h_out[a][b] = 0.0
    for i in range(k):
        for a in range(m):
            d_a = B[i, a] - g_out[a]
            for b in range(a, m):
                h_out[a][b] += wbuf[i] * d_a * (B[i, b] - g_out[b])
    for a in range(m):
        for b in range(a):
            h_out[a][b] = h_out[b][a]


def potential_derivs(rho, B, logw):
    cdef double[:, ::1] R = np.ascontiguousarray(rho, dtype=np.float64)
    cdef double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef double[::1] L = np.ascontiguousarray(logw, dtype=np.float64)
    cdef Py_ssize_t n = R.shape[0], j, a, b
    cdef int m = Bv.shape[1]
    if m > MAXM or Bv.shape[0] > MAXK:
        raise ValueError("compiled kernel supports m <= 3 and at most 4096 lattice points")
    f = np.empty(n)
    grad = np.empty((n, m))
    hess = np.empty((n, m, m))
    cdef double[::1] fv = f
    cdef double[:, ::1] gv = grad
    cdef double[:, :, ::1] hv = hess
    cdef double wbuf[MAXK]
    cdef double g[MAXM]
    cdef double h[MAXM][MAXM]
    cdef double fval
    with nogil:
        for j in range(n):
            _point(R[j], Bv, L, wbuf, &fval, g, h)
            fv[j] = fval
            for a in range(m):
                gv[j, a] = g[a]
                for b in range(m):
                    hv[j, a, b] = h[a][b]
    return f, grad, hess


def log_hessian_det(rho, B, logw):
    return norm_log_integrand(rho, B, logw, np.zeros(np.shape(B)[1]), 0.0)


def norm_log_integrand(rho, B, logw, alpha, double N):
    cdef double[:, ::1] R = np.ascontiguousarray(rho, dtype=np.float64)
    cdef double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef double[::1] L = np.ascontiguousarray(logw, dtype=np.float64)
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef Py_ssize_t n = R.shape[0], j, a
    cdef int m = Bv.shape[1]
    if m > MAXM or Bv.shape[0] > MAXK:
        raise ValueError("compiled kernel supports m <= 3 and at most 4096 lattice points")
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double wbuf[MAXK]
    cdef double g[MAXM]
    cdef double h[MAXM][MAXM]
    cdef double fval, det, lin
    with nogil:
        for j in range(n):
            _point(R[j], Bv, L, wbuf, &fval, g, h)
            det = _det(h, m)
            lin = 0.0
            for a in range(m):
                lin += al[a] * R[j, a]
            if det > 0.0:
                ov[j] = lin - N * fval + log(det)
            else:
                ov[j] = -INFINITY
    return out


def convolve_shift_add(cnp.int64_t[:, :, ::1] src, cnp.int64_t[:, :, ::1] dst, shifts):
    cdef cnp.int64_t[:, ::1] sh = np.ascontiguousarray(shifts, dtype=np.int64)
    cdef Py_ssize_t S0 = src.shape[0], S1 = src.shape[1], S2 = src.shape[2]
    cdef Py_ssize_t D1 = dst.shape[1], D2 = dst.shape[2]
    cdef Py_ssize_t s, i, j, k, a, b, c, n
    cdef cnp.int64_t *ps
    cdef cnp.int64_t *pd
    with nogil:
        for s in range(sh.shape[0]):
            a = sh[s, 0]
            b = sh[s, 1]
            c = sh[s, 2]
            if c == 0 and S2 == D2 and S1 == D1:
                # the (j, k) block of one slab is a single contiguous run
                n = (S1 - b) * S2
                for i in range(S0 - a):
                    ps = &src[i, 0, 0]
                    pd = &dst[i + a, b, 0]
                    for k in range(n):
                        pd[k] += ps[k]
            else:
                for i in range(S0 - a):
                    for j in range(S1 - b):
                        ps = &src[i, j, 0]
                        pd = &dst[i + a, j + b, c]
                        for k in range(S2 - c):
                            pd[k] += ps[k]
