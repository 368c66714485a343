# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Nystrom kernels.

Each routine mirrors a function of the same name in ``_kernels_py`` and
returns identical results up to floating-point reassociation. Real positive
wavenumbers use the Cephes real-argument Bessel routines; every other
wavenumber goes through AMOS complex Hankel/Bessel evaluations.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, atan2, M_PI
from scipy.special.cython_special cimport j0, y0, j1, y1, hankel1, jv

cnp.import_array()

cdef double EULER = 0.57721566490153286060651209


cdef inline void _bessel_pair(double complex k, double r, bint real_k,
                              double complex* h0, double complex* h1,
                              double complex* bj0, double complex* bj1) noexcept nogil:
    cdef double x
    cdef double complex z
    if real_k:
        x = k.real * r
        bj0[0] = j0(x)
        bj1[0] = j1(x)
        h0[0] = bj0[0] + 1j * y0(x)
        h1[0] = bj1[0] + 1j * y1(x)
    else:
        z = k * r
        h0[0] = hankel1(0.0, z)
        h1[0] = hankel1(1.0, z)
        bj0[0] = jv(0.0, z)
        bj1[0] = jv(1.0, z)


cdef inline void _bessel0(double complex k, double r, bint real_k,
                          double complex* h0, double complex* bj0) noexcept nogil:
    # order 0 only: half the AMOS calls of _bessel_pair
    cdef double x
    cdef double complex z
    if real_k:
        x = k.real * r
        bj0[0] = j0(x)
        h0[0] = bj0[0] + 1j * y0(x)
    else:
        z = k * r
        h0[0] = hankel1(0.0, z)
        bj0[0] = jv(0.0, z)


cdef inline double complex _clog(double complex z) noexcept nogil:
    cdef double re = z.real, im = z.imag
    return 0.5 * log(re * re + im * im) + 1j * atan2(im, re)


def closed_blocks(const double[:, ::1] x, const double[:, ::1] dx, const double[:, ::1] ddx,
                  double complex k, const double[::1] logw, const double[::1] lg):
    """Double- and single-layer Nystrom blocks for a closed curve.

    Returns ``(K, S)`` such that ``I + K - 1j*eta*S`` is the discretized
    combined-field operator scaled by two.
    """
    cdef Py_ssize_t N = x.shape[0], i, j, m
    cdef Py_ssize_t n = N // 2
    cdef double h = M_PI / n
    cdef bint real_k = (k.imag == 0.0 and k.real > 0.0)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] Ka = np.empty((N, N), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] Sa = np.empty((N, N), dtype=np.complex128)
    cdef double complex[:, ::1] K = Ka
    cdef double complex[:, ::1] S = Sa
    cdef double complex h0, h1, bj0, bj1, L, L1, M, M1
    cdef double ex, ey, r, g, si, sj, R, lgv, cross
    cdef double complex ik2 = 0.5j * k
    with nogil:
        for i in range(N):
            si = sqrt(dx[i, 0] * dx[i, 0] + dx[i, 1] * dx[i, 1])
            for j in range(i + 1, N):
                ex = x[j, 0] - x[i, 0]
                ey = x[j, 1] - x[i, 1]
                r = sqrt(ex * ex + ey * ey)
                _bessel_pair(k, r, real_k, &h0, &h1, &bj0, &bj1)
                m = (i - j) % N
                if m < 0:
                    m = m + N
                R = logw[m]
                lgv = lg[m]
                sj = sqrt(dx[j, 0] * dx[j, 0] + dx[j, 1] * dx[j, 1])
                # row i (target), column j (source); g = n_j.(x_i - x_j)
                g = -(dx[j, 1] * ex - dx[j, 0] * ey)
                L = ik2 * g * h1 / r
                L1 = -(k / (2.0 * M_PI)) * g * bj1 / r
                M = 0.5j * h0 * sj
                M1 = -bj0 * sj / (2.0 * M_PI)
                K[i, j] = R * L1 + h * (L - L1 * lgv)
                S[i, j] = R * M1 + h * (M - M1 * lgv)
                # row j (target), column i (source): same Bessel values
                m = (j - i) % N
                if m < 0:
                    m = m + N
                R = logw[m]
                lgv = lg[m]
                g = dx[i, 1] * ex - dx[i, 0] * ey
                L = ik2 * g * h1 / r
                L1 = -(k / (2.0 * M_PI)) * g * bj1 / r
                M = 0.5j * h0 * si
                M1 = -bj0 * si / (2.0 * M_PI)
                K[j, i] = R * L1 + h * (L - L1 * lgv)
                S[j, i] = R * M1 + h * (M - M1 * lgv)
            cross = dx[i, 1] * ddx[i, 0] - dx[i, 0] * ddx[i, 1]
            K[i, i] = h * cross / (2.0 * M_PI * si * si)
            M1 = -si / (2.0 * M_PI)
            M = (0.5j - EULER / M_PI - _clog(k * si / 2.0) / M_PI) * si
            S[i, i] = logw[0] * M1 + h * M
    return Ka, Sa


def arc_matrix(const double[:, ::1] x, const double[::1] jac, const double[:, ::1] lnc,
               const double[:, ::1] wlog, double complex k):
    """Single-layer matrix on an open arc in the cosine variable."""
    cdef Py_ssize_t N = x.shape[0], i, j
    cdef double h = M_PI / N
    cdef bint real_k = (k.imag == 0.0 and k.real > 0.0)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] Ma = np.empty((N, N), dtype=np.complex128)
    cdef double complex[:, ::1] Mv = Ma
    cdef double complex h0, bj0, G, A, B
    cdef double ex, ey, r
    with nogil:
        for i in range(N):
            for j in range(i + 1, N):
                ex = x[j, 0] - x[i, 0]
                ey = x[j, 1] - x[i, 1]
                r = sqrt(ex * ex + ey * ey)
                _bessel0(k, r, real_k, &h0, &bj0)
                G = 0.25j * h0
                A = -bj0 / (2.0 * M_PI)
                B = G - A * lnc[i, j]
                Mv[i, j] = (wlog[i, j] * A + h * B) * jac[j]
                Mv[j, i] = (wlog[j, i] * A + h * B) * jac[i]
            A = -1.0 / (2.0 * M_PI)
            B = 0.25j - (_clog(k * jac[i] / 2.0) + EULER) / (2.0 * M_PI)
            Mv[i, i] = (wlog[i, i] * A + h * B) * jac[i]
    return Ma


def hankel01(double complex k, const double[:, ::1] r):
    """Elementwise ``H0(k r)`` and ``H1(k r)`` for a distance table."""
    cdef Py_ssize_t P = r.shape[0], Q = r.shape[1], i, j
    cdef bint real_k = (k.imag == 0.0 and k.real > 0.0)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] H0a = np.empty((P, Q), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] H1a = np.empty((P, Q), dtype=np.complex128)
    cdef double complex[:, ::1] H0 = H0a
    cdef double complex[:, ::1] H1 = H1a
    cdef double complex h0, h1, bj0, bj1
    with nogil:
        for i in range(P):
            for j in range(Q):
                _bessel_pair(k, r[i, j], real_k, &h0, &h1, &bj0, &bj1)
                H0[i, j] = h0
                H1[i, j] = h1
    return H0a, H1a
