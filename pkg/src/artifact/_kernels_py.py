"""Pure numpy implementations of the Nystrom kernels.

Same signatures and conventions as the compiled ``_kernels`` module. Used
when the extension is unavailable or when ``ARTIFACT_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np
from scipy import special

EULER = np.euler_gamma


def _bessel0(k: complex, r: np.ndarray):
    """Return ``H0, J0`` evaluated at ``k*r``."""
    if k.imag == 0.0 and k.real > 0.0:
        x = k.real * r
        bj0 = special.j0(x)
        return bj0 + 1j * special.y0(x), bj0 + 0j
    z = k * r
    return special.hankel1(0, z), special.jv(0, z)


def _bessel(k: complex, r: np.ndarray):
    """Return ``H0, H1, J0, J1`` evaluated at ``k*r``."""
    if k.imag == 0.0 and k.real > 0.0:
        x = k.real * r
        bj0 = special.j0(x)
        bj1 = special.j1(x)
        return bj0 + 1j * special.y0(x), bj1 + 1j * special.y1(x), bj0 + 0j, bj1 + 0j
    z = k * r
    return (special.hankel1(0, z), special.hankel1(1, z),
            special.jv(0, z), special.jv(1, z))


def closed_blocks(x, dx, ddx, k, logw, lg):
    """Double- and single-layer Nystrom blocks for a closed curve."""
    k = complex(k)
    N = x.shape[0]
    n = N // 2
    h = np.pi / n
    iu, ju = np.triu_indices(N, 1)
    ex = x[ju, 0] - x[iu, 0]
    ey = x[ju, 1] - x[iu, 1]
    r = np.hypot(ex, ey)
    h0, h1, bj0, bj1 = _bessel(k, r)
    s = np.hypot(dx[:, 0], dx[:, 1])
    K = np.empty((N, N), dtype=complex)
    S = np.empty((N, N), dtype=complex)

    def fill(rows, cols, g, sc):
        m = (rows - cols) % N
        R = logw[m]
        lgv = lg[m]
        L = 0.5j * k * g * h1 / r
        L1 = -(k / (2 * np.pi)) * g * bj1 / r
        M = 0.5j * h0 * sc
        M1 = -bj0 * sc / (2 * np.pi)
        K[rows, cols] = R * L1 + h * (L - L1 * lgv)
        S[rows, cols] = R * M1 + h * (M - M1 * lgv)

    # g = n_source . (x_target - x_source)
    fill(iu, ju, -(dx[ju, 1] * ex - dx[ju, 0] * ey), s[ju])
    fill(ju, iu, dx[iu, 1] * ex - dx[iu, 0] * ey, s[iu])
    d = np.arange(N)
    cross = dx[:, 1] * ddx[:, 0] - dx[:, 0] * ddx[:, 1]
    K[d, d] = h * cross / (2 * np.pi * s * s)
    M1 = -s / (2 * np.pi)
    M = (0.5j - EULER / np.pi - np.log(k * s / 2) / np.pi) * s
    S[d, d] = logw[0] * M1 + h * M
    return K, S


def arc_matrix(x, jac, lnc, wlog, k):
    """Single-layer matrix on an open arc in the cosine variable."""
    k = complex(k)
    N = x.shape[0]
    h = np.pi / N
    iu, ju = np.triu_indices(N, 1)
    r = np.hypot(x[ju, 0] - x[iu, 0], x[ju, 1] - x[iu, 1])
    h0, bj0 = _bessel0(k, r)
    G = 0.25j * h0
    A = -bj0 / (2 * np.pi)
    B = G - A * lnc[iu, ju]
    Mv = np.empty((N, N), dtype=complex)
    Mv[iu, ju] = (wlog[iu, ju] * A + h * B) * jac[ju]
    Mv[ju, iu] = (wlog[ju, iu] * A + h * B) * jac[iu]
    d = np.arange(N)
    A = -1.0 / (2 * np.pi)
    B = 0.25j - (np.log(k * jac / 2) + EULER) / (2 * np.pi)
    Mv[d, d] = (wlog[d, d] * A + h * B) * jac
    return Mv


def hankel01(k, r):
    """Elementwise ``H0(k r)`` and ``H1(k r)`` for a distance table."""
    h0, h1, _, _ = _bessel(complex(k), r)
    return np.asarray(h0, dtype=complex), np.asarray(h1, dtype=complex)
