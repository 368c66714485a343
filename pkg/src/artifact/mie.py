"""Separation-of-variables solution for the sound-soft disk.

Convention shared with the boundary-integral solvers: ``U`` is the radiating
solution with boundary values ``U = exp(i k p.r)`` on the circle, so

    U(r, theta) = sum_n i^n J_n(ka)/H_n(ka) H_n(kr) exp(i n (theta - theta_p)).

The physical scattered field of a sound-soft disk is ``-U``.
"""

from __future__ import annotations

import numpy as np
from scipy import special

TAIL_TOL = 1e-16


def _orders(ka: complex, kr_min: complex, n_extra: int = 0) -> int:
    """Truncation order: first n past |ka| whose term falls below the tail tolerance."""
    n = int(abs(ka)) + 10
    while n < 2000:
        jn = special.jv(n, ka)
        ratio = special.hankel1(n, kr_min) / special.hankel1(n, ka)
        if not np.isfinite(ratio):
            break
        if abs(jn * ratio) < TAIL_TOL:
            break
        n += 5
    return n + n_extra


def disk_field(k: complex, radius: float, points: np.ndarray, p=(1.0, 0.0),
               n_max: int | None = None) -> np.ndarray:
    """Exterior field ``U`` at ``points`` (shape ``(P, 2)``).

    Parameters
    ----------
    k : complex
        Wavenumber; complex values continue the series analytically.
    radius : float
    points : array_like
        Exterior points, ``|r| >= radius``.
    p : pair
        Unit incidence direction.
    n_max : int, optional
        Truncation order; chosen adaptively when omitted.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r < radius * (1 - 1e-12)):
        raise ValueError("Mie field requested inside the disk")
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    thp = np.arctan2(p[1], p[0])
    ka = complex(k) * radius
    if n_max is None:
        n_max = _orders(ka, complex(k) * r.min())
    n = np.arange(-n_max, n_max + 1)
    coef = (1j ** np.abs(n)) * special.jv(np.abs(n), ka) / special.hankel1(np.abs(n), ka)
    # H_{-n} = (-1)^n H_n and J_{-n} = (-1)^n J_n: ratios match, i^{-n}(-1)^n = i^n
    kr = complex(k) * r
    out = np.zeros(len(r), dtype=complex)
    for m, cm in zip(n, coef):
        out += cm * special.hankel1(abs(m), kr) * np.exp(1j * m * (theta - thp))
    return out


def disk_operator_eigs(k: complex, radius: float, eta: float, n: int) -> complex:
    """Eigenvalue of the combined-field operator ``psi/2 + K - i eta S`` on ``e^{i n s}``."""
    ka = complex(k) * radius
    Jn = special.jv(n, ka)
    Hn = special.hankel1(n, ka)
    Hnp = special.h1vp(n, ka)
    return 1 + 1j * np.pi * ka / 2 * Jn * Hnp - 1j * eta * (1j * np.pi * radius / 2) * Jn * Hn


def _contour_moments(n: int, box, m: int, nq: int) -> np.ndarray:
    """``(1/2 pi i) oint z^j H_n'(z)/H_n(z) dz`` for j = 0..m around ``box``."""
    x0, x1, y0, y1 = box
    g, wg = np.polynomial.legendre.leggauss(nq)
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
    out = np.zeros(m + 1, complex)
    for a, b in zip(corners[:-1], corners[1:]):
        z = 0.5 * (a + b) + 0.5 * (b - a) * g
        f = special.h1vp(n, z) / special.hankel1(n, z) * (0.5 * (b - a)) * wg
        out += np.array([np.sum(f * z ** j) for j in range(m + 1)])
    return out / (2j * np.pi)


def hankel_zeros(box, n_max: int | None = None, nq: int = 128, max_count: int = 4,
                 depth: int = 0) -> list[tuple[int, complex]]:
    """Zeros of ``H_n^(1)`` (n = 0..n_max) inside ``box = (x0, x1, y0, y1)``.

    The argument principle counts the zeros on each box; boxes holding more
    than ``max_count`` are quartered. The zeros of a small box are the roots
    of the polynomial with the contour power sums as Newton identities,
    polished by Newton's method on the series.
    For a unit disk these are the scattering resonances in the same box.
    """
    x0, x1, y0, y1 = map(float, box)
    if n_max is None:
        n_max = int(2 * max(abs(x0), abs(x1)) + 10)
    found = []
    for n in range(n_max + 1):
        found.extend((n, z) for z in _zeros_order(n, (x0, x1, y0, y1), nq, max_count, depth))
    return sorted(found, key=lambda t: (t[1].real, t[1].imag, t[0]))


def _zeros_order(n, box, nq, max_count, depth):
    s = _contour_moments(n, box, max_count, nq)
    count = int(round(s[0].real))
    if abs(s[0] - count) > 1e-3:
        # a zero too close to the contour: nudge the box
        x0, x1, y0, y1 = box
        d = 1e-3 * (x1 - x0)
        return _zeros_order(n, (x0 - d, x1 + d, y0 - d, y1 + d), nq, max_count, depth)
    if count == 0:
        return []
    if count > max_count and depth < 12:
        x0, x1, y0, y1 = box
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        out = []
        for q in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)):
            out.extend(_zeros_order(n, q, nq, max_count, depth + 1))
        return out
    # Newton identities: power sums -> monic polynomial coefficients
    e = [1.0 + 0j]
    for k in range(1, count + 1):
        e.append(sum((-1) ** (i - 1) * e[k - i] * s[i] for i in range(1, k + 1)) / k)
    coeffs = [(-1) ** k * e[k] for k in range(count + 1)]
    roots = np.roots(coeffs)
    polished = []
    for z in roots:
        for _ in range(30):
            step = special.hankel1(n, z) / special.h1vp(n, z)
            z = z - step
            if abs(step) < 1e-15 * max(1.0, abs(z)):
                break
        polished.append(complex(z))
    return polished
