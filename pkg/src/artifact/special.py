"""Complex-argument Bessel and Hankel functions.

Thin bindings over ``scipy.special`` (AMOS for complex arguments, Cephes for
real ones). Accuracy is validated in the test suite against mpmath in the
region ``|z| in [1e-8, 1e3]``, ``Im z in [-10, 0]``.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp


def _is_real_positive(z: np.ndarray) -> bool:
    return not np.iscomplexobj(z) or (np.all(z.imag == 0) and np.all(z.real > 0))


def hankel_h0(z):
    """First-kind Hankel function of order zero."""
    z = np.asarray(z)
    if _is_real_positive(z):
        x = z.real
        return _sp.j0(x) + 1j * _sp.y0(x)
    return _sp.hankel1(0, z.astype(complex))


def hankel_h1(z):
    """First-kind Hankel function of order one."""
    z = np.asarray(z)
    if _is_real_positive(z):
        x = z.real
        return _sp.j1(x) + 1j * _sp.y1(x)
    return _sp.hankel1(1, z.astype(complex))


def bessel_j0(z):
    z = np.asarray(z)
    if _is_real_positive(z):
        return _sp.j0(z.real)
    return _sp.jv(0, z.astype(complex))


def bessel_y0(z):
    z = np.asarray(z)
    if _is_real_positive(z):
        return _sp.y0(z.real)
    return _sp.yv(0, z.astype(complex))


def hankel_n(n, z):
    """First-kind Hankel function of integer order ``n``."""
    return _sp.hankel1(n, np.asarray(z, dtype=complex))


def hankel_n_prime(n, z):
    return _sp.h1vp(n, np.asarray(z, dtype=complex))
