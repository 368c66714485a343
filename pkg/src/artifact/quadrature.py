"""Windowed Fourier machinery and oscillatory quadrature.

* erfc-tapered partition-of-unity windows and slow windowed spectra;
* an O(M log M) setup / O(M)-per-time Fourier rule that integrates the
  trigonometric interpolant of equispaced samples exactly;
* a Filon-Clenshaw-Curtis rule on a mesh graded toward ``omega = 0`` for the
  logarithmic branch point of 2D frequency-domain solutions.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft as sfft
from scipy import linalg
from scipy import special

log = logging.getLogger(__name__)

DEFAULT_H = 10.0
DEFAULT_ALPHA = 0.5
DEFAULT_RHO = 5.805
LOG_DEGREE = 2
# the centre cutoff tapers on [w_c/2, w_c]; that panel is split this many times
TAPER_PANELS = 8


def window_value(t, H: float = DEFAULT_H, alpha: float = DEFAULT_ALPHA, rho: float = DEFAULT_RHO):
    """erfc-tapered window: 1 on ``|t| < alpha H``, taper to ``H``, 0 beyond."""
    if H <= 0 or not 0 < alpha < 1 or rho <= 0:
        raise ValueError("window requires H > 0, 0 < alpha < 1, rho > 0")
    t = np.abs(np.asarray(t, float))
    x = -rho + 2 * rho * (t - alpha * H) / ((1 - alpha) * H)
    out = 0.5 * special.erfc(x)
    out = np.where(t < alpha * H, 1.0, out)
    out = np.where(t > H, 0.0, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WindowPartition:
    """Windows ``w_k(t) = w(t - s_k)`` with ``s_k = 3(k-1)H/2``, k = 1..K."""

    T_inc: float
    H: float = DEFAULT_H
    alpha: float = DEFAULT_ALPHA
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not math.isclose(self.alpha, 0.5):
            # the 3H/2 spacing gives a partition of unity only for alpha = 1/2
            log.warning("window spacing 3H/2 is a partition of unity only for alpha = 0.5")

    @property
    def K(self) -> int:
        step = 1.5 * self.H
        return max(1, int(math.ceil((self.T_inc - self.alpha * self.H) / step - 1e-12)) + 1)

    @property
    def centers(self) -> np.ndarray:
        return 1.5 * self.H * np.arange(self.K)

    def window(self, k: int, t):
        """Window ``k`` (1-based) at times ``t``."""
        return window_value(np.asarray(t, float) - self.centers[k - 1], self.H, self.alpha, self.rho)

    def total(self, t):
        t = np.asarray(t, float)
        return sum(self.window(k, t) for k in range(1, self.K + 1))

    @property
    def tail(self) -> float:
        return 0.5 * math.erfc(self.rho)


@dataclass(frozen=True)
class WindowedSpectrum:
    k: int
    grid: np.ndarray
    samples: np.ndarray
    band: tuple
    tail_bound: float


def _trapezoid_ft(a: Callable, t0: float, t1: float, omegas: np.ndarray, dt: float,
                  weight: Callable | None = None, chunk: int = 256) -> np.ndarray:
    """``int_{t0}^{t1} weight(t) a(t) e^{i w t} dt`` by the trapezoid rule.

    Accurate to near machine precision when the integrand vanishes smoothly
    at both ends (the windowed signals used here).
    """
    n = int(math.ceil((t1 - t0) / dt))
    t = np.linspace(t0, t1, n + 1)
    h = (t1 - t0) / n
    f = np.asarray(a(t), dtype=complex)
    if weight is not None:
        f = f * weight(t)
    f[0] *= 0.5
    f[-1] *= 0.5
    om = np.asarray(omegas, dtype=complex).ravel()
    out = np.empty(om.size, dtype=complex)
    for s in range(0, om.size, chunk):
        out[s:s + chunk] = np.exp(1j * np.outer(om[s:s + chunk], t)) @ f * h
    return out.reshape(np.shape(omegas))


def windowed_spectrum(a: Callable, k: int, part: WindowPartition, grid, dt: float | None = None,
                      band: tuple | None = None) -> WindowedSpectrum:
    """Slow spectrum ``A_k(w) = int_{-H}^{H} w(t) a(t + s_k) e^{i w t} dt`` on ``grid``."""
    grid = np.asarray(grid, float)
    sk = part.centers[k - 1]
    dt = part.H / 2048 if dt is None else dt
    wfun = lambda t: window_value(t, part.H, part.alpha, part.rho)
    vals = _trapezoid_ft(lambda t: a(t + sk), -part.H, part.H, grid, dt, wfun)
    band = (float(grid[0]), float(grid[-1])) if band is None else band
    tail = float(max(abs(vals[0]), abs(vals[-1]))) if vals.size else 0.0
    return WindowedSpectrum(k, grid, vals, band, tail)


# ---------------------------------------------------------------------------
# Fourier rule for equispaced samples


@dataclass(frozen=True, eq=False)
class TrigRule:
    """Trigonometric-interpolant Fourier integrator for samples on ``[a, b]``.

    ``integrate(t)`` returns ``int_a^b p(w) e^{-i w t} dw`` where ``p`` is the
    trigonometric interpolant of period ``P >= (b - a)(1 + margin)`` through
    the zero-padded samples. Samples may carry trailing dimensions.
    """

    a: float
    b: float
    coeffs: np.ndarray  # (M, ...) coefficients c_m
    nu: np.ndarray  # (M,) frequencies 2 pi m / P

    @property
    def W(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def delta(self) -> float:
        return 0.5 * (self.a + self.b)

    def kernel(self, t) -> np.ndarray:
        """Matrix ``2 sin(W (t - nu))/(t - nu)`` of shape ``(len(t), M)``."""
        t = np.atleast_1d(np.asarray(t, float))
        x = t[:, None] - self.nu[None, :]
        W = self.W
        # sin(W x)/x with the x -> 0 limit W
        return 2 * W * np.sinc(W * x / np.pi)

    def integrate(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, float))
        c = self.coeffs.reshape(self.coeffs.shape[0], -1)
        val = (self.kernel(t_arr) @ c) * np.exp(-1j * self.delta * t_arr)[:, None]
        val = val.reshape((t_arr.size,) + self.coeffs.shape[1:])
        return val[0] if np.ndim(t) == 0 else val


def trig_rule(F, a: float, b: float, periodic: bool = False, margin: float = 0.125,
              endpoint_tol: float = 1e-8) -> TrigRule:
    """Build the Fourier rule from ``J`` equispaced samples ``F`` on ``[a, b]``.

    Parameters
    ----------
    F : (J, ...) array
    periodic : bool
        Treat the samples as one period (``F[0] == F[-1]``), no padding.
    margin : float
        Relative zero-padding of the period for non-periodic data.
    endpoint_tol : float
        Non-periodic data must satisfy ``|F(a)|, |F(b)| <= endpoint_tol * max|F|``.
    """
    F = np.asarray(F, dtype=complex)
    J = F.shape[0]
    if J < 3 or not b > a:
        raise ValueError("need at least 3 samples on a nonempty interval")
    dw = (b - a) / (J - 1)
    scale = np.abs(F).max() if F.size else 0.0
    if periodic:
        samples = F[:-1]
        M = J - 1
    else:
        edge = max(np.abs(F[0]).max(), np.abs(F[-1]).max())
        if scale > 0 and edge > endpoint_tol * scale:
            raise ValueError(f"endpoint magnitude {edge / scale:.2e} (relative) exceeds {endpoint_tol:.0e}; "
                             "samples must vanish at the band edges or be flagged periodic")
        M = sfft.next_fast_len(int(math.ceil((J - 1) * (1 + margin))) + 1)
        samples = np.zeros((M,) + F.shape[1:], dtype=complex)
        samples[:J] = F
    P = M * dw
    ct = sfft.fft(samples, axis=0) / M
    m = np.rint(sfft.fftfreq(M) * M)
    if M % 2 == 0:
        # split the Nyquist mode symmetrically between +-M/2
        ny = np.nonzero(m == -M // 2)[0][0]
        ct = np.concatenate([ct, ct[ny:ny + 1] * 0.5], axis=0)
        ct[ny] *= 0.5
        m = np.concatenate([m, [M // 2]])
    nu = 2 * np.pi * m / P
    W = 0.5 * (b - a)
    shape = (-1,) + (1,) * (F.ndim - 1)
    c = ct * np.exp(1j * nu * W).reshape(shape)
    return TrigRule(float(a), float(b), c, nu)


def oscillatory_integral(F, a: float, b: float, t, periodic: bool = False,
                         margin: float = 0.125, endpoint_tol: float = 1e-8):
    """``int_a^b F(w) e^{-i w t} dw`` from equispaced samples; cost independent of t."""
    return trig_rule(F, a, b, periodic, margin, endpoint_tol).integrate(t)


# ---------------------------------------------------------------------------
# Filon-Clenshaw-Curtis on a graded mesh


def _cheb_points(q: int) -> np.ndarray:
    """First-kind Chebyshev points ``cos(pi (j + 1/2)/(q + 1))``, j = 0..q.

    Interior points keep every sample away from the branch point at 0.
    """
    return np.cos(np.pi * (np.arange(q + 1) + 0.5) / (q + 1))


def _cheb_coeffs(vals: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through first-kind points (DCT-II)."""
    n = vals.shape[0]
    c = sfft.dct(vals, type=2, axis=0) / n
    c[0] *= 0.5
    return c


def cheb_moments(n: int, kappa: float) -> np.ndarray:
    """``I_j = int_{-1}^{1} T_j(s) e^{-i kappa s} ds`` for j = 0..n.

    Forward recurrence where it is stable (``|kappa| > n``), otherwise the
    Jacobi-Anger expansion with exact Chebyshev products.
    """
    k = float(kappa)
    if abs(k) > n and abs(k) > 1:
        I = np.empty(n + 1, dtype=complex)
        e_m, e_p = np.exp(-1j * k), np.exp(1j * k)
        B = lambda m: e_m - (-1) ** m * e_p
        I[0] = 2 * math.sin(k) / k
        if n >= 1:
            I[1] = -2j * (math.sin(k) - k * math.cos(k)) / k ** 2
        if n >= 2:
            I[2] = (4 * I[1] - B(2)) / (1j * k)
        for j in range(2, n):
            I[j + 1] = (j + 1) / (1j * k) * (2 * I[j] + (B(j - 1) + 1j * k * I[j - 1]) / (j - 1)
                                              - B(j + 1) / (j + 1))
        return I
    L = n + int(abs(k)) + 40
    kk = np.arange(L + 1)
    coef = (2.0 - (kk == 0)) * (-1j) ** kk * special.jv(kk, k)
    j = np.arange(n + 1)[:, None]
    s, d = j + kk[None, :], j - kk[None, :]
    with np.errstate(divide="ignore"):
        prod = np.where(s % 2 == 0, 1.0 / (1.0 - s * s) + 1.0 / (1.0 - d * d), 0.0)
    return prod @ coef


def fcc_mesh(w_c: float = 1.0, M_I: int = 8, taper: int = TAPER_PANELS) -> np.ndarray:
    """Graded breakpoints ``0, w_c 2^{1-M_I}, ..., w_c/2, w_c``.

    The last panel is cut into ``taper`` equal pieces so the steep centre
    cutoff is resolved.
    """
    x = np.concatenate([[0.0], w_c * 2.0 ** (np.arange(1, M_I) - M_I)])
    return np.concatenate([x, w_c * (0.5 + 0.5 * np.arange(1, taper + 1) / taper)])


def _fcc_layout(w_c: float, M_I: int, q: int):
    """Panel breakpoints and flat node list.

    The innermost panel ``[0, w_c 2^{1-M_I}]`` carries ``q + 1 + LOG_DEGREE + 1``
    nodes for the log-aware fit, every other panel ``q + 1``.
    """
    if q < 2:
        raise ValueError("FCC requires q >= 2")
    if M_I < 1:
        raise ValueError("FCC requires M_I >= 1")
    x = fcc_mesh(w_c, M_I)
    h0 = x[1]
    inner = 0.5 * h0 * (1 + _cheb_points(q + LOG_DEGREE + 1))
    s = _cheb_points(q)
    c, h = 0.5 * (x[2:] + x[1:-1]), 0.5 * (x[2:] - x[1:-1])
    outer = (c[:, None] + h[:, None] * s[None, :]).ravel()
    return x, np.concatenate([inner, outer])


def fcc_nodes(w_c: float = 1.0, M_I: int = 8, q: int = 8) -> np.ndarray:
    """Flat sample locations, innermost panel first."""
    return _fcc_layout(w_c, M_I, q)[1]


@functools.lru_cache(maxsize=64)
def _log_fit(q: int):
    """LU factors mapping samples at first-kind points of ``[0, 1]`` to coefficients of
    ``sum_{j<=q} a_j T_j(2u-1) + log(u) sum_{j<=LOG_DEGREE} b_j T_j(2u-1)``.

    A low-degree log factor keeps the fit well conditioned; on a panel of
    width ``w_c 2^{1-M_I}`` it already resolves ``A + B log w`` to ~1e-10.
    """
    u = 0.5 * (1 + _cheb_points(q + LOG_DEGREE + 1))
    T = np.polynomial.chebyshev.chebvander(2 * u - 1, q)
    L = np.polynomial.chebyshev.chebvander(2 * u - 1, LOG_DEGREE)
    V = np.hstack([T, np.log(u)[:, None] * L])
    # LU rather than an explicit inverse: polynomial data then fit exactly
    return linalg.lu_factor(V)


def _log_moments(q: int, kappa: float, p: int = 6) -> np.ndarray:
    """``int_0^1 log(u) T_j(2u-1) e^{-i kappa u} du`` for j = 0..q.

    Substituting ``u = v^p`` leaves an integrand smooth enough for
    Gauss-Legendre; the node count grows with the phase to keep the
    error uniform in ``kappa``.
    """
    n = 64 + 2 * q + int(math.ceil(p * abs(kappa) / 2))
    v, w = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (v + 1)
    w = 0.5 * w
    u = v ** p
    jac = p * v ** (p - 1) * (p * np.log(v))
    T = np.polynomial.chebyshev.chebvander(2 * u - 1, q)
    return (w * jac * np.exp(-1j * kappa * u)) @ T


def fcc_log_integral(F, t: float, w_c: float = 1.0, M_I: int = 8, q: int = 8) -> complex:
    """``int_0^{w_c} F(w) e^{-i w t} dw`` for ``F = A + B log(w)`` with smooth ``A, B``.

    Panels ``[w_c 2^{-m}, w_c 2^{1-m}]`` use the classical Filon-Clenshaw-Curtis
    rule (degree-``q`` Chebyshev interpolant, exact oscillatory moments). The
    innermost panel fits ``P + log(w) Q`` (``P`` of degree ``q``, ``Q`` of
    degree ``LOG_DEGREE``) and
    integrates that model exactly, so the branch point is never sampled.

    Parameters
    ----------
    F : callable or array
        Callable of ``w`` or values at ``fcc_nodes(w_c, M_I, q)`` (with
        optional trailing dimensions).
    """
    x, nodes = _fcc_layout(w_c, M_I, q)
    vals = np.asarray(F(nodes) if callable(F) else F, dtype=complex)
    if vals.shape[:1] != nodes.shape:
        raise ValueError(f"F samples must have leading length {nodes.size}")
    n0 = q + LOG_DEGREE + 2
    h0 = x[1]
    # innermost panel: u = w/h0, log(w) = log(h0) + log(u) is absorbed by the fit
    inner = vals[:n0].reshape(n0, -1)
    coef = linalg.lu_solve(_log_fit(q), inner).reshape(vals[:n0].shape)
    kap = h0 * t
    mom = 0.5 * cheb_moments(q, 0.5 * kap) * np.exp(-0.5j * kap)
    lmom = _log_moments(LOG_DEGREE, kap)
    total = h0 * (np.tensordot(mom, coef[:q + 1], axes=(0, 0))
                  + np.tensordot(lmom, coef[q + 1:], axes=(0, 0)))
    outer = vals[n0:].reshape((len(x) - 2, q + 1) + vals.shape[1:])
    for p in range(len(x) - 2):
        c, h = 0.5 * (x[p + 2] + x[p + 1]), 0.5 * (x[p + 2] - x[p + 1])
        coeffs = _cheb_coeffs(outer[p])
        total = total + h * np.exp(-1j * c * t) * np.tensordot(cheb_moments(q, h * t), coeffs, axes=(0, 0))
    return total


def center_cutoff(w, w_c: float, rho: float = DEFAULT_RHO):
    """Smooth cutoff equal to 1 on ``|w| <= w_c/2`` and 0 beyond ``w_c``."""
    return window_value(w, w_c, 0.5, rho)


def inverse_transform(U, a: float, b: float, t, w_c: float = 1.0, center=None,
                      M_I: int = 8, q: int = 8, shift: float = 0.0, margin: float = 0.125,
                      endpoint_tol: float = 1e-8):
    """``(1/2pi) int_a^b U(w) e^{-i w (t - shift)} dw`` from equispaced samples.

    When ``0`` lies inside ``[a, b]`` the integrand is split with a smooth
    cutoff ``chi`` supported in ``[-w_c, w_c]``: ``(1 - chi) U`` is handled by
    the equispaced rule over the whole band and ``chi U`` by FCC on
    ``[0, w_c]`` and ``[-w_c, 0]``. ``center`` must then provide ``U`` at
    ``+fcc_nodes`` and ``-fcc_nodes`` as a pair of arrays or a callable.
    """
    U = np.asarray(U, dtype=complex)
    ts = np.atleast_1d(np.asarray(t, float)) - shift
    if not (a < 0 < b):
        out = oscillatory_integral(U, a, b, ts, margin=margin, endpoint_tol=endpoint_tol) / (2 * np.pi)
        return out[0] if np.ndim(t) == 0 else out
    if center is None:
        raise ValueError("band contains 0: center-band samples are required")
    grid = np.linspace(a, b, U.shape[0])
    chi = center_cutoff(grid, w_c).reshape((-1,) + (1,) * (U.ndim - 1))
    outer = oscillatory_integral((1 - chi) * U, a, b, ts, margin=margin, endpoint_tol=endpoint_tol)
    nodes = fcc_nodes(w_c, M_I, q)
    if callable(center):
        up, um = center(nodes), center(-nodes)
    else:
        up, um = center
    up, um = np.asarray(up, complex), np.asarray(um, complex)
    cw = center_cutoff(nodes, w_c).reshape(nodes.shape + (1,) * (up.ndim - 1))
    inner = np.stack([fcc_log_integral(cw * up, tt, w_c, M_I, q)
                      + fcc_log_integral(cw * um, -tt, w_c, M_I, q) for tt in ts])
    out = (outer + inner) / (2 * np.pi)
    return out[0] if np.ndim(t) == 0 else out
