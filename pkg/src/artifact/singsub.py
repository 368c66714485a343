"""Singularity subtraction and the singular-part integral.

With resonances ``rho_n`` and field residues ``c_n(r)`` the frequency data
splits as ``U = U^s + sum_n c_n/(w - rho_n)``. The smooth part goes through
the windowed Fourier rules; the singular part

    I2(r, t) = (1/2pi) sum_n c_n(r) int_{W1}^{W2} A(w) e^{-iwt}/(w - rho_n) dw

is evaluated by Clenshaw-Curtis on the regularized integrand at early
times and by the residue expansion ``-i sum_n c_n A(rho_n) e^{-i rho_n t}``
once the truncation error has decayed below tolerance.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft

log = logging.getLogger(__name__)

N_CHEB = 256
N_CHEB_CAP = 4096
# poles deeper than this fraction of the half band are integrated directly
DIRECT_DEPTH = 0.1


class QuadratureResolutionError(RuntimeError):
    pass


class BranchMismatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class SubtractedField:
    """Regularized samples ``U^s`` with shape ``(J, P)`` on the grid ``omegas``."""

    omegas: np.ndarray
    values: np.ndarray
    poles: np.ndarray
    residues: np.ndarray  # (n_res, P)
    band: tuple
    h: float | None = None
    max_term: np.ndarray | None = None

    def singular_terms(self) -> np.ndarray:
        if self.poles.size == 0:
            return np.zeros_like(self.values)
        return np.einsum("jn,np->jp", 1.0 / (self.omegas[:, None] - self.poles[None, :]), self.residues)


def subtract(U, omegas, poles=(), residues=None, band=None, h=None) -> SubtractedField:
    """``U^s = U - sum_n c_n/(w - rho_n)`` at every sample.

    Parameters
    ----------
    U : (J, P) array
        Field samples per frequency (rows) and observation point (columns).
    poles : (n,) complex
    residues : (n, P) complex
        Field residues at every observation point.
    """
    U = np.asarray(U, complex)
    squeeze = U.ndim == 1
    U2 = U[:, None] if squeeze else U
    omegas = np.asarray(omegas, float)
    poles = np.asarray(poles, complex).ravel()
    if poles.size and residues is None:
        raise ValueError("residues are required for every pole")
    res = np.zeros((0, U2.shape[1]), complex) if residues is None else np.asarray(residues, complex)
    if poles.size == 0:
        res = np.zeros((0, U2.shape[1]), complex)
    res = res.reshape(poles.size, U2.shape[1]) if res.size == poles.size * U2.shape[1] else res
    if res.ndim != 2 or res.shape[1] != U2.shape[1]:
        raise ValueError(f"residues given for {res.shape[1]} point(s), field has {U2.shape[1]}")
    band = (float(omegas[0]), float(omegas[-1])) if band is None else tuple(band)
    if poles.size == 0:
        return SubtractedField(omegas, U.copy(), poles, res, band, h, np.zeros(omegas.size))
    terms = np.einsum("jn,np->jp", 1.0 / (omegas[:, None] - poles[None, :]), res)
    vals = U2 - terms
    return SubtractedField(omegas, vals[:, 0] if squeeze else vals, poles, res, band, h,
                           np.abs(terms).max(axis=1))


# ---------------------------------------------------------------------------
# Singular-part integrals


def _cc_nodes(n: int) -> np.ndarray:
    return np.cos(np.pi * np.arange(n + 1) / n)


def _cc_integrate(vals: np.ndarray) -> tuple[np.ndarray, float]:
    """Integral over [-1, 1] of the interpolant through CC points and a tail indicator."""
    n = vals.shape[0] - 1
    c = sfft.dct(vals, type=1, axis=0) / n
    c[0] *= 0.5
    c[-1] *= 0.5
    k = np.arange(n + 1)
    mom = np.where(k % 2 == 0, 2.0 / (1.0 - k * k + (k == 1)), 0.0)
    scale = np.abs(c).max(axis=0)
    tail = np.abs(c[-max(4, n // 16):]).max(axis=0)
    # coefficients cannot drop below the rounding level of the samples
    tail = np.maximum(tail - 64 * np.finfo(float).eps * np.abs(vals).max(axis=0), 0.0)
    ratio = np.where(scale > 0, tail / np.where(scale > 0, scale, 1), 0.0)
    return np.tensordot(mom, c, axes=(0, 0)), float(np.max(ratio))


def _as_spectrum(A) -> Callable:
    return A if callable(A) else (lambda z: np.full(np.shape(z), complex(A)))


def I2_quadrature(A, rho: complex, t, W1: float, W2: float, n_cheb: int = N_CHEB,
                  cap: int = N_CHEB_CAP, coeff_tol: float = 1e-14) -> np.ndarray:
    """``int_{W1}^{W2} A(w) e^{-iwt}/(w - rho) dw`` (no ``1/2pi``).

    A pole near the band is removed analytically: Clenshaw-Curtis handles
    ``(A(w)e^{-iwt} - A(rho)e^{-i rho t})/(w - rho)`` and the remainder is
    ``A(rho) e^{-i rho t} log((W2 - rho)/(W1 - rho))`` on the principal branch.
    ``n_cheb`` doubles until the Chebyshev tail drops below ``coeff_tol``.
    """
    rho = complex(rho)
    if not rho.imag < 0:
        raise ValueError("I2 quadrature needs Im rho < 0")
    A = _as_spectrum(A)
    ts = np.atleast_1d(np.asarray(t, float))
    c, hw = 0.5 * (W1 + W2), 0.5 * (W2 - W1)
    if abs(rho.imag) >= DIRECT_DEPTH * hw:
        # far pole: the plain integrand is smooth, and A(rho) may be huge
        e_rho = np.zeros(ts.size, complex)
        logterm = 0.0
    else:
        Arho = complex(np.asarray(A(np.array([rho])))[0])
        e_rho = Arho * np.exp(-1j * rho * ts)
        logterm = np.log((W2 - rho) / (W1 - rho))
    n = n_cheb
    while True:
        w = c + hw * _cc_nodes(n)
        Aw = np.asarray(A(w), complex)
        num = Aw[:, None] * np.exp(-1j * np.outer(w, ts)) - e_rho[None, :]
        vals = num / (w - rho)[:, None]
        integ, tail = _cc_integrate(vals)
        # cancellation in the regularized numerator sets a further floor
        noise = 64 * np.finfo(float).eps * np.abs(e_rho).max() / np.abs(w - rho).min()
        tail = max(0.0, tail - noise / max(np.abs(vals).max(), 1e-300))
        if tail < coeff_tol:
            break
        if 2 * n > cap:
            raise QuadratureResolutionError(f"I2 quadrature unresolved at n={n} (tail {tail:.1e}); "
                                            "reduce t or raise the cap")
        n *= 2
    out = hw * integ + e_rho * logterm
    return out[0] if np.ndim(t) == 0 else out


def I2_asymptotic(poles, residues, A, t) -> np.ndarray:
    """``-i sum_n c_n A(rho_n) e^{-i rho_n t}``; shape ``(T, P)``."""
    poles = np.asarray(poles, complex).ravel()
    ts = np.atleast_1d(np.asarray(t, float))
    if poles.size == 0:
        P = 1 if residues is None else np.asarray(residues).reshape(0, -1).shape[1]
        return np.zeros((ts.size, P), complex)
    res = np.asarray(residues, complex).reshape(poles.size, -1)
    Ar = np.asarray(_as_spectrum(A)(poles), complex)
    E = np.exp(-1j * np.outer(ts, poles)) * Ar[None, :]
    return -1j * E @ res


@dataclass(frozen=True)
class SwitchTime:
    t_star: float
    onset: float
    constant: float
    reachable: bool = True
    floor: float = 0.0


def onset_time(h: float, signal: dict) -> float:
    """``T_inc`` for compact signals, ``h/sigma^2`` for the Gaussian spectrum."""
    if "T_inc" in signal:
        return float(signal["T_inc"])
    if "sigma2" in signal:
        return h / float(signal["sigma2"])
    raise ValueError("signal needs T_inc (compact) or sigma2 (gaussian)")


# forward steps of 1/h allowed when the estimated switch time is too early
SWITCH_STEPS = 40


def switch_time(h: float, signal: dict, target_tol: float, C: float = 1.0,
                tail_bound: float = 0.0) -> SwitchTime:
    """``t* = onset + log(C/target_tol)/h``, clamped at the onset."""
    onset = onset_time(h, signal)
    if target_tol <= tail_bound:
        log.warning("target %.1e below the band tail bound %.1e: asymptotic floor", target_tol, tail_bound)
        return SwitchTime(math.inf, onset, C, False, tail_bound)
    if C <= 0:
        return SwitchTime(onset, onset, C, True, tail_bound)
    ts = onset + max(0.0, math.log(C / target_tol)) / h
    return SwitchTime(ts, onset, C, True, tail_bound)


def eps2(I2_vals, poles, residues, A, t) -> np.ndarray:
    """``|I2 + sum_n i c_n A(rho_n) e^{-i rho_n t}|``."""
    return np.abs(np.asarray(I2_vals) - I2_asymptotic(poles, residues, A, t).reshape(np.shape(I2_vals)))


@dataclass
class I2Result:
    values: np.ndarray  # (T, P)
    switch: SwitchTime
    mismatch: float
    n_quadrature: int
    n_asymptotic: int


def _quad_series(poles, residues, A, ts, W1, W2, n_cheb, workers=1):
    res = np.asarray(residues, complex).reshape(len(poles), -1)
    out = np.zeros((ts.size, res.shape[1]), complex)
    if ts.size == 0:
        return out

    def one(n):
        return I2_quadrature(A, poles[n], ts, W1, W2, n_cheb)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            g = list(ex.map(one, range(len(poles))))
    else:
        g = [one(n) for n in range(len(poles))]
    # fixed reduction order
    for n in range(len(poles)):
        out += np.outer(g[n], res[n])
    return out / (2 * np.pi)


def I2(poles, residues, A, t_grid, band, tol: float = 1e-10, h: float | None = None,
       signal: dict | None = None, n_cheb: int = N_CHEB, asymptotic: bool = True,
       tail_bound: float = 0.0, workers: int = 1) -> I2Result:
    """Singular part on ``t_grid`` with an automatic quadrature/asymptotic switch.

    The decay constant ``C`` of ``eps2(t) ~ C exp(-h (t - onset))`` is measured
    once at ``onset + 5/h``.  Both branches are compared at ``t*``, which moves
    later in steps of ``1/h`` until they agree to ``tol``; a remaining mismatch
    above ``10 tol`` raises :class:`BranchMismatchError`.
    """
    poles = np.asarray(poles, complex).ravel()
    ts = np.atleast_1d(np.asarray(t_grid, float))
    W1, W2 = map(float, band)
    P = 1 if poles.size == 0 else np.asarray(residues).reshape(poles.size, -1).shape[1]
    if poles.size == 0:
        return I2Result(np.zeros((ts.size, P), complex), SwitchTime(math.inf, math.inf, 0.0), 0.0, 0, 0)
    res = np.asarray(residues, complex).reshape(poles.size, -1)
    if not asymptotic or h is None or signal is None:
        vals = _quad_series(poles, res, A, ts, W1, W2, n_cheb, workers)
        return I2Result(vals, SwitchTime(math.inf, math.inf, 0.0), 0.0, ts.size, 0)
    onset = onset_time(h, signal)
    tc = onset + 5.0 / h
    probe = _quad_series(poles, res, A, np.array([tc]), W1, W2, n_cheb)
    e = float(eps2(probe, poles, res, A, np.array([tc])).max())
    C = e * math.exp(h * (tc - onset))
    sw = switch_time(h, signal, tol, C, tail_bound)
    mismatch = 0.0
    if math.isfinite(sw.t_star):
        # the estimate assumes decay at rate h from the onset; faster early decay
        # underestimates C, so step t* forward until the branches agree
        t_star = sw.t_star
        for _ in range(SWITCH_STEPS + 1):
            tq = np.array([t_star])
            q = _quad_series(poles, res, A, tq, W1, W2, n_cheb)
            mismatch = float(np.abs(q - I2_asymptotic(poles, res, A, tq)).max())
            if mismatch <= tol:
                break
            t_star += 1.0 / h
        if t_star != sw.t_star:
            log.info("I2 switch moved from t*=%.4g to %.4g", sw.t_star, t_star)
            sw = SwitchTime(t_star, sw.onset, sw.constant, sw.reachable, sw.floor)
        log.info("I2 branch switch at t*=%.4g: |quad - asym| = %.2e", sw.t_star, mismatch)
        if mismatch > 10 * tol:
            # name the resonance contributing most at t*
            contrib = [abs(I2_quadrature(A, p, sw.t_star, W1, W2, n_cheb) / (2 * np.pi)
                           + 1j * complex(np.asarray(_as_spectrum(A)(np.array([p])))[0])
                           * np.exp(-1j * p * sw.t_star)) * np.abs(res[k]).max()
                       for k, p in enumerate(poles)]
            worst = poles[int(np.argmax(contrib))]
            raise BranchMismatchError(f"I2 branches disagree by {mismatch:.2e} at t*={sw.t_star:.4g}; "
                                      f"worst resonance {worst}")
    early = ts < sw.t_star
    out = np.empty((ts.size, P), complex)
    out[early] = _quad_series(poles, res, A, ts[early], W1, W2, n_cheb, workers)
    out[~early] = I2_asymptotic(poles, res, A, ts[~early])
    return I2Result(out, sw, mismatch, int(early.sum()), int((~early).sum()))


def fit_log_slope(t, y, t_min: float, min_samples: int = 10, floor: float | None = None):
    """Least-squares slope of ``log y`` for ``t >= t_min``; None when too few samples.

    Samples at or below ``floor`` are dropped; by default the floor sits at
    ``1000 eps max(y)``, where the series reaches its roundoff plateau.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if floor is None:
        floor = max(1e3 * np.finfo(float).eps * (y.max() if y.size else 0.0), 1e-300)
    sel = (t >= t_min) & (y > floor)
    if sel.sum() < min_samples:
        return None
    return float(np.polyfit(t[sel], np.log(y[sel]), 1)[0])


def write_decay_csv(path, t, I1, I2v, e2) -> None:
    """Columns: t, Re I1, Im I1, Re I2, Im I2, eps2 (one observation point)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re_I1", "im_I1", "re_I2", "im_I2", "eps2"])
        for row in zip(t, I1, I2v, e2):
            w.writerow([repr(float(row[0])), repr(float(np.real(row[1]))), repr(float(np.imag(row[1]))),
                        repr(float(np.real(row[2]))), repr(float(np.imag(row[2]))), repr(float(row[3]))])
