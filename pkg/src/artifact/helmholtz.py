"""Frequency-domain boundary integral equations.

Closed curves use the combined-field operator

    C_{w,eta} psi = psi/2 + K_w psi - i eta S_w psi

discretized with the Martensen-Kussmaul log splitting; open arcs use the
single-layer operator in the cosine variable, ``phi = psi/sqrt(1 - t^2)``,
with the log kernel integrated exactly against cosine modes.
"""

from __future__ import annotations

import logging
import struct
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from . import kernels
from .geometry import BoundaryDiscretization
from .special import hankel_h0

log = logging.getLogger(__name__)

SINGLE_LAYER_ARC = "single-layer-arc"
COMBINED_FIELD = "combined-field"


class SingularOperatorError(RuntimeError):
    """Raised when a boundary operator is numerically singular at ``omega``."""

    def __init__(self, omega, rcond):
        super().__init__(f"boundary operator numerically singular at omega={omega!r} "
                         f"(rcond={rcond:.3e}); near-resonant frequency or eta misuse")
        self.omega = omega
        self.rcond = rcond


class NearFieldError(ValueError):
    """Observation point too close to the boundary for the smooth quadrature."""


def green(omega: complex, r, rp, c: float = 1.0) -> complex:
    """Free-space Green function ``(i/4) H0((omega/c)|r - r'|)``."""
    if omega == 0:
        raise ValueError("green is undefined at omega = 0")
    d = float(np.hypot(r[0] - rp[0], r[1] - rp[1]))
    if d == 0.0:
        raise ValueError("green is singular at coincident points")
    return complex(0.25j * hankel_h0(complex(omega) / c * d))


def default_eta(omega: float) -> float:
    """Coupling ``-sign(w) * max(1, |w|)``."""
    w = float(np.real(omega))
    return -np.sign(w) * max(1.0, abs(w)) if w != 0 else -1.0


def band_eta(band) -> float:
    """Coupling held fixed over a band: the default rule at its midpoint."""
    return default_eta(0.5 * (band[0] + band[1]))


def plane_wave_trace(disc: BoundaryDiscretization, omega: complex, p, c: float = 1.0) -> np.ndarray:
    """Boundary values ``exp(i (omega/c) p.r_i)``."""
    p = np.asarray(p, float)
    if abs(np.hypot(*p) - 1) > 1e-12:
        raise ValueError("incidence direction must be a unit vector")
    return np.exp(1j * (omega / c) * (disc.nodes @ p))


@lru_cache(maxsize=32)
def _closed_tables(N: int):
    n = N // 2
    m = np.arange(N)
    l = np.arange(1, n)
    R = -(2 * np.pi / n) * (np.cos(np.outer(m, l) * np.pi / n) / l).sum(axis=1)
    R -= (np.pi / n ** 2) * np.cos(np.pi * m)
    lg = np.zeros(N)
    lg[1:] = np.log(4 * np.sin(np.pi * m[1:] / N) ** 2)
    R.setflags(write=False)
    lg.setflags(write=False)
    return R, lg


@lru_cache(maxsize=32)
def _arc_tables(N: int):
    theta = np.pi * (2 * np.arange(N) + 1) / (2 * N)
    n = np.arange(N)
    lam = np.empty(N)
    lam[0] = -np.pi * np.log(2) * 0.5
    lam[1:] = -np.pi / n[1:]
    C = np.cos(np.outer(n, theta))
    W = C.T @ ((lam * 2 / N)[:, None] * C)
    t = np.cos(theta)
    diff = np.abs(t[:, None] - t[None, :])
    np.fill_diagonal(diff, 1.0)
    lnc = np.log(diff)
    for a in (W, lnc):
        a.setflags(write=False)
    return np.ascontiguousarray(W), np.ascontiguousarray(lnc)


@dataclass(eq=False)
class OperatorMatrix:
    """Dense discretized boundary operator at one frequency.

    For closed curves ``matrix`` represents ``C_{w,eta}`` and the blocks
    ``K`` and ``S`` satisfy ``matrix = (I + K - 1j*eta*S)/2``. For arcs
    ``matrix`` represents ``S^arc_w`` acting on nodal ``psi`` values.
    """

    omega: complex
    eta: float | None
    matrix: np.ndarray
    kind: str
    K: np.ndarray | None = None
    S: np.ndarray | None = None
    _lu: tuple | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def factorized(self) -> bool:
        return self._lu is not None

    def factorize(self, check: bool = True):
        with self._lock:
            if self._lu is None:
                lu, piv = sla.lu_factor(self.matrix, check_finite=False)
                if check:
                    anorm = np.linalg.norm(self.matrix, 1)
                    rcond, info = sla.lapack.zgecon(lu, anorm, norm="1")
                    if rcond < np.finfo(float).eps:
                        raise SingularOperatorError(self.omega, rcond)
                self._lu = (lu, piv)
        return self._lu

    def rcond(self) -> float:
        lu, _ = self.factorize(check=False)
        rc, _ = sla.lapack.zgecon(lu, np.linalg.norm(self.matrix, 1), norm="1")
        return float(rc)


@dataclass(frozen=True)
class DensityVector:
    values: np.ndarray
    omega: complex
    direction: tuple | None = None
    backward_error: float = 0.0


def assemble_closed(disc: BoundaryDiscretization, omega: complex, eta: float,
                    c: float = 1.0) -> OperatorMatrix:
    """Combined-field matrix on a closed-curve discretization."""
    if not disc.closed:
        raise TypeError("assemble_closed requires a closed-curve discretization")
    if omega == 0:
        raise ValueError("omega = 0 is excluded from every solve")
    k = complex(omega) / c
    R, lg = _closed_tables(disc.N)
    K, S = kernels.closed_blocks(np.ascontiguousarray(disc.nodes), np.ascontiguousarray(disc.d1),
                                 np.ascontiguousarray(disc.d2), k, R, lg)
    A = K - 1j * eta * S
    A[np.diag_indices_from(A)] += 1.0
    return OperatorMatrix(complex(omega), float(eta), 0.5 * A, "closed", K, S)


def assemble_arc(disc: BoundaryDiscretization, omega: complex, c: float = 1.0) -> OperatorMatrix:
    """Single-layer matrix on one or more open arcs (cosine variable)."""
    if disc.closed:
        raise TypeError("assemble_arc requires an open-arc discretization")
    if omega == 0:
        raise ValueError("omega = 0 is excluded from every solve")
    k = complex(omega) / c
    Mtx = np.empty((disc.N, disc.N), dtype=complex)
    for a in disc.segments:
        na = a.stop - a.start
        W, lnc = _arc_tables(na)
        Mtx[a, a] = kernels.arc_matrix(np.ascontiguousarray(disc.nodes[a]),
                                       np.ascontiguousarray(disc.jacobians[a]), lnc, W, k)
        for b in disc.segments:
            if b == a:
                continue
            nb = b.stop - b.start
            d = np.hypot(disc.nodes[a, None, 0] - disc.nodes[None, b, 0],
                         disc.nodes[a, None, 1] - disc.nodes[None, b, 1])
            h0, _ = kernels.hankel01(k, np.ascontiguousarray(d))
            Mtx[a, b] = (np.pi / nb) * 0.25j * h0 * disc.jacobians[b][None, :]
    return OperatorMatrix(complex(omega), None, Mtx, "arc")


def assemble(disc: BoundaryDiscretization, omega: complex, eta: float | None = None,
             c: float = 1.0) -> OperatorMatrix:
    if disc.closed:
        return assemble_closed(disc, omega, default_eta(omega) if eta is None else eta, c)
    return assemble_arc(disc, omega, c)


def solve_density(op: OperatorMatrix, rhs, direction=None) -> DensityVector:
    """Solve ``op psi = rhs`` by cached LU with one refinement step if needed."""
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape[0] != op.N:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match operator size {op.N}")
    lu = op.factorize()
    psi = sla.lu_solve(lu, rhs, check_finite=False)
    berr = _backward_error(op.matrix, psi, rhs)
    if berr > 1e-13:
        psi = psi + sla.lu_solve(lu, rhs - op.matrix @ psi, check_finite=False)
        berr = _backward_error(op.matrix, psi, rhs)
    return DensityVector(psi, op.omega, None if direction is None else tuple(direction), berr)


def _backward_error(A, x, b) -> float:
    r = A @ x - b
    den = np.linalg.norm(A, np.inf) * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf)
    return float(np.linalg.norm(r, np.inf) / den) if den > 0 else 0.0


def _inside_closed(disc: BoundaryDiscretization, pts: np.ndarray) -> np.ndarray:
    """Winding-number test against the node polygon."""
    v = disc.nodes
    w = np.roll(v, -1, axis=0)
    a = np.arctan2(v[None, :, 1] - pts[:, None, 1], v[None, :, 0] - pts[:, None, 0])
    b = np.arctan2(w[None, :, 1] - pts[:, None, 1], w[None, :, 0] - pts[:, None, 0])
    d = np.angle(np.exp(1j * (b - a)))
    return np.abs(d.sum(axis=1)) > np.pi


def check_points(disc: BoundaryDiscretization, points, cutoff: float | None = None) -> np.ndarray:
    """Validate observation points; return them as an ``(P, 2)`` array."""
    pts = np.atleast_2d(np.asarray(points, float))
    if cutoff is None:
        cutoff = 0.05 * _diameter(disc)
    dist = np.hypot(pts[:, None, 0] - disc.nodes[None, :, 0], pts[:, None, 1] - disc.nodes[None, :, 1])
    near = dist.min(axis=1) < cutoff
    if np.any(near):
        raise NearFieldError(f"{int(near.sum())} point(s) within the near-field band "
                             f"({cutoff:.3g}); use finer N or a dedicated near-field rule")
    if disc.closed and np.any(_inside_closed(disc, pts)):
        raise NearFieldError("observation point inside the obstacle")
    return pts


def _diameter(disc) -> float:
    lo, hi = disc.nodes.min(axis=0), disc.nodes.max(axis=0)
    return float(np.hypot(*(hi - lo)))


def potential_matrix(disc: BoundaryDiscretization, omega: complex, points, eta: float | None = None,
                     c: float = 1.0, cutoff: float | None = None, check: bool = True) -> np.ndarray:
    """Matrix ``P`` with ``U(points) = P @ psi`` for the solver's representation."""
    pts = check_points(disc, points, cutoff) if check else np.atleast_2d(np.asarray(points, float))
    k = complex(omega) / c
    ex = pts[:, None, 0] - disc.nodes[None, :, 0]
    ey = pts[:, None, 1] - disc.nodes[None, :, 1]
    r = np.ascontiguousarray(np.hypot(ex, ey))
    h0, h1 = kernels.hankel01(k, r)
    if disc.closed:
        if eta is None:
            raise ValueError("combined-field potential needs eta")
        w = (2 * np.pi / disc.N) * disc.jacobians
        nu = disc.normals
        dphi = 0.25j * k * h1 * (nu[None, :, 0] * ex + nu[None, :, 1] * ey) / r
        return (dphi - 1j * eta * 0.25j * h0) * w[None, :]
    P = np.empty(r.shape, dtype=complex)
    for seg in disc.segments:
        n = seg.stop - seg.start
        P[:, seg] = (np.pi / n) * 0.25j * h0[:, seg] * disc.jacobians[seg][None, :]
    return P


def eval_potential(disc: BoundaryDiscretization, psi, omega: complex, points,
                   representation: str | None = None, eta: float | None = None,
                   c: float = 1.0, cutoff: float | None = None) -> np.ndarray:
    """Field ``U(r, omega)`` at exterior points from a boundary density."""
    rep = representation or (COMBINED_FIELD if disc.closed else SINGLE_LAYER_ARC)
    if (rep == COMBINED_FIELD) != disc.closed:
        raise ValueError(f"representation {rep!r} does not match the curve topology")
    vals = psi.values if isinstance(psi, DensityVector) else np.asarray(psi)
    return potential_matrix(disc, omega, points, eta, c, cutoff) @ vals


def dump_operator(op: OperatorMatrix, path) -> None:
    """Write ``op`` as little-endian: int64 N, complex128 omega, float64 eta, row-major entries."""
    eta = np.nan if op.eta is None else op.eta
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q2dd", op.N, op.omega.real, op.omega.imag, eta))
        fh.write(np.ascontiguousarray(op.matrix, dtype="<c16").tobytes())


def load_operator(path) -> tuple[np.ndarray, complex, float]:
    with open(path, "rb") as fh:
        N, wr, wi, eta = struct.unpack("<q2dd", fh.read(32))
        M = np.frombuffer(fh.read(), dtype="<c16").reshape(N, N)
    return M, complex(wr, wi), eta


@dataclass
class SolveCounters:
    factorizations: int = 0
    solves: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, fact: int = 0, solves: int = 0):
        with self._lock:
            self.factorizations += fact
            self.solves += solves

    def snapshot(self) -> dict:
        return {"factorizations": self.factorizations, "solves": self.solves}


@dataclass(eq=False)
class DensitySolver:
    """Per-frequency density solver for one scatterer and incidence direction.

    Calling the solver at real ``omega`` returns the nodal density vector.
    Negative frequencies are obtained from the symmetry
    ``psi(-w) = conj(psi(w))`` of real-valued time-domain data.
    """

    disc: BoundaryDiscretization
    direction: tuple = (1.0, 0.0)
    eta: float | None = None
    c: float = 1.0
    counters: SolveCounters = field(default_factory=SolveCounters)

    def operator(self, omega: complex) -> OperatorMatrix:
        eta = None
        if self.disc.closed:
            eta = default_eta(omega) if self.eta is None else self.eta
        return assemble(self.disc, omega, eta, self.c)

    def eta_at(self, omega) -> float | None:
        if not self.disc.closed:
            return None
        return default_eta(omega) if self.eta is None else self.eta

    def __call__(self, omega: float) -> np.ndarray:
        w = float(omega)
        if w < 0:
            return np.conj(self._solve(-w))
        return self._solve(w)

    def solve_complex(self, omega: complex) -> np.ndarray:
        """Density at complex ``omega`` (continued right-hand side); used by oracles."""
        op = self.operator(omega)
        rhs = plane_wave_trace(self.disc, omega, self.direction, self.c)
        self.counters.add(fact=1, solves=1)
        return solve_density(op, rhs, self.direction).values

    def _solve(self, w: float) -> np.ndarray:
        op = self.operator(w)
        rhs = plane_wave_trace(self.disc, w, self.direction, self.c)
        dens = solve_density(op, rhs, self.direction)
        self.counters.add(fact=1, solves=1)
        return dens.values

    def potential(self, omega: complex, points, cutoff: float | None = None) -> np.ndarray:
        return potential_matrix(self.disc, omega, points, self.eta_at(omega), self.c, cutoff)
