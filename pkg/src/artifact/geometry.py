"""Boundary curves and their Nystrom discretizations.

Closed curves are parametrized on ``[0, 2*pi)`` and traversed
counterclockwise, so ``(y', -x')`` is an outward normal. Open arcs are
parametrized on ``[-1, 1]`` and sampled at interior Chebyshev angles
``theta_j = pi*(2j+1)/(2N)``, ``t_j = cos(theta_j)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

log = logging.getLogger(__name__)

CLOSED = "closed-analytic"
OPEN = "open-arc"

# excluded parameter interval of the open rocket
ROCKET_GAP = (5.338, 5.427)
_ROCKET_COEFFS = {0: 0.35, 1: 0.1, 2: 0.12, 3: 0.15, 4: 0.1, 6: 0.1, 8: 0.05}

Map = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Curve:
    """A single smooth boundary piece.

    ``position``, ``derivative`` and ``second_derivative`` map a parameter
    array of shape ``(n,)`` to an array of shape ``(n, 2)``.
    """

    kind: str
    position: Map
    derivative: Map
    second_derivative: Map
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def parameter_domain(self) -> tuple[float, float]:
        return (0.0, 2 * math.pi) if self.kind == CLOSED else (-1.0, 1.0)

    @property
    def closed(self) -> bool:
        return self.kind == CLOSED

    def arclength(self, **quad_kw) -> float:
        """Arclength by adaptive quadrature (reference for the trapezoid rule)."""
        a, b = self.parameter_domain
        speed = lambda s: float(np.hypot(*self.derivative(np.array([s]))[0]))
        quad_kw.setdefault("epsabs", 1e-14)
        quad_kw.setdefault("epsrel", 1e-14)
        quad_kw.setdefault("limit", 500)
        val, _ = integrate.quad(speed, a, b, **quad_kw)
        return val

    def diameter(self, n: int = 512) -> float:
        a, b = self.parameter_domain
        p = self.position(np.linspace(a, b, n))
        lo, hi = p.min(axis=0), p.max(axis=0)
        return float(np.hypot(*(hi - lo)))


@dataclass(frozen=True)
class CurveSet:
    """Several disjoint open arcs treated as one scatterer."""

    pieces: tuple[Curve, ...]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return OPEN

    @property
    def closed(self) -> bool:
        return False

    def diameter(self, n: int = 512) -> float:
        pts = np.vstack([c.position(np.linspace(-1, 1, n)) for c in self.pieces])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        return float(np.hypot(*(hi - lo)))


@dataclass(frozen=True, eq=False)
class BoundaryDiscretization:
    """Quadrature-ready sampling of a curve.

    Attributes
    ----------
    nodes : (N, 2) array
    params : (N,) array
        Parameter values (``s`` for closed curves, ``t`` for arcs).
    jacobians : (N,) array
        ``|gamma'(s_i)|`` with respect to the stored parameter.
    normals : (N, 2) array or None
        Unit outward normals (closed curves only).
    d1, d2 : (N, 2) arrays
        First and second parametric derivatives at the nodes.
    segments : tuple of slices
        Node ranges of the individual arcs for multi-piece scatterers.
    """

    kind: str
    nodes: np.ndarray
    params: np.ndarray
    jacobians: np.ndarray
    normals: np.ndarray | None
    d1: np.ndarray
    d2: np.ndarray
    segments: tuple
    curve: object = None

    @property
    def N(self) -> int:
        return self.nodes.shape[0]

    @property
    def closed(self) -> bool:
        return self.kind == CLOSED

    def l2_weights(self) -> np.ndarray:
        """Weights for ``||f||_{L2(Gamma)}^2 ~ sum_i w_i |f_i|^2``.

        For arcs the density is the smooth factor ``psi`` and Fejer's first
        rule integrates in ``t`` on the Chebyshev nodes.
        """
        if self.closed:
            return (2 * np.pi / self.N) * self.jacobians
        w = np.empty(self.N)
        for seg in self.segments:
            w[seg] = _fejer_weights(seg.stop - seg.start) * self.jacobians[seg]
        return w


def _fejer_weights(n: int) -> np.ndarray:
    """Fejer's first rule on ``t_j = cos(pi(2j+1)/(2n))`` for ``int_{-1}^{1} f dt``."""
    theta = np.pi * (2 * np.arange(n) + 1) / (2 * n)
    k = np.arange(1, n // 2 + 1)
    s = (np.cos(2 * np.outer(theta, k)) / (4 * k * k - 1)).sum(axis=1)
    return (2.0 / n) * (1 - 2 * s)


def _closed(name, pos, d1, d2, **params) -> Curve:
    return Curve(CLOSED, pos, d1, d2, name=name, params=params)


def _stack(x, y):
    return np.stack([np.asarray(x, float), np.asarray(y, float)], axis=-1)


def unit_circle(radius: float = 1.0) -> Curve:
    R = float(radius)
    return _closed(
        "unit-circle",
        lambda s: _stack(R * np.cos(s), R * np.sin(s)),
        lambda s: _stack(-R * np.sin(s), R * np.cos(s)),
        lambda s: _stack(-R * np.cos(s), -R * np.sin(s)),
        radius=R,
    )


def circular_arc(radius: float = 1.0, aperture: float = 1.25) -> Curve:
    """Circle with an opening of ``aperture`` radians centred on the -y axis."""
    if not 0 < aperture < 2 * math.pi:
        raise ValueError(f"aperture must lie in (0, 2*pi), got {aperture}")
    R = float(radius)
    c = math.pi - aperture / 2
    phi = lambda t: math.pi / 2 + c * t
    return Curve(
        OPEN,
        lambda t: _stack(R * np.cos(phi(t)), R * np.sin(phi(t))),
        lambda t: _stack(-R * c * np.sin(phi(t)), R * c * np.cos(phi(t))),
        lambda t: _stack(-R * c * c * np.cos(phi(t)), -R * c * c * np.sin(phi(t))),
        name="circular-arc",
        params={"radius": R, "aperture": float(aperture)},
    )


def _radial(s, coeffs):
    C = sum(a * np.cos(m * s) for m, a in coeffs.items())
    dC = sum(-m * a * np.sin(m * s) for m, a in coeffs.items())
    ddC = sum(-m * m * a * np.cos(m * s) for m, a in coeffs.items())
    return C, dC, ddC


def _radial_maps(coeffs, s_of, ds):
    """Position maps of ``C(s)(cos s, sin s)`` with ``s = s_of(u)``, ``ds/du`` const."""

    def pos(u):
        s = s_of(u)
        C, _, _ = _radial(s, coeffs)
        return _stack(C * np.cos(s), C * np.sin(s))

    def d1(u):
        s = s_of(u)
        C, dC, _ = _radial(s, coeffs)
        return ds * _stack(dC * np.cos(s) - C * np.sin(s), dC * np.sin(s) + C * np.cos(s))

    def d2(u):
        s = s_of(u)
        C, dC, ddC = _radial(s, coeffs)
        x = ddC * np.cos(s) - 2 * dC * np.sin(s) - C * np.cos(s)
        y = ddC * np.sin(s) + 2 * dC * np.cos(s) - C * np.sin(s)
        return ds * ds * _stack(x, y)

    return pos, d1, d2


def rocket(open_: bool = False, gap: Sequence[float] = ROCKET_GAP) -> Curve:
    """Rocket-shaped curve of radius ``C(s)``; the open variant drops ``gap``."""
    if not open_:
        pos, d1, d2 = _radial_maps(_ROCKET_COEFFS, lambda s: s, 1.0)
        return _closed("rocket", pos, d1, d2, open=False)
    g0, g1 = float(gap[0]), float(gap[1])
    if not g0 < g1 < g0 + 2 * math.pi:
        raise ValueError("rocket gap must be a proper sub-interval")
    sa, sb = g1, g0 + 2 * math.pi
    half = (sb - sa) / 2
    pos, d1, d2 = _radial_maps(_ROCKET_COEFFS, lambda t: sa + (t + 1) * half, half)
    return Curve(OPEN, pos, d1, d2, name="rocket", params={"open": True, "gap": [g0, g1]})


def cavity(beta: float = 0.85 * math.pi, delta: float = 0.15) -> Curve:
    """Smooth closed C-shaped cavity opening toward -y.

    ``phi(u) = pi/2 + beta*sin(u)``, ``rho(u) = 1 + delta*cos(u)``; the
    mouth angle is ``2*pi - 2*beta`` and the wall half-thickness ``delta``.
    """
    b, d = float(beta), float(delta)
    if not (0 < b < math.pi and 0 < d < 0.5):
        raise ValueError("cavity requires 0 < beta < pi and 0 < delta < 0.5")

    def parts(u):
        phi = math.pi / 2 + b * np.sin(u)
        dphi = b * np.cos(u)
        ddphi = -b * np.sin(u)
        rho = 1 + d * np.cos(u)
        drho = -d * np.sin(u)
        ddrho = -d * np.cos(u)
        return phi, dphi, ddphi, rho, drho, ddrho

    def pos(u):
        phi, _, _, rho, _, _ = parts(u)
        return _stack(rho * np.cos(phi), rho * np.sin(phi))

    def d1(u):
        phi, dphi, _, rho, drho, _ = parts(u)
        return _stack(drho * np.cos(phi) - rho * dphi * np.sin(phi),
                      drho * np.sin(phi) + rho * dphi * np.cos(phi))

    def d2(u):
        phi, dphi, ddphi, rho, drho, ddrho = parts(u)
        c, s = np.cos(phi), np.sin(phi)
        x = ddrho * c - 2 * drho * dphi * s - rho * ddphi * s - rho * dphi ** 2 * c
        y = ddrho * s + 2 * drho * dphi * c + rho * ddphi * c - rho * dphi ** 2 * s
        return _stack(x, y)

    return _closed("cavity", pos, d1, d2, beta=b, delta=d)


def _parabola(sign: float, half_width: float) -> Curve:
    """``y = sign*(1 - x^2/4)`` for ``x`` in ``[-w, w]``; focus at the origin."""
    w = float(half_width)
    return Curve(
        OPEN,
        lambda t: _stack(w * t, sign * (1 - (w * t) ** 2 / 4)),
        lambda t: _stack(np.full_like(np.asarray(t, float), w), -sign * w * w * np.asarray(t) / 2),
        lambda t: _stack(np.zeros_like(np.asarray(t, float)),
                         np.full_like(np.asarray(t, float), -sign * w * w / 2)),
        name="parabola",
        params={"sign": sign, "half_width": w},
    )


def parabolic_mirror_pair(half_width: float = 1.5) -> CurveSet:
    """Two confocal parabolic mirrors facing each other across the origin."""
    return CurveSet((_parabola(1.0, half_width), _parabola(-1.0, half_width)),
                    name="parabolic-mirror-pair", params={"half_width": float(half_width)})


def fourier_curve(coeffs: np.ndarray) -> Curve:
    """Closed curve from rows ``(m, ax_m, bx_m, ay_m, by_m)``.

    ``x(s) = sum_m ax_m cos(m s) + bx_m sin(m s)`` and likewise for ``y``.
    """
    c = np.atleast_2d(np.asarray(coeffs, float))
    if c.shape[1] != 5:
        raise ValueError("Fourier coefficient rows must have 5 columns")
    m = c[:, 0][None, :]
    ax, bx, ay, by = (c[:, i][None, :] for i in range(1, 5))

    def ev(s, order):
        s = np.asarray(s, float)[:, None]
        ms = m * s
        cs, sn = np.cos(ms), np.sin(ms)
        if order == 0:
            fx, fy = ax * cs + bx * sn, ay * cs + by * sn
        elif order == 1:
            fx, fy = m * (-ax * sn + bx * cs), m * (-ay * sn + by * cs)
        else:
            fx, fy = -m * m * (ax * cs + bx * sn), -m * m * (ay * cs + by * sn)
        return _stack(fx.sum(axis=1), fy.sum(axis=1))

    return _closed("fourier", lambda s: ev(s, 0), lambda s: ev(s, 1), lambda s: ev(s, 2))


def load_fourier_curve(path: str) -> Curve:
    return fourier_curve(np.loadtxt(path, comments="#", ndmin=2))


_BUILTINS = {
    "unit-circle": unit_circle,
    "circular-arc": circular_arc,
    "rocket": rocket,
    "cavity": cavity,
    "parabolic-mirror-pair": parabolic_mirror_pair,
}


def make_curve(kind: str, **params):
    """Build a named builtin curve.

    Parameters
    ----------
    kind : str
        One of ``unit-circle``, ``circular-arc``, ``rocket``, ``cavity``,
        ``parabolic-mirror-pair``.
    **params
        Shape parameters. ``rocket`` accepts ``open`` and ``gap``.
    """
    if kind not in _BUILTINS:
        raise ValueError(f"unknown builtin curve {kind!r}; choose from {sorted(_BUILTINS)}")
    if kind == "rocket":
        return rocket(open_=bool(params.get("open", False)), gap=params.get("gap", ROCKET_GAP))
    return _BUILTINS[kind](**params)


def _discretize_closed(curve: Curve, N: int) -> BoundaryDiscretization:
    if N % 2:
        raise ValueError("closed curves need an even number of nodes")
    s = 2 * np.pi * np.arange(N) / N
    x, d1, d2 = curve.position(s), curve.derivative(s), curve.second_derivative(s)
    jac = np.hypot(d1[:, 0], d1[:, 1])
    normals = np.stack([d1[:, 1], -d1[:, 0]], axis=1) / jac[:, None]
    return BoundaryDiscretization(CLOSED, x, s, jac, normals, d1, d2, (slice(0, N),), curve)


def _arc_nodes(curve: Curve, N: int):
    theta = np.pi * (2 * np.arange(N) + 1) / (2 * N)
    t = np.cos(theta)
    return t, curve.position(t), curve.derivative(t), curve.second_derivative(t)


def discretize(curve, N: int) -> BoundaryDiscretization:
    """Sample ``curve`` with ``N`` nodes.

    Closed curves use equispaced ``s_i = 2*pi*i/N``; open arcs use the
    cosine layout. For a ``CurveSet`` each piece receives ``N`` nodes.
    """
    N = int(N)
    if N < 4:
        raise ValueError("N must be at least 4")
    if N < 16:
        warnings.warn(f"N={N} is likely too small to resolve the curve", stacklevel=2)
    if isinstance(curve, Curve) and curve.closed:
        return _discretize_closed(curve, N)
    pieces = curve.pieces if isinstance(curve, CurveSet) else (curve,)
    ts, xs, d1s, d2s, segs = [], [], [], [], []
    for j, c in enumerate(pieces):
        t, x, d1, d2 = _arc_nodes(c, N)
        ts.append(t), xs.append(x), d1s.append(d1), d2s.append(d2)
        segs.append(slice(j * N, (j + 1) * N))
    d1 = np.vstack(d1s)
    jac = np.hypot(d1[:, 0], d1[:, 1])
    return BoundaryDiscretization(OPEN, np.vstack(xs), np.concatenate(ts), jac, None,
                                  d1, np.vstack(d2s), tuple(segs), curve)
