"""Incidence-excited resonance search and residue machinery.

The adaptive IE search fits randomly sketched vector AAA approximants to
real-frequency boundary densities on a bisected frequency interval and
keeps the approximant poles that fall in the box below each subinterval.
A simplified random-excitation (RE) search on box boundaries serves as an
independent cross-check.
"""

from __future__ import annotations

import csv
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import rational
from .geometry import BoundaryDiscretization
from .helmholtz import eval_potential
from .rational import RationalApproximant

log = logging.getLogger(__name__)

DEFAULT_J = 200
DEFAULT_TOL = 1e-10
DEFAULT_M_MAX = 100
DEFAULT_ELL = 4
MERGE_TOL = 1e-8
EDGE_OVERLAP = 1e-6
FAST_PATH_BUDGET = 200


class DepthLimitError(RuntimeError):
    """Recursion depth exceeded; ``partial`` holds what was found so far."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class ResidueContourError(RuntimeError):
    """Another pole stays inside the residue contour after all shrink steps."""


@dataclass(frozen=True)
class SearchBox:
    """``{Re w in [W1, W2], Im w in [-h, 0]}``."""

    W1: float
    W2: float
    h: float

    def __post_init__(self):
        if not self.W1 < self.W2:
            raise ValueError(f"empty interval [{self.W1}, {self.W2}]")
        if not self.h > 0:
            raise ValueError("box depth must be positive")

    def contains(self, z, strict_top: bool = True) -> np.ndarray:
        z = np.asarray(z, complex)
        top = z.imag < 0 if strict_top else z.imag <= 0
        return (z.real >= self.W1) & (z.real <= self.W2) & (z.imag >= -self.h) & top


@dataclass
class ResonancePair:
    pole: complex
    density_residue: np.ndarray
    relevance: float
    interval_id: int = 0
    spatial_residues: np.ndarray | None = None
    points: np.ndarray | None = None

    @property
    def l2_norm(self) -> float:
        return self.relevance * abs(self.pole.imag)


class SolveCache:
    """Thread-safe map from frequency to density; keys rounded to 1e-14 relative."""

    def __init__(self):
        self._d: dict = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(w: float) -> float:
        w = float(w)
        if w == 0:
            return 0.0
        return float(np.format_float_positional(w, precision=14, unique=False, fractional=False, trim="k"))

    def get(self, w):
        with self._lock:
            return self._d.get(self.key(w))

    def put(self, w, v):
        with self._lock:
            self._d.setdefault(self.key(w), v)

    def __contains__(self, w):
        with self._lock:
            return self.key(w) in self._d

    def __len__(self):
        return len(self._d)

    def items(self):
        with self._lock:
            return sorted(self._d.items())


def solve_batch(solver: Callable, omegas, cache: SolveCache | None = None, workers: int = 1) -> np.ndarray:
    """Densities at ``omegas`` (rows), reusing ``cache``; order fixed by index."""
    omegas = np.asarray(omegas, float)
    out = [None] * omegas.size
    todo = []
    for i, w in enumerate(omegas):
        v = cache.get(w) if cache is not None else None
        if v is None:
            todo.append(i)
        else:
            out[i] = v
    if todo:
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                res = list(ex.map(lambda i: np.asarray(solver(omegas[i])), todo))
        else:
            res = [np.asarray(solver(omegas[i])) for i in todo]
        for i, v in zip(todo, res):
            out[i] = v
            if cache is not None:
                cache.put(omegas[i], v)
    return np.array(out)


@dataclass
class IEResult:
    """Output of :func:`ie_adaptive`.

    ``partition`` tiles the input interval; ``approximants[l]`` is the fit on
    ``partition[l]``; ``poles`` holds every accepted resonance once.
    """

    partition: list
    approximants: list
    poles: list
    solve_cache: SolveCache
    box: SearchBox
    complete: bool = True
    diagnostics: dict = field(default_factory=dict)

    def approximant_for(self, w: float) -> tuple[int, RationalApproximant]:
        for i, (a, b) in enumerate(self.partition):
            if a <= w <= b:
                return i, self.approximants[i]
        raise ValueError(f"frequency {w} outside the searched interval")

    def density(self, omegas) -> np.ndarray:
        """Densities on arbitrary real frequencies from the approximants (no solves)."""
        omegas = np.atleast_1d(np.asarray(omegas, float))
        out = None
        for i, (a, b) in enumerate(self.partition):
            sel = (omegas >= a) & (omegas <= b)
            if out is not None:
                sel &= ~done
            if not sel.any():
                continue
            vals = self.approximants[i].eval(omegas[sel])
            if out is None:
                out = np.zeros((omegas.size, vals.shape[1]), complex)
                done = np.zeros(omegas.size, bool)
            out[sel] = vals
            done |= sel
        if out is None or not done.all():
            raise ValueError("some frequencies lie outside the searched interval")
        return out

    def pole_array(self) -> np.ndarray:
        return np.array([p.pole for p in self.poles], complex)


def l2_norm(disc: BoundaryDiscretization | None, c: np.ndarray) -> float:
    if disc is None:
        return float(np.linalg.norm(c))
    return float(np.sqrt(np.sum(disc.l2_weights() * np.abs(c) ** 2)))


def relevance_metric(pair: ResonancePair | tuple, disc: BoundaryDiscretization | None = None) -> float:
    """``||c||_{L2(Gamma)} / |Im rho|``; infinite (with a warning) for a real pole."""
    if isinstance(pair, ResonancePair):
        rho, c = pair.pole, pair.density_residue
    else:
        rho, c = pair
    nrm = l2_norm(disc, np.asarray(c))
    if rho.imag == 0:
        log.warning("pole %r on the real axis: check the sign of eta", rho)
        return float("inf")
    return nrm / abs(rho.imag)


def density_residues(R: RationalApproximant, rho: complex, J_C: int = 10, radius: float = 1e-5,
                     other_poles=None, shrink_steps: int = 3) -> np.ndarray:
    """Residue of ``R`` at ``rho`` by the trapezoid rule on ``|w - rho| = radius``.

    The contour shrinks by 10x (up to ``shrink_steps`` times) while another
    pole of ``R`` lies inside it.  When ``rho`` is a root of the denominator
    the integrand ``(w - rho) R(w)`` is evaluated in deflated form, so the
    result does not degrade as the radius shrinks.
    """
    rho = complex(rho)
    if other_poles is None:
        other_poles = rational.poles_and_residues(R).poles
    others = np.asarray(other_poles, complex)
    if others.size:
        others = others[np.abs(others - rho) > 1e-12 * max(1.0, abs(rho))]
    r = radius
    deflate = rational.denominator_root_ok(R, rho)
    for _ in range(shrink_steps + 1):
        if not np.any(np.abs(others - rho) < r):
            th = 2 * np.pi * np.arange(J_C) / J_C
            e = np.exp(1j * th)
            if deflate:
                res = R.eval_deflated(rho + r * e, rho).mean(axis=0)
            else:
                res = (r / J_C) * (e @ R.eval(rho + r * e))
            return res[0] if R.scalar else res
        r /= 10
    raise ResidueContourError(f"another pole stays within {r * 10:.1e} of {rho}")


def direct_residue(f: Callable, rho: complex, J_C: int = 10, radius: float = 1e-5) -> np.ndarray:
    """Residue of an arbitrary meromorphic ``f`` at ``rho`` by the same circle rule."""
    e = np.exp(2j * np.pi * np.arange(J_C) / J_C)
    vals = np.array([np.asarray(f(complex(rho) + radius * z)) for z in e])
    return (radius / J_C) * np.tensordot(e, vals, axes=(0, 0))


def spatial_residues(disc: BoundaryDiscretization, rho: complex, c_hat, points,
                     representation: str | None = None, eta: float | None = None,
                     c: float = 1.0, cutoff: float | None = None) -> np.ndarray:
    """Field residues ``c_n(r)``: the layer potential at ``rho`` of ``c_hat``."""
    return eval_potential(disc, np.asarray(c_hat), rho, points, representation, eta, c, cutoff)


def _merge(pairs: list, partition: list) -> list:
    """Drop duplicates within ``MERGE_TOL``, keeping the pole whose interval holds its real part."""
    kept: list = []
    for p in sorted(pairs, key=lambda q: (q.pole.real, q.pole.imag)):
        dup = [k for k in kept if abs(k.pole - p.pole) < MERGE_TOL]
        if not dup:
            kept.append(p)
            continue
        k = dup[0]
        a, b = partition[p.interval_id]
        if a <= p.pole.real <= b and not (partition[k.interval_id][0] <= k.pole.real <= partition[k.interval_id][1]):
            kept[kept.index(k)] = p
    return kept


def _fit_interval(solver, a, b, J, cache, tol, m_max, ell, seed, workers):
    w = np.linspace(a, b, J)
    F = solve_batch(solver, w, cache, workers)
    meta = {"interval": [a, b], "J": J}
    r = rational.aaa_sketch(w, F, ell=ell, tol=tol, m_max=m_max, seed=seed, meta=meta)
    return w, r


def _recenter(pairs: list, partition: list, cache: SolveCache, tol, m_max, ell, seed, J_C, radius, disc,
              edge: float = 0.25, move_tol: float = 1e-4) -> list:
    """Refit poles that sit near an interior interval edge on a window centred at them.

    AAA pole estimates degrade toward the ends of the fitted interval. The
    window has the width of the pole's interval and uses only cached solves
    from the neighbouring intervals, so no new factorizations occur.
    """
    if len(partition) < 2:
        return pairs
    W1, W2 = partition[0][0], partition[-1][1]
    keys = np.array([k for k, _ in cache.items()])
    out = []
    for p in pairs:
        a, b = partition[p.interval_id]
        L = b - a
        x = p.pole.real
        near = (x - a < edge * L and a > W1) or (b - x < edge * L and b < W2)
        if not near:
            out.append(p)
            continue
        lo, hi = max(W1, x - L / 2), min(W2, x + L / 2)
        sel = keys[(keys >= lo) & (keys <= hi)]
        if sel.size < 16:
            out.append(p)
            continue
        F = np.array([cache.get(w) for w in sel])
        r = rational.cleanup(rational.aaa_sketch(sel, F, ell=ell, tol=tol, m_max=m_max, seed=seed))
        ps = rational.poles_and_residues(r)
        if not r.converged or ps.poles.size == 0:
            out.append(p)
            continue
        i = int(np.argmin(np.abs(ps.poles - p.pole)))
        rho = complex(ps.poles[i])
        if abs(rho - p.pole) > move_tol or not rational.denominator_root_ok(r, rho):
            out.append(p)
            continue
        try:
            c_hat = np.atleast_1d(density_residues(r, rho, J_C, radius, ps.poles))
        except ResidueContourError:
            out.append(p)
            continue
        log.debug("recentred pole %r -> %r", p.pole, rho)
        out.append(ResonancePair(rho, c_hat, relevance_metric((rho, c_hat), disc), p.interval_id))
    return out


def _accept(r: RationalApproximant, box: SearchBox, J_C, radius, drop_tol, disc, iid):
    r = rational.cleanup(r, drop_tol=drop_tol)
    ps = rational.poles_and_residues(r)
    out = []
    scale = np.abs(r._data[2]).max() if r._data is not None else np.abs(r.values).max()
    for rho in ps.poles[box.contains(ps.poles)]:
        if not rational.denominator_root_ok(r, rho):
            log.debug("pole %r fails the denominator-root check", rho)
            continue
        c_hat = density_residues(r, rho, J_C, radius, ps.poles)
        if np.abs(c_hat).max() < drop_tol * scale:
            continue
        out.append(ResonancePair(complex(rho), np.atleast_1d(c_hat),
                                 relevance_metric((complex(rho), np.atleast_1d(c_hat)), disc), iid))
    return r, out


def ie_adaptive(solver: Callable, I, J: int = DEFAULT_J, tol: float = DEFAULT_TOL,
                m_max: int = DEFAULT_M_MAX, h: float = 0.5, ell: int = DEFAULT_ELL, seed: int = 0,
                max_depth: int = 8, disc: BoundaryDiscretization | None = None, J_C: int = 10,
                radius: float = 1e-5, drop_tol: float = 1e-13, budget: int | None = None,
                workers: int = 1, cache: SolveCache | None = None, strict: bool = False) -> IEResult:
    """Adaptive incidence-excited resonance search on the interval ``I``.

    Parameters
    ----------
    solver : callable
        ``solver(w)`` returns the boundary density at real ``w``.
    I : pair
        Frequency interval ``[W1, W2]``.
    J : int
        Equispaced samples per subinterval.
    h : float
        Box depth; poles with ``-h <= Im rho < 0`` are kept.
    budget : int, optional
        Total solve budget. Below 200 a single non-adaptive pass with
        ``m_max = J // 2`` is made.
    strict : bool
        Raise :class:`DepthLimitError` instead of returning a partial result.
    """
    W1, W2 = map(float, I)
    box = SearchBox(W1, W2, h)
    if J < 8:
        raise ValueError("J must be at least 8")
    cache = SolveCache() if cache is None else cache
    fast = budget is not None and budget < FAST_PATH_BUDGET
    if fast:
        m_max = J // 2
        max_depth = 0
    partition, approx, pairs = [], [], []
    complete = True
    stack = [(W1, W2, 0)]
    while stack:
        a, b, depth = stack.pop()
        _, r = _fit_interval(solver, a, b, J, cache, tol, m_max, ell, seed, workers)
        if not r.converged and depth < max_depth:
            mid = 0.5 * (a + b)
            # push right first so intervals come out left to right
            stack.append((mid, b, depth + 1))
            stack.append((a, mid, depth + 1))
            continue
        if not r.converged:
            complete = fast and complete
            if not fast:
                log.warning("AAA did not converge on [%g, %g] at depth limit %d (error %.2e)",
                            a, b, max_depth, r.achieved_error)
                complete = False
        iid = len(partition)
        # a small overlap keeps poles that sit on a bisection point; _merge drops the duplicate
        pad = EDGE_OVERLAP * (b - a)
        sub = SearchBox(a - pad, b + pad, h)
        r, found = _accept(r, sub, J_C, radius, drop_tol, disc, iid)
        partition.append((a, b))
        approx.append(r)
        pairs.extend(found)
    pairs = _recenter(pairs, partition, cache, tol, m_max, ell, seed, J_C, radius, disc)
    pairs = _merge(pairs, partition)
    diag = {"intervals": len(partition), "cached_solves": len(cache), "fast_path": fast,
            "max_error": max(r.achieved_error for r in approx)}
    res = IEResult(partition, approx, pairs, cache, box, complete, diag)
    if not complete and strict:
        raise DepthLimitError("IE recursion depth limit reached", res)
    return res


# ---------------------------------------------------------------------------
# Simplified random-excitation search


def _box_boundary(box, n):
    x0, x1, y0, y1 = box
    s = 0.5 * (1 - np.cos(np.pi * (np.arange(n) + 0.5) / n))
    bottom = x0 + (x1 - x0) * s + 1j * y0
    right = x1 + 1j * (y0 + (y1 - y0) * s)
    top = x1 - (x1 - x0) * s + 1j * y1
    left = x0 + 1j * (y1 - (y1 - y0) * s)
    return np.concatenate([bottom, right, top, left])


def _inside(box, z, margin=0.0):
    x0, x1, y0, y1 = box
    z = np.asarray(z, complex)
    return (z.real > x0 + margin) & (z.real < x1 - margin) & (z.imag > y0 + margin) & (z.imag < y1 - margin)


def _quadrants(box):
    x0, x1, y0, y1 = box
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]


def _same(P, Q, tol):
    if len(P) != len(Q):
        return False
    return all(np.abs(np.asarray(Q) - p).min() < tol for p in P) if len(P) else True


def _tiles(box, aspect):
    """Split a flat box into nearly square tiles (wide boxes defeat a single contour)."""
    x0, x1, y0, y1 = box
    n = max(1, int(math.ceil((x1 - x0) / (aspect * (y1 - y0)) - 1e-12)))
    xs = np.linspace(x0, x1, n + 1)
    return [(xs[i], xs[i + 1], y0, y1) for i in range(n)]


def re_adaptive(family: Callable, box, n_edge: int = 32, tol: float = 1e-10, m_max: int = 100,
                seed: int = 0, max_depth: int = 4, match_tol: float = 1e-6, split_tol: float = 1e-4,
                aspect: float = 4.0,
                pad: float = 0.25, polish: bool = True, strict: bool = False) -> rational.PoleSet:
    """Poles of ``s(w) = u* A(w)^{-1} v`` inside ``box = (x0, x1, y0, y1)``.

    The box is tiled into cells no wider than ``aspect`` times their height.
    Each cell is fitted by scalar AAA on the boundary of the cell padded by
    ``pad`` times its size, keeping poles inside the unpadded cell, and split
    into quadrants while the quadrants disagree with the parent by more
    than ``split_tol``.
    With ``polish`` every pole is refined by a small circular fit around it.

    Parameters
    ----------
    family : callable
        ``family(w)`` returns a dense matrix (or an object with ``.matrix``).
    n_edge : int
        Samples per box edge.
    """
    x0, x1, y0, y1 = map(float, box)
    if not (x0 < x1 and y0 < y1):
        raise ValueError("RE box must have positive width and height")
    rng = np.random.default_rng(seed)
    u = v = None
    memo: dict = {}
    diag = {"samples": 0, "regions": 0, "seed": seed, "complete": True}

    def s(w):
        nonlocal u, v
        key = complex(w)
        if key in memo:
            return memo[key]
        A = family(w)
        A = getattr(A, "matrix", A)
        if u is None:
            n = A.shape[0]
            u = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
            v = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        val = np.conj(u) @ sla.solve(A, v)
        memo[key] = val
        diag["samples"] += 1
        return val

    def fit(b):
        d = pad * max(b[1] - b[0], b[3] - b[2])
        z = _box_boundary((b[0] - d, b[1] + d, b[2] - d, b[3] + d), n_edge)
        f = np.array([s(w) for w in z])
        r = rational.cleanup(rational.aaa_scalar(z, f, tol=tol, m_max=m_max))
        p = rational.poles_and_residues(r).poles
        diag["regions"] += 1
        return p[_inside(b, p)]

    def recurse(b, parent, depth):
        if depth >= max_depth:
            diag["complete"] = False
            return parent
        found = []
        for qb in _quadrants(b):
            qp = fit(qb)
            inherited = parent[_inside(qb, parent)] if parent.size else parent
            if _same(list(qp), list(inherited), split_tol):
                found.extend(qp)
            else:
                found.extend(recurse(qb, qp, depth + 1))
        return np.asarray(found, complex)

    poles = []
    for b in _tiles((x0, x1, y0, y1), aspect):
        p0 = fit(b)
        poles.extend(recurse(b, p0, 0) if p0.size else [])
    # a pole straddling a cell edge may be seen twice
    uniq: list = []
    for p in sorted(poles, key=lambda z: (z.real, z.imag)):
        if not uniq or min(abs(p - q) for q in uniq) > match_tol:
            uniq.append(p)
    if polish and uniq:
        uniq = [_polish(s, p, uniq, tol) for p in uniq]
        uniq = [p for p in uniq if _inside((x0, x1, y0, y1), p)]
    if not diag["complete"]:
        log.warning("RE search reached depth limit %d", max_depth)
        if strict:
            raise DepthLimitError("RE recursion depth limit reached", uniq)
    return rational.PoleSet(np.array(uniq, complex), np.zeros((len(uniq), 0), complex), f"re:{diag}")


def _polish(s, p, others, tol, n: int = 16):
    """Refine ``p`` from a scalar fit on a small circle around it."""
    gap = min([abs(p - q) for q in others if q != p] + [1.0])
    r = min(1e-2, gap / 4)
    z = p + r * np.exp(2j * np.pi * np.arange(n) / n)
    f = np.array([s(w) for w in z])
    fit = rational.aaa_scalar(z, f, tol=tol, m_max=n // 2)
    q = rational.poles_and_residues(fit).poles
    if q.size == 0:
        return p
    best = q[np.argmin(np.abs(q - p))]
    return complex(best) if abs(best - p) < r / 2 else p


def write_pole_csv(path, pairs: list, disc: BoundaryDiscretization | None = None) -> None:
    """Columns: Re rho, Im rho, ||c||_L2, relevance, interval id (relevance-ordered)."""
    rows = sorted(pairs, key=lambda p: -p.relevance)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_rho", "im_rho", "l2_norm", "relevance", "interval_id"])
        for p in rows:
            w.writerow([repr(p.pole.real), repr(p.pole.imag), repr(l2_norm(disc, p.density_residue)),
                        repr(p.relevance), p.interval_id])
