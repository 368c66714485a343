"""AAA rational approximation in barycentric form.

Scalar, vector-valued (shared denominator) and randomly sketched variants,
with pole/residue extraction and Froissart-doublet cleanup.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RationalApproximant:
    """Barycentric rational ``R(z) = sum w_j F_j/(z - z_j) / sum w_j/(z - z_j)``.

    Attributes
    ----------
    support : (m,) complex array
    weights : (m,) complex array, unit 2-norm
    values : (m, d) complex array
        Function values at the support points (one column per component).
    achieved_error : float
        Max sample error relative to the max sample magnitude.
    converged : bool
    meta : dict
        Free-form provenance (tol, seed, interval, sketch size).
    """

    support: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    achieved_error: float
    converged: bool
    meta: dict = field(default_factory=dict)
    scalar: bool = False
    # fit data kept for cleanup re-solves: (Z, F_fit, F_full)
    _data: tuple | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.support)

    @property
    def ncomp(self) -> int:
        return self.values.shape[1]

    def eval(self, z) -> np.ndarray:
        """Values at ``z`` with shape ``z.shape + (d,)``."""
        z = np.asarray(z, dtype=complex)
        zf = z.ravel()
        with np.errstate(divide="ignore", invalid="ignore"):
            C = 1.0 / (zf[:, None] - self.support[None, :])
            num = C @ (self.weights[:, None] * self.values)
            den = C @ self.weights
            out = num / den[:, None]
        # removable singularities at support points
        hit = np.nonzero(zf[:, None] == self.support[None, :])
        out[hit[0]] = self.values[hit[1]]
        return out.reshape(z.shape + (self.ncomp,))

    def __call__(self, z):
        out = self.eval(z)
        return out[..., 0] if self.scalar else out

    def eval_deflated(self, z, p: complex) -> np.ndarray:
        """``(z - p) R(z)`` for a root ``p`` of the denominator.

        Uses ``D(z)/(z - p) = -sum w_j/((z - z_j)(p - z_j))``, which avoids the
        cancellation in ``D`` close to its root.
        """
        z = np.asarray(z, dtype=complex)
        zf = z.ravel()
        C = 1.0 / (zf[:, None] - self.support[None, :])
        q = -(C / (p - self.support)[None, :]) @ self.weights
        out = (C @ (self.weights[:, None] * self.values)) / q[:, None]
        return out.reshape(z.shape + (self.ncomp,))

    def denominator(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (self.weights / (z[..., None] - self.support)).sum(axis=-1)

    def to_record(self) -> dict:
        """JSON-serializable record (support points, weights, values, metadata)."""
        cplx = lambda a: [np.real(a).tolist(), np.imag(a).tolist()]
        return {
            "support": cplx(self.support),
            "weights": cplx(self.weights),
            "values": cplx(self.values),
            "achieved_error": float(self.achieved_error),
            "converged": bool(self.converged),
            "scalar": bool(self.scalar),
            "meta": self.meta,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "RationalApproximant":
        c = lambda p: np.asarray(p[0]) + 1j * np.asarray(p[1])
        vals = c(rec["values"])
        return cls(c(rec["support"]), c(rec["weights"]), np.atleast_2d(vals).reshape(len(rec["support"][0]), -1),
                   rec["achieved_error"], rec["converged"], dict(rec.get("meta", {})), rec.get("scalar", False))

    def dumps(self) -> str:
        return json.dumps(self.to_record())


@dataclass(frozen=True)
class PoleSet:
    poles: np.ndarray
    residues: np.ndarray  # (n_poles, d)
    source: str = ""


def _prepare(Z, F):
    Z = np.asarray(Z, dtype=complex).ravel()
    F = np.asarray(F, dtype=complex)
    scalar = F.ndim == 1
    if scalar:
        F = F[:, None]
    if F.shape[0] != Z.shape[0]:
        if F.shape[1] == Z.shape[0]:
            F = F.T
        else:
            raise ValueError("sample values do not match the sample points")
    if Z.size < 4:
        raise ValueError("AAA needs at least 4 samples")
    if len(np.unique(Z)) != Z.size:
        raise ValueError("sample points must be distinct")
    if not np.all(np.isfinite(F)):
        raise ValueError("sample values must be finite")
    return Z, F, scalar


def _cap(M: int, m_max: int) -> int:
    if m_max < 1:
        raise ValueError("m_max must be positive")
    return min(int(m_max), M // 2)


def _weights(Z, Ffit, idx, mask):
    """Smallest right singular vector of the stacked Loewner matrix."""
    zs = Z[idx]
    C = 1.0 / (Z[mask][:, None] - zs[None, :])
    blocks = [Ffit[mask, c][:, None] * C - C * Ffit[idx, c][None, :] for c in range(Ffit.shape[1])]
    L = np.vstack(blocks) if len(blocks) > 1 else blocks[0]
    if L.shape[0] > 4 * L.shape[1]:
        # economical: SVD of the triangular factor
        L = sla.qr(L, mode="r", check_finite=False)[0][: L.shape[1]]
    _, _, Vh = np.linalg.svd(L)
    w = Vh[-1].conj()
    return w / np.linalg.norm(w)


def _bary_eval(Z, zs, w, Fs):
    with np.errstate(divide="ignore", invalid="ignore"):
        C = 1.0 / (Z[:, None] - zs[None, :])
        R = (C @ (w[:, None] * Fs)) / (C @ w)[:, None]
    return R


def _aaa_core(Z, Ffit, tol, m_max, Ffull=None):
    """Greedy AAA on ``Ffit``; optionally verify against ``Ffull``.

    When ``Ffull`` is given (sketching), the loop stops only once the
    full-vector error is below tolerance, measured with the sketch weights.
    """
    M = Z.size
    scale = np.abs(Ffit).max()
    full_scale = np.abs(Ffull).max() if Ffull is not None else scale
    mask = np.ones(M, dtype=bool)
    idx: list[int] = []
    R = np.broadcast_to(Ffit.mean(axis=0), Ffit.shape).copy()
    w = np.ones(1, dtype=complex)
    err = np.inf
    converged = False
    if scale == 0:
        idx = [0]
        return np.array(idx), w, 0.0, True
    forced = None
    for _ in range(m_max):
        if forced is None:
            resid = np.abs(Ffit - R).max(axis=1)
            resid[~mask] = -1
            j = int(np.argmax(resid))
        else:
            j, forced = forced, None
        idx.append(j)
        mask[j] = False
        if not mask.any():
            break
        w = _weights(Z, Ffit, np.array(idx), mask)
        R = Ffit.copy()
        R[mask] = _bary_eval(Z[mask], Z[idx], w, Ffit[idx])
        err = np.abs(Ffit - R).max() / scale
        if err <= tol:
            if Ffull is None:
                converged = True
                break
            Rf = Ffull.copy()
            Rf[mask] = _bary_eval(Z[mask], Z[idx], w, Ffull[idx])
            bad = np.abs(Ffull - Rf).max(axis=1)
            if bad.max() / full_scale <= tol:
                converged = True
                err = bad.max() / full_scale
                break
            # the sketch converged but the full vectors did not: continue
            # from the worst full-vector sample
            bad[~mask] = -1
            forced = int(np.argmax(bad))
    return np.array(idx), w, float(err), converged


def aaa_vector(Z, F, tol: float = 1e-10, m_max: int = 100, meta: dict | None = None,
               ) -> RationalApproximant:
    """Vector-valued AAA with a shared denominator.

    Parameters
    ----------
    Z : (M,) array
        Distinct sample points.
    F : (M, d) or (M,) array
        Sample values; a 1-D array is treated as scalar data.
    tol : float
        Stopping tolerance relative to ``max |F|``.
    m_max : int
        Maximum number of support points; capped at ``M // 2`` so the
        Loewner system keeps at least as many rows as columns.
    """
    Z, F, scalar = _prepare(Z, F)
    m_max = _cap(Z.size, m_max)
    idx, w, err, conv = _aaa_core(Z, F, tol, m_max)
    md = {"tol": tol, "m_max": m_max}
    md.update(meta or {})
    return RationalApproximant(Z[idx], w, F[idx].copy(), err, conv, md, scalar, (Z, F, F))


def aaa_scalar(Z, f, tol: float = 1e-10, m_max: int = 100, meta: dict | None = None) -> RationalApproximant:
    """Scalar AAA; ``f`` is a 1-D array of values at ``Z``."""
    f = np.asarray(f, dtype=complex).ravel()
    return aaa_vector(Z, f, tol, m_max, meta)


def sketch_matrix(ndim: int, ell: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((ndim, ell)) + 1j * rng.standard_normal((ndim, ell))) / np.sqrt(2)


def aaa_sketch(Z, F, ell: int = 4, tol: float = 1e-10, m_max: int = 100, seed: int = 0,
               meta: dict | None = None) -> RationalApproximant:
    """Randomly sketched vector AAA.

    Support points and weights come from AAA on ``G = F V`` with a seeded
    complex Gaussian ``V``; the full vectors are substituted at the support
    points and the reported error is measured on ``F``.
    """
    Z, F, scalar = _prepare(Z, F)
    ndim = F.shape[1]
    md = {"tol": tol, "m_max": m_max, "seed": int(seed), "ell": int(ell)}
    md.update(meta or {})
    if ell >= ndim:
        log.info("sketch size %d >= %d components; using aaa_vector", ell, ndim)
        r = aaa_vector(Z, F if not scalar else F[:, 0], tol, m_max, md)
        return r
    m_max = _cap(Z.size, m_max)
    G = F @ sketch_matrix(ndim, ell, seed)
    idx, w, err, conv = _aaa_core(Z, G, tol, m_max, Ffull=F)
    mask = np.ones(Z.size, dtype=bool)
    mask[idx] = False
    Rf = _bary_eval(Z[mask], Z[idx], w, F[idx])
    err = float(np.abs(F[mask] - Rf).max() / np.abs(F).max()) if mask.any() else 0.0
    return RationalApproximant(Z[idx], w, F[idx].copy(), err, conv and err <= tol, md, scalar, (Z, G, F))


def poles_and_residues(r: RationalApproximant) -> PoleSet:
    """Poles from the arrowhead generalized eigenproblem; residues N(p)/D'(p)."""
    m = r.m
    if m < 2:
        return PoleSet(np.zeros(0, complex), np.zeros((0, r.ncomp), complex))
    E = np.zeros((m + 1, m + 1), dtype=complex)
    E[0, 1:] = r.weights
    E[1:, 0] = 1.0
    E[1:, 1:] = np.diag(r.support)
    B = np.eye(m + 1, dtype=complex)
    B[0, 0] = 0.0
    ev = sla.eigvals(E, B)
    poles = ev[np.isfinite(ev)]
    # guard against spurious huge eigenvalues from the infinite pair
    scale = max(1.0, np.abs(r.support).max())
    poles = poles[np.abs(poles) < 1e8 * scale]
    if poles.size == 0:
        return PoleSet(poles, np.zeros((0, r.ncomp), complex))
    C = 1.0 / (poles[:, None] - r.support[None, :])
    num = C @ (r.weights[:, None] * r.values)
    dden = -(C ** 2) @ r.weights
    res = num / dden[:, None]
    order = np.argsort(poles.real)
    return PoleSet(poles[order], res[order], r.meta.get("id", ""))


def denominator_root_ok(r: RationalApproximant, pole: complex, rtol: float = 1e-8) -> bool:
    """Check ``|D(p)| < rtol * max|w| / dist(p, support)``."""
    d = np.abs(pole - r.support).min()
    return bool(abs(r.denominator(pole)) < rtol * np.abs(r.weights).max() / d)


def _resolve(r: RationalApproximant, idx: np.ndarray) -> RationalApproximant:
    Z, Ffit, Ffull = r._data
    mask = np.ones(Z.size, dtype=bool)
    mask[idx] = False
    w = _weights(Z, Ffit, idx, mask)
    Rf = _bary_eval(Z[mask], Z[idx], w, Ffull[idx])
    scale = np.abs(Ffull).max()
    err = float(np.abs(Ffull[mask] - Rf).max() / scale) if scale > 0 else 0.0
    return replace(r, support=Z[idx], weights=w, values=Ffull[idx].copy(), achieved_error=err,
                   converged=err <= r.meta.get("tol", np.inf))


def cleanup(r: RationalApproximant, Z=None, drop_tol: float = 1e-13) -> RationalApproximant:
    """Remove Froissart doublets.

    Poles whose largest component residue is below ``drop_tol * max|F|``
    lose their nearest support point, and the weights are re-solved once per
    pass; passes repeat until no such pole remains or ``m < 2``.
    """
    if drop_tol <= 0 or r.m < 2:
        return r
    if r._data is None:
        raise ValueError("cleanup needs an approximant that retains its sample data")
    if Z is not None and np.asarray(Z).size != r._data[0].size:
        raise ValueError("sample set does not match the approximant's data")
    scale = np.abs(r._data[2]).max()
    Zs = r._data[0]
    cur = r
    while cur.m >= 2:
        ps = poles_and_residues(cur)
        if ps.poles.size == 0:
            break
        small = np.abs(ps.residues).max(axis=1) < drop_tol * scale
        if not small.any():
            break
        pos = {complex(z): i for i, z in enumerate(Zs)}
        idx = [pos[complex(z)] for z in cur.support]
        drop = {int(np.argmin(np.abs(cur.support - p))) for p in ps.poles[small]}
        idx = np.array([k for i, k in enumerate(idx) if i not in drop])
        if idx.size < 1:
            break
        log.debug("cleanup removed %d support point(s)", len(drop))
        cur = _resolve(cur, idx)
    return cur
