"""End-to-end FTH and FTH-SS drivers and reference solutions.

The scattered field is

    u(r, t) = -(1/2pi) int_I A(w) U_p(r, w) e^{-iwt} dw

where ``A`` is the incident spectrum and ``U_p`` the radiating solution with
boundary values ``exp(i w p.r)``. FTH samples ``U_p`` on an equispaced grid
by direct solves; FTH-SS first runs the IE resonance search, takes grid
densities from its rational approximants, subtracts the resonance poles and
adds their contribution back through the singular-part integral.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import logging
import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml
from scipy import integrate

from . import geometry, helmholtz, mie, quadrature, resonance, singsub
from .helmholtz import DensitySolver, SolveCounters

log = logging.getLogger(__name__)

MAX_SOLVES = 100_000
CHIRP_DT = 1.0 / 64
# relative spectrum magnitude at the band edges below which the band counts as complete
EDGE_TOL = 1e-8


class ConfigError(ValueError):
    """Invalid simulation configuration."""


class ResourceGuardError(RuntimeError):
    """Requested work exceeds the configured resource guard."""


class StageError(RuntimeError):
    """A pipeline stage failed; ``partial`` keeps what was computed."""

    def __init__(self, stage: str, cause: Exception, partial: dict | None = None):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial or {}


# ---------------------------------------------------------------------------
# Incident fields


def chirp(t):
    """``sin(g + g^2/4000)`` with ``g = 4t + 6 cos(t/sqrt(12))``."""
    t = np.asarray(t, float)
    g = 4 * t + 6 * np.cos(t / math.sqrt(12.0))
    return np.sin(g + g * g / 4000.0)


@dataclass(frozen=True)
class IncidentField:
    """Plane-wave incidence ``a(t - p.r)`` with spectrum ``A``.

    ``profile = "gaussian"``: ``A(w) = exp(-(w - w0)^2/sigma^2)``.
    ``profile = "chirp"``: ``a(t) = -w(t - s; H) chirp(t)``, supported on
    ``[s - H, s + H]`` so ``T_inc = s + H``.
    A positive ``delay`` shifts the signal later in time.
    """

    direction: tuple = (1.0, 0.0)
    profile: str = "gaussian"
    omega0: float = 8.5
    sigma2: float = 0.5
    s: float = 40.0
    H: float = 30.0
    delay: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.direction, float)
        if p.shape != (2,) or abs(np.hypot(*p) - 1) > 1e-12:
            raise ConfigError("incidence direction must be a unit 2-vector")
        if self.profile not in ("gaussian", "chirp"):
            raise ConfigError(f"unknown incident profile {self.profile!r}")
        if self.profile == "gaussian" and not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")
        if self.profile == "chirp" and not self.H > 0:
            raise ConfigError("chirp window H must be positive")

    @property
    def T_inc(self) -> float:
        if self.profile == "chirp":
            return self.s + self.H + self.delay
        return math.inf

    @property
    def support(self) -> tuple:
        return (self.s - self.H + self.delay, self.s + self.H + self.delay)

    def signal(self, t):
        """Time profile ``a(t)``; complex for the one-sided Gaussian spectrum."""
        t = np.asarray(t, float) - self.delay
        if self.profile == "gaussian":
            s = math.sqrt(self.sigma2)
            return self.amplitude * s / (2 * math.sqrt(math.pi)) * np.exp(-1j * self.omega0 * t - self.sigma2 * t * t / 4)
        return -self.amplitude * quadrature.window_value(t - self.s, self.H) * chirp(t)

    def spectrum(self, z):
        """``A(z) = int a(t) e^{izt} dt``, continued to complex ``z``."""
        z = np.asarray(z, complex)
        if self.profile == "gaussian":
            return self.amplitude * np.exp(-(z - self.omega0) ** 2 / self.sigma2 + 1j * z * self.delay)
        return self._chirp_spectrum(z)

    def _chirp_spectrum(self, z):
        # smooth, compactly supported integrand: the trapezoid rule is spectrally accurate
        t0, t1 = self.support
        n = int(math.ceil((t1 - t0) / CHIRP_DT))
        t = np.linspace(t0, t1, n + 1)
        a = np.real(self.signal(t))
        wts = np.full(t.size, (t1 - t0) / n)
        wts[[0, -1]] *= 0.5
        zf = z.ravel()
        out = np.empty(zf.size, complex)
        for i in range(0, zf.size, 256):
            out[i:i + 256] = np.exp(1j * np.outer(zf[i:i + 256], t)) @ (a * wts)
        return out.reshape(z.shape)

    def incident(self, points, t):
        """``u_inc(r, t) = a(t - p.r)``; shape ``(T, P)``."""
        pts = np.atleast_2d(np.asarray(points, float))
        pr = pts @ np.asarray(self.direction, float)
        return self.signal(np.atleast_1d(t)[:, None] - pr[None, :])

    def onset(self, h: float) -> float:
        """Time after which the singular part decays at rate ``h``."""
        if self.profile == "chirp":
            return self.T_inc
        return h / self.sigma2 + self.delay

    def signal_info(self) -> dict:
        if self.profile == "chirp":
            return {"T_inc": self.T_inc}
        return {"sigma2": self.sigma2, "delay": self.delay}

    def tail_bound(self, band) -> float:
        return float(np.abs(self.spectrum(np.array(band, float))).max())


# ---------------------------------------------------------------------------
# Configuration


_CONFIG_KEYS = {
    "curve", "N", "incident", "band", "J", "h", "eta", "points", "times", "tol", "mode", "seed",
    "search", "window", "center", "asymptotic", "workers", "n_cheb", "c", "name", "sweep",
    "reference_multiplier", "snapshot",
}


@dataclass
class SimulationConfig:
    """All parameters of one run; round-trips losslessly through YAML.

    ``search`` holds IE parameters (``J``, ``m_max``, ``ell``, ``max_depth``,
    ``J_C``, ``radius``, ``budget``); ``window`` the partition (``H``,
    ``alpha``, ``rho``); ``center`` the zero-band split (``w_c``, ``M_I``, ``q``).
    """

    curve: dict = field(default_factory=lambda: {"kind": "unit-circle"})
    N: int = 128
    incident: dict = field(default_factory=lambda: {"profile": "gaussian", "omega0": 11.0, "sigma2": 0.5,
                                                    "direction": [1.0, 0.0]})
    band: list = field(default_factory=lambda: [6.5, 15.5])
    J: int = 400
    h: float = 0.5
    eta: Any = "auto"
    points: list = field(default_factory=lambda: [[0.0, -1.3]])
    times: Any = field(default_factory=lambda: {"start": 0.0, "stop": 20.0, "count": 500})
    tol: float = 1e-10
    mode: str = "fth-ss"
    seed: int = 0
    search: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    center: dict = field(default_factory=dict)
    asymptotic: bool = True
    workers: int = 1
    n_cheb: int = singsub.N_CHEB
    c: float = 1.0
    name: str = ""
    sweep: list = field(default_factory=lambda: [25, 50, 100, 200])
    reference_multiplier: int = 10
    snapshot: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        W1, W2 = map(float, self.band)
        if not W1 < W2:
            raise ConfigError(f"band: empty interval [{W1}, {W2}]")
        if self.mode not in ("fth", "fth-ss"):
            raise ConfigError(f"mode: expected 'fth' or 'fth-ss', got {self.mode!r}")
        if int(self.J) < 8:
            raise ConfigError("J: need at least 8 frequencies")
        if int(self.N) < 4:
            raise ConfigError("N: need at least 4 boundary nodes")
        if not self.h > 0:
            raise ConfigError("h: box depth must be positive")
        if not 0 < self.tol < 1:
            raise ConfigError("tol: must lie in (0, 1)")
        if self.eta != "auto" and not isinstance(self.eta, (int, float)):
            raise ConfigError("eta: 'auto' or a number")
        if int(self.workers) < 1:
            raise ConfigError("workers: must be >= 1")
        if not isinstance(self.curve, dict) or "kind" not in self.curve:
            raise ConfigError("curve: mapping with a 'kind' key required")
        pts = np.asarray(self.points, float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ConfigError("points: list of [x, y] pairs")
        if int(self.reference_multiplier) < 4:
            raise ConfigError("reference_multiplier: must be >= 4")
        if any(int(j) < 8 for j in self.sweep):
            raise ConfigError("sweep: every J must be >= 8")
        unknown = set(self.snapshot) - {"bounds", "nx", "ny", "times"}
        unknown |= set(self.search) - {"J", "m_max", "ell", "max_depth", "J_C", "radius", "budget", "drop_tol"}
        unknown |= set(self.window) - {"H", "alpha", "rho"}
        unknown |= set(self.center) - {"w_c", "M_I", "q"}
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        self.incident_field()
        self.time_grid()

    def incident_field(self) -> IncidentField:
        d = dict(self.incident)
        if "direction" in d:
            d["direction"] = tuple(float(x) for x in d["direction"])
        try:
            return IncidentField(**d)
        except TypeError as e:
            raise ConfigError(f"incident: {e}") from None

    def time_grid(self) -> np.ndarray:
        if isinstance(self.times, dict):
            try:
                return np.linspace(float(self.times["start"]), float(self.times["stop"]), int(self.times["count"]))
            except KeyError as e:
                raise ConfigError(f"times: missing {e}") from None
        return np.asarray(self.times, float).ravel()

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(d))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_yaml(cls, text: str) -> "SimulationConfig":
        d = yaml.safe_load(text) or {}
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(d)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "SimulationConfig":
        d = self.to_dict()
        d.update(kw)
        return SimulationConfig.from_dict(d)


def apply_override(d: dict, key: str, value: str) -> None:
    """Set a dotted ``key`` in ``d`` from a YAML-parsed ``value``."""
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = yaml.safe_load(value)


# ---------------------------------------------------------------------------
# Results


@dataclass
class FieldResult:
    """Scattered field ``values[t, point]`` with resonance table and diagnostics."""

    times: np.ndarray
    points: np.ndarray
    values: np.ndarray
    mode: str
    poles: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    evaluator: Any = field(default=None, repr=False)

    def max_error(self, other: "FieldResult") -> float:
        if self.values.shape != other.values.shape or not np.array_equal(self.times, other.times):
            raise ValueError("time/point grids differ")
        return float(np.abs(self.values - other.values).max())

    def write_csv(self, path) -> None:
        """Columns: t, then re/im of the field at each point."""
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t"]
            for i in range(self.points.shape[0]):
                head += [f"re_u{i}", f"im_u{i}"]
            w.writerow(head)
            for k, t in enumerate(self.times):
                row = [repr(float(t))]
                for v in self.values[k]:
                    row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row)


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1::2] + 1j * data[:, 2::2]


# ---------------------------------------------------------------------------
# Synthesis


@dataclass
class _Problem:
    cfg: SimulationConfig
    disc: geometry.BoundaryDiscretization
    inc: IncidentField
    solver: DensitySolver
    eta: float | None
    points: np.ndarray
    grid: np.ndarray
    zero_band: bool
    w_c: float
    M_I: int
    q: int


def _setup(cfg: SimulationConfig, N: int | None = None, J: int | None = None) -> _Problem:
    curve_spec = dict(cfg.curve)
    kind = curve_spec.pop("kind")
    if kind == "fourier-file":
        curve = geometry.load_fourier_curve(curve_spec["path"])
    else:
        curve = geometry.make_curve(kind, **curve_spec)
    disc = geometry.discretize(curve, int(N or cfg.N))
    inc = cfg.incident_field()
    W1, W2 = map(float, cfg.band)
    zero = W1 < 0 < W2
    cen = {"w_c": 1.0, "M_I": 8, "q": 8}
    cen.update(cfg.center)
    if disc.closed:
        if cfg.eta == "auto":
            eta = helmholtz.band_eta((cen["w_c"] / 2, W2) if zero else (W1, W2))
        else:
            eta = float(cfg.eta)
    else:
        eta = None
    solver = DensitySolver(disc, tuple(inc.direction), eta, cfg.c)
    pts = helmholtz.check_points(disc, cfg.points)
    grid = np.linspace(W1, W2, int(J or cfg.J))
    return _Problem(cfg, disc, inc, solver, eta, pts, grid, zero, float(cen["w_c"]), int(cen["M_I"]), int(cen["q"]))


def _field_on(prob: _Problem, omegas, dens) -> np.ndarray:
    """``U(points, w)`` rows for each frequency from nodal densities."""
    out = np.empty((len(omegas), prob.points.shape[0]), complex)
    for j, (w, psi) in enumerate(zip(omegas, dens)):
        if w < 0:
            # U(-w) = conj(U(w)) for the real-time problem
            P = helmholtz.potential_matrix(prob.disc, -w, prob.points, prob.eta, prob.cfg.c, check=False)
            out[j] = np.conj(P @ np.conj(psi))
        else:
            P = helmholtz.potential_matrix(prob.disc, w, prob.points, prob.eta, prob.cfg.c, check=False)
            out[j] = P @ psi
    return out


def _outer_mask(prob: _Problem) -> np.ndarray:
    """Grid frequencies where the field is needed (all, or outside the centre plateau)."""
    if not prob.zero_band:
        return np.ones(prob.grid.size, bool)
    return np.abs(prob.grid) >= prob.w_c / 2


class Synthesizer:
    """Evaluates ``-(I1 + I2)`` at arbitrary times from precomputed rules.

    Setup cost is paid once; each time point then costs O(M) for the
    windowed Fourier rules plus the per-resonance singular part.
    """

    def __init__(self, prob: _Problem, Us: np.ndarray, center: tuple | None, poles, residues,
                 asymptotic: bool, tol: float):
        cfg = prob.cfg
        self.prob = prob
        inc = prob.inc
        W1, W2 = map(float, cfg.band)
        self.band = (W1, W2)
        self.poles = np.asarray(poles, complex)
        self.residues = np.asarray(residues, complex).reshape(self.poles.size, prob.points.shape[0])
        self.tol = tol
        self.asymptotic = asymptotic
        self.terms = []  # (TrigRule, shift) per window
        self.center_terms = []  # (up, um, shift)
        grid = prob.grid
        win = {"H": quadrature.DEFAULT_H, "alpha": quadrature.DEFAULT_ALPHA, "rho": quadrature.DEFAULT_RHO}
        win.update(cfg.window)
        nodes = quadrature.fcc_nodes(prob.w_c, prob.M_I, prob.q) if prob.zero_band else None
        both = None if nodes is None else np.concatenate([nodes, -nodes])
        if inc.profile == "gaussian":
            spectra = [(inc.spectrum(grid), 0.0, None if both is None else inc.spectrum(both))]
        else:
            part = quadrature.WindowPartition(inc.T_inc, win["H"], win["alpha"], win["rho"])
            sig = lambda t: np.real(inc.signal(t))
            spectra = []
            for k in range(1, part.K + 1):
                Ak = quadrature.windowed_spectrum(sig, k, part, grid).samples
                Ac = None if both is None else quadrature.windowed_spectrum(sig, k, part, both).samples
                spectra.append((Ak, part.centers[k - 1], Ac))
        self.n_windows = len(spectra)
        shape = (-1, 1)
        for Ak, shift, Ac in spectra:
            F = Ak.reshape(shape) * Us
            if prob.zero_band:
                chi = quadrature.center_cutoff(grid, prob.w_c).reshape(shape)
                F = (1 - chi) * F
                up, um = center
                nn = up.shape[0]
                cw = quadrature.center_cutoff(quadrature.fcc_nodes(prob.w_c, prob.M_I, prob.q), prob.w_c)[:, None]
                self.center_terms.append((cw * Ac[:nn, None] * up, cw * Ac[nn:, None] * um, shift))
            self.terms.append((quadrature.trig_rule(F, W1, W2), shift))
        self.signal = inc.signal_info()
        self.A = inc.spectrum
        self.i2_switch = None

    def I1(self, t) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(t, float))
        out = np.zeros((ts.size, self.prob.points.shape[0]), complex)
        for rule, shift in self.terms:
            out += rule.integrate(ts - shift)
        for up, um, shift in self.center_terms:
            for i, tt in enumerate(ts - shift):
                out[i] += (quadrature.fcc_log_integral(up, tt, self.prob.w_c, self.prob.M_I, self.prob.q)
                           + quadrature.fcc_log_integral(um, -tt, self.prob.w_c, self.prob.M_I, self.prob.q))
        return out / (2 * np.pi)

    def I2(self, t) -> singsub.I2Result:
        ts = np.atleast_1d(np.asarray(t, float))
        h = self.prob.cfg.h
        # onset passed as T_inc so a delayed Gaussian shifts it too
        sig = {"T_inc": self.prob.inc.onset(h)}
        res = singsub.I2(self.poles, self.residues, self.A, ts, self.band, self.tol, h, sig,
                         self.prob.cfg.n_cheb, self.asymptotic, self.prob.inc.tail_bound(self.band),
                         self.prob.cfg.workers)
        self.i2_switch = res.switch
        return res

    def evaluate(self, t) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(t, float))
        total = self.I1(ts)
        if self.poles.size:
            total = total + self.I2(ts).values
        return -total


def _center_samples(prob: _Problem, counters_before: int) -> tuple:
    """Field at the FCC nodes on both sides of 0 (direct solves on the positive side)."""
    nodes = quadrature.fcc_nodes(prob.w_c, prob.M_I, prob.q)
    dens = resonance.solve_batch(prob.solver, nodes, None, prob.cfg.workers)
    up = _field_on(prob, nodes, dens)
    return up, np.conj(up), nodes


def _provenance(cfg: SimulationConfig) -> dict:
    from . import __version__
    from .kernels import BACKEND
    return {"config_hash": cfg.hash(), "seed": cfg.seed, "version": __version__, "backend": BACKEND,
            "numpy": np.__version__}


def run_fth(cfg: SimulationConfig, N: int | None = None, J: int | None = None) -> FieldResult:
    """Plain FTH: direct solves on the integration grid, no subtraction."""
    t0 = time.perf_counter()
    prob = _setup(cfg, N, J)
    if prob.grid.size > MAX_SOLVES:
        raise ResourceGuardError(f"{prob.grid.size} solves exceed the guard {MAX_SOLVES}")
    mask = _outer_mask(prob)
    U = np.zeros((prob.grid.size, prob.points.shape[0]), complex)
    try:
        pos = prob.grid[mask]
        dens = resonance.solve_batch(prob.solver, pos, None, cfg.workers)
        U[mask] = _field_on(prob, pos, dens)
        center = None
        if prob.zero_band:
            up, um, _ = _center_samples(prob, 0)
            center = (up, um)
    except Exception as e:
        raise StageError("solve", e) from e
    synth = Synthesizer(prob, U, center, [], np.zeros((0, prob.points.shape[0])), cfg.asymptotic, cfg.tol)
    ts = cfg.time_grid()
    vals = synth.evaluate(ts)
    diag = {"solves": prob.solver.counters.solves, "factorizations": prob.solver.counters.factorizations,
            "grid_solves": int(mask.sum()), "windows": synth.n_windows, "wall_time": time.perf_counter() - t0,
            "tail_bound": prob.inc.tail_bound(cfg.band)}
    return FieldResult(ts, prob.points, vals, "fth", [], diag, _provenance(cfg), synth)


def _mirror(pairs: list) -> tuple[np.ndarray, list]:
    """Poles of the negative-frequency half: ``-conj(rho)`` with residue ``-conj(c)``."""
    poles = [p.pole for p in pairs] + [-np.conj(p.pole) for p in pairs]
    return np.array(poles, complex), pairs


def run_fth_ss(cfg: SimulationConfig, N: int | None = None, J: int | None = None,
               asymptotic: bool | None = None) -> FieldResult:
    """FTH with singularity subtraction (IE search, approximant reuse, split I1 + I2)."""
    t0 = time.perf_counter()
    prob = _setup(cfg, N, J)
    # default search grid = integration grid, so every grid density is a cached solve
    s = {"J": int(J or cfg.J), "m_max": resonance.DEFAULT_M_MAX, "ell": resonance.DEFAULT_ELL, "max_depth": 8,
         "J_C": 10, "radius": 1e-5, "budget": None, "drop_tol": 1e-13}
    s.update(cfg.search)
    W1, W2 = map(float, cfg.band)
    I_search = (prob.w_c / 2, W2) if prob.zero_band else (W1, W2)
    counters = prob.solver.counters
    partial: dict = {}
    # 1. resonance search
    try:
        ie = resonance.ie_adaptive(prob.solver, I_search, J=int(s["J"]), tol=cfg.tol, m_max=int(s["m_max"]),
                                   h=cfg.h, ell=int(s["ell"]), seed=cfg.seed, max_depth=int(s["max_depth"]),
                                   disc=prob.disc, J_C=int(s["J_C"]), radius=float(s["radius"]),
                                   drop_tol=float(s["drop_tol"]), budget=s["budget"], workers=cfg.workers)
    except Exception as e:
        raise StageError("resonance-search", e) from e
    ie_fact = counters.factorizations
    partial["poles"] = ie.poles
    # 2. field residues at the observation points
    try:
        before = counters.factorizations
        res = [resonance.spatial_residues(prob.disc, p.pole, p.density_residue, prob.points, eta=prob.eta,
                                          c=cfg.c) for p in ie.poles]
        for p, r in zip(ie.poles, res):
            p.spatial_residues = r
            p.points = prob.points
        poles = np.array([p.pole for p in ie.poles], complex)
        resid = np.array(res, complex).reshape(len(res), prob.points.shape[0])
        if prob.zero_band and poles.size:
            poles = np.concatenate([poles, -np.conj(poles)])
            resid = np.concatenate([resid, -np.conj(resid)])
        residue_fact = counters.factorizations - before
    except Exception as e:
        raise StageError("residues", e, partial) from e
    # 3-4. grid densities from cached solves or the approximants, then fields
    try:
        mask = _outer_mask(prob)
        pos = prob.grid[mask]
        dens = _reuse_densities(ie, np.abs(pos))
        dens = np.where((pos < 0)[:, None], np.conj(dens), dens)
        U = np.zeros((prob.grid.size, prob.points.shape[0]), complex)
        U[mask] = _field_on(prob, pos, dens)
    except Exception as e:
        raise StageError("grid-densities", e, partial) from e
    grid_fact = counters.factorizations - ie_fact - residue_fact
    center = None
    if prob.zero_band:
        up, um, nodes = _center_samples(prob, counters.factorizations)
        if poles.size:
            up = singsub.subtract(up, nodes, poles, resid).values
            um = singsub.subtract(um, -nodes, poles, resid).values
        center = (up, um)
    center_fact = counters.factorizations - ie_fact - grid_fact - residue_fact
    # 5. subtraction
    Us = singsub.subtract(U, prob.grid, poles, resid, cfg.band, cfg.h)
    Uvals = np.where(mask[:, None], Us.values, 0.0) if prob.zero_band else Us.values
    # 6. synthesis
    asym = cfg.asymptotic if asymptotic is None else asymptotic
    synth = Synthesizer(prob, Uvals, center, poles, resid, asym, cfg.tol)
    ts = cfg.time_grid()
    try:
        vals = synth.evaluate(ts)
    except Exception as e:
        raise StageError("synthesis", e, partial) from e
    sw = synth.i2_switch
    diag = {"solves": counters.solves, "factorizations": counters.factorizations,
            "ie_factorizations": ie_fact, "grid_factorizations": grid_fact, "center_factorizations": center_fact,
            "residue_factorizations": residue_fact, "ie_intervals": len(ie.partition), "ie_complete": ie.complete,
            "ie_max_error": ie.diagnostics["max_error"], "n_poles": len(ie.poles), "windows": synth.n_windows,
            "switch_time": None if sw is None else sw.t_star, "wall_time": time.perf_counter() - t0,
            "tail_bound": prob.inc.tail_bound(cfg.band)}
    out = FieldResult(ts, prob.points, vals, "fth-ss", ie.poles, diag, _provenance(cfg), synth)
    out.diagnostics["ie"] = ie
    out.diagnostics["subtracted"] = Us
    return out


def _reuse_densities(ie: resonance.IEResult, omegas) -> np.ndarray:
    """Exact cached solves where available, approximant values elsewhere."""
    out = ie.density(omegas)
    for j, w in enumerate(omegas):
        v = ie.solve_cache.get(w)
        if v is not None:
            out[j] = v
    return out


def run(cfg: SimulationConfig, **kw) -> FieldResult:
    return run_fth_ss(cfg, **kw) if cfg.mode == "fth-ss" else run_fth(cfg, **kw)


def reference_brute_force(cfg: SimulationConfig, multiplier: int = 10) -> FieldResult:
    """FTH-SS with ``J * multiplier`` integration frequencies, ``2N`` nodes and no asymptotics."""
    if multiplier < 4:
        raise ValueError("reference multiplier must be at least 4")
    J = int(cfg.J) * int(multiplier)
    if J > MAX_SOLVES:
        raise ResourceGuardError(f"reference grid of {J} frequencies exceeds the guard {MAX_SOLVES}")
    res = run_fth_ss(cfg, N=2 * int(cfg.N), J=J, asymptotic=False)
    res.mode = "reference"
    res.diagnostics["multiplier"] = multiplier
    return res


def mie_reference(radius: float, incident: IncidentField, points, t_grid, band,
                  epsabs: float = 1e-14) -> FieldResult:
    """Disk reference: series field and adaptive quadrature of the inverse transform."""
    pts = np.atleast_2d(np.asarray(points, float))
    if np.any(np.hypot(pts[:, 0], pts[:, 1]) < radius):
        raise ValueError("Mie reference requested inside the disk")
    ts = np.atleast_1d(np.asarray(t_grid, float))
    P = pts.shape[0]

    def f(w):
        U = mie.disk_field(w, radius, pts, incident.direction)
        v = -incident.spectrum(np.array([w]))[0] * np.exp(-1j * w * ts)[:, None] * U[None, :]
        return np.concatenate([v.real.ravel(), v.imag.ravel()])

    W1, W2 = map(float, band)
    val, err = integrate.quad_vec(f, W1, W2, epsabs=epsabs, epsrel=1e-13, limit=2000)
    n = ts.size * P
    out = (val[:n] + 1j * val[n:]).reshape(ts.size, P) / (2 * np.pi)
    return FieldResult(ts, pts, out, "mie", [], {"quad_error": float(err)}, {})


# ---------------------------------------------------------------------------
# Snapshots


SNAPSHOT_HEADER = "<qq4dd"
MASK_SENTINEL = complex(np.nan, np.nan)


def snapshot_grid(bounds, nx: int, ny: int) -> np.ndarray:
    x0, x1, y0, y1 = bounds
    X, Y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def snapshot_mask(disc, pts, cutoff: float | None = None) -> np.ndarray:
    """True where a grid point is inside an obstacle or in the near-field band."""
    if cutoff is None:
        cutoff = 0.05 * helmholtz._diameter(disc)
    dist = np.hypot(pts[:, None, 0] - disc.nodes[None, :, 0], pts[:, None, 1] - disc.nodes[None, :, 1]).min(axis=1)
    bad = dist < cutoff
    if disc.closed:
        bad |= helmholtz._inside_closed(disc, pts)
    return bad


def write_snapshot(path, values: np.ndarray, nx: int, ny: int, bounds, t: float) -> None:
    """Little-endian: int64 nx, int64 ny, 4 x float64 bounds, float64 t, then row-major complex128."""
    with open(path, "wb") as fh:
        fh.write(struct.pack(SNAPSHOT_HEADER, nx, ny, *map(float, bounds), float(t)))
        fh.write(np.ascontiguousarray(np.asarray(values).reshape(ny, nx), dtype="<c16").tobytes())


def read_snapshot(path):
    size = struct.calcsize(SNAPSHOT_HEADER)
    with open(path, "rb") as fh:
        nx, ny, x0, x1, y0, y1, t = struct.unpack(SNAPSHOT_HEADER, fh.read(size))
        vals = np.frombuffer(fh.read(), dtype="<c16").reshape(ny, nx)
    return vals, (x0, x1, y0, y1), t


def run_snapshot(cfg: SimulationConfig, bounds, nx: int, ny: int, times) -> dict:
    """Total field (incident + scattered) on a grid; masked points hold NaN."""
    probe = _setup(cfg)
    pts = snapshot_grid(bounds, nx, ny)
    bad = snapshot_mask(probe.disc, pts)
    if bad.any():
        log.warning("%d grid point(s) masked (inside obstacle or near-field band)", int(bad.sum()))
    good = pts[~bad]
    d = cfg.to_dict()
    d["points"] = good.tolist()
    d["times"] = [float(t) for t in np.atleast_1d(times)]
    sub = SimulationConfig.from_dict(d)
    res = run(sub)
    inc = sub.incident_field()
    uinc = inc.incident(good, res.times)
    frames = {}
    for k, t in enumerate(res.times):
        full = np.full(pts.shape[0], MASK_SENTINEL)
        full[~bad] = uinc[k] + res.values[k]
        frames[float(t)] = full.reshape(ny, nx)
    return {"frames": frames, "mask": bad.reshape(ny, nx), "result": res, "scattered": res.values,
            "incident": uinc}


# ---------------------------------------------------------------------------
# Experiment helpers used by the command line


def _search_params(cfg: SimulationConfig) -> dict:
    s = {"J": int(cfg.J), "m_max": resonance.DEFAULT_M_MAX, "ell": resonance.DEFAULT_ELL, "max_depth": 8,
         "J_C": 10, "radius": 1e-5, "budget": None, "drop_tol": 1e-13}
    s.update(cfg.search)
    return s


def resonance_search(cfg: SimulationConfig) -> tuple[resonance.IEResult, _Problem]:
    """IE search over the configured band (positive half for zero-straddling bands)."""
    prob = _setup(cfg)
    s = _search_params(cfg)
    W1, W2 = map(float, cfg.band)
    I = (prob.w_c / 2, W2) if prob.zero_band else (W1, W2)
    ie = resonance.ie_adaptive(prob.solver, I, J=int(s["J"]), tol=cfg.tol, m_max=int(s["m_max"]), h=cfg.h,
                               ell=int(s["ell"]), seed=cfg.seed, max_depth=int(s["max_depth"]), disc=prob.disc,
                               J_C=int(s["J_C"]), radius=float(s["radius"]), drop_tol=float(s["drop_tol"]),
                               budget=s["budget"], workers=cfg.workers)
    return ie, prob


def cross_validate(cfg: SimulationConfig, ie: resonance.IEResult, prob: _Problem, rel_cut: float = 1e-6,
                   match_tol: float = 1e-7, n_edge: int = 24) -> list[dict]:
    """Compare RE poles in the search box against the IE poles.

    Each RE pole gets its relevance for the configured incidence from a
    direct contour residue; rows flag relevant RE poles missing from IE.
    """
    box = ie.box
    eta = prob.eta
    fam = lambda w: helmholtz.assemble(prob.disc, complex(w), eta, cfg.c).matrix
    re_poles = resonance.re_adaptive(fam, (box.W1, box.W2, -box.h, 0.0), n_edge=n_edge, seed=cfg.seed).poles
    s = _search_params(cfg)
    rows = []
    for z in re_poles:
        c = resonance.direct_residue(prob.solver.solve_complex, z, int(s["J_C"]), float(s["radius"]))
        rows.append({"pole": complex(z), "relevance": resonance.relevance_metric((complex(z), c), prob.disc)})
    top = max((r["relevance"] for r in rows), default=0.0)
    P = ie.pole_array()
    for r in rows:
        d = float(np.abs(P - r["pole"]).min()) if P.size else math.inf
        r["ie_distance"] = d
        r["relevant"] = r["relevance"] > rel_cut * top
        r["missing"] = r["relevant"] and d > match_tol
    return rows


@dataclass
class DecaySeries:
    times: np.ndarray
    I1: np.ndarray
    eps2: np.ndarray
    onset: float
    slope: float | None
    fit_message: str


def _edge_ratio(cfg: SimulationConfig) -> float:
    inc = cfg.incident_field()
    W1, W2 = map(float, cfg.band)
    peak = np.abs(inc.spectrum(np.linspace(W1, W2, 4 * int(cfg.J) + 1))).max()
    return inc.tail_bound(cfg.band) / peak if peak > 0 else 0.0


def _singular_data(cfg: SimulationConfig):
    """Poles and field residues at the configured points, without any synthesis."""
    ie, prob = resonance_search(cfg)
    poles = np.array([p.pole for p in ie.poles], complex)
    resid = np.array([resonance.spatial_residues(prob.disc, p.pole, p.density_residue, prob.points,
                                                 eta=prob.eta, c=cfg.c) for p in ie.poles], complex)
    return poles, resid.reshape(poles.size, prob.points.shape[0]), prob


def decay_series(cfg: SimulationConfig) -> DecaySeries:
    """``|I1|`` and ``eps2`` at the single configured point, with a post-onset slope fit.

    When the incident spectrum does not vanish at the band edges (a truncated
    band used only for the decay fit) ``I1`` is not formed and reported as NaN.
    """
    if np.asarray(cfg.points).shape[0] != 1:
        raise ConfigError("points: decay needs a single observation point")
    ts = cfg.time_grid()
    if _edge_ratio(cfg) > EDGE_TOL:
        log.warning("incident spectrum does not vanish at the band edges; I1 column left as NaN")
        poles, resid, prob = _singular_data(cfg)
        A, band, i1 = prob.inc.spectrum, tuple(map(float, cfg.band)), np.full(ts.size, np.nan)
    else:
        res = run_fth_ss(cfg, asymptotic=False)
        synth = res.evaluator
        poles, resid, A, band, prob = synth.poles, synth.residues, synth.A, synth.band, synth.prob
        i1 = synth.I1(ts)[:, 0]
    onset = prob.inc.onset(cfg.h)
    if poles.size:
        q = singsub._quad_series(poles, resid, A, ts, *band, cfg.n_cheb)
        e2 = singsub.eps2(q, poles, resid, A, ts)[:, 0]
    else:
        e2 = np.zeros(ts.size)
    slope = singsub.fit_log_slope(ts, e2, onset)
    msg = "ok" if slope is not None else "fit refused: fewer than 10 post-onset samples above the floor"
    return DecaySeries(ts, np.abs(i1), e2, onset, slope, msg)
