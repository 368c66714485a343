"""Command-line front end.

Every subcommand reads a YAML config, applies ``--override key=value``
pairs, validates the result before computing anything and writes its
outputs plus ``manifest.json`` into ``--out``.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 resource guard.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, helmholtz, pipeline, quadrature, resonance, singsub
from .pipeline import ConfigError, ResourceGuardError, SimulationConfig, StageError

log = logging.getLogger("artifact")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GUARD = 0, 2, 3, 4

NUMERICAL_ERRORS = (StageError, helmholtz.SingularOperatorError, singsub.BranchMismatchError,
                    singsub.QuadratureResolutionError, resonance.DepthLimitError, resonance.ResidueContourError,
                    np.linalg.LinAlgError, FloatingPointError)


def _fmt(x: float) -> str:
    return repr(float(x))


def load_config(args) -> SimulationConfig:
    if args.config:
        try:
            d = yaml.safe_load(Path(args.config).read_text()) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{args.config}: {e}") from None
        except OSError as e:
            raise ConfigError(str(e)) from None
        if not isinstance(d, dict):
            raise ConfigError(f"{args.config}: top level must be a mapping")
    else:
        d = SimulationConfig().to_dict()
    for item in args.override or []:
        if "=" not in item:
            raise ConfigError(f"--override expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pipeline.apply_override(d, k.strip(), v)
    if getattr(args, "mode", None):
        d["mode"] = args.mode
    if args.workers is not None:
        d["workers"] = args.workers
    if args.seed is not None:
        d["seed"] = args.seed
    return SimulationConfig.from_dict(d)


def write_manifest(out: Path, command: str, cfg: SimulationConfig, wall: float, argv, extra=None) -> None:
    from .kernels import BACKEND
    man = {
        "command": command,
        "argv": list(argv),
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "wall_time": wall,
        "versions": {"artifact": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version(), "kernels": BACKEND},
    }
    if extra:
        man.update(extra)
    (out / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True, default=str))
    (out / "config.yaml").write_text(cfg.to_yaml())


# ---------------------------------------------------------------------------
# Subcommands


def cmd_resonances(cfg: SimulationConfig, out: Path, args) -> dict:
    ie, prob = pipeline.resonance_search(cfg)
    resonance.write_pole_csv(out / "poles.csv", ie.poles, prob.disc)
    with open(out / "approximants.jsonl", "w") as fh:
        for (a, b), r in zip(ie.partition, ie.approximants):
            fh.write(json.dumps({"interval": [a, b], "record": r.to_record()}, sort_keys=True) + "\n")
    info = {"n_poles": len(ie.poles), "intervals": len(ie.partition), "complete": ie.complete,
            "factorizations": prob.solver.counters.factorizations}
    if args.cross_validate:
        rows = pipeline.cross_validate(cfg, ie, prob)
        with open(out / "cross_validation.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_rho", "im_rho", "relevance", "ie_distance", "relevant", "missing"])
            for r in rows:
                w.writerow([_fmt(r["pole"].real), _fmt(r["pole"].imag), _fmt(r["relevance"]),
                            _fmt(r["ie_distance"]), int(r["relevant"]), int(r["missing"])])
        missing = [r for r in rows if r["missing"]]
        info.update(re_poles=len(rows), relevant_missing=len(missing))
        print(f"cross-validation: {len(rows)} RE poles, {len(missing)} relevant missing from IE")
    print(f"{len(ie.poles)} resonance(s) written to {out / 'poles.csv'}")
    return info


def cmd_field(cfg: SimulationConfig, out: Path, args) -> dict:
    res = pipeline.run(cfg)
    res.write_csv(out / "field.csv")
    resonance.write_pole_csv(out / "poles.csv", res.poles, None)
    diag = {k: v for k, v in res.diagnostics.items() if k not in ("ie", "subtracted")}
    info = {"diagnostics": diag, "provenance": res.provenance}
    if args.error_against:
        t_ref, u_ref = pipeline.read_field_csv(args.error_against)
        if t_ref.shape != res.times.shape or u_ref.shape != res.values.shape or \
                not np.allclose(t_ref, res.times, rtol=0, atol=1e-12):
            raise ConfigError(f"--error-against: grid of {args.error_against} does not match this run")
        err = float(np.abs(u_ref - res.values).max())
        info["max_error"] = err
        print(f"max error against {args.error_against}: {err!r}")
    print(f"{res.times.size} time(s) x {res.points.shape[0]} point(s) written to {out / 'field.csv'}")
    return info


def cmd_snapshot(cfg: SimulationConfig, out: Path, args) -> dict:
    sn = cfg.snapshot
    try:
        bounds, nx, ny, times = sn["bounds"], int(sn["nx"]), int(sn["ny"]), sn["times"]
    except KeyError as e:
        raise ConfigError(f"snapshot: missing {e}") from None
    data = pipeline.run_snapshot(cfg, bounds, nx, ny, times)
    names = []
    for i, (t, frame) in enumerate(sorted(data["frames"].items())):
        name = f"snapshot_{i:04d}.bin"
        pipeline.write_snapshot(out / name, frame, nx, ny, bounds, t)
        names.append(name)
    masked = int(data["mask"].sum())
    print(f"{len(names)} snapshot(s) written, {masked} masked point(s)")
    return {"files": names, "masked": masked}


def cmd_decay(cfg: SimulationConfig, out: Path, args) -> dict:
    ds = pipeline.decay_series(cfg)
    with open(out / "decay.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "abs_I1", "eps2"])
        for t, a, e in zip(ds.times, ds.I1, ds.eps2):
            w.writerow([_fmt(t), _fmt(a), _fmt(e)])
    fit = {"onset": ds.onset, "slope": ds.slope, "h": cfg.h, "message": ds.fit_message}
    (out / "decay_fit.json").write_text(json.dumps(fit, indent=2, sort_keys=True))
    print(f"onset t = {ds.onset:g}; fitted eps2 log-slope: "
          f"{'refused' if ds.slope is None else format(ds.slope, '.4g')}")
    return fit


def cmd_compare(cfg: SimulationConfig, out: Path, args) -> dict:
    ref = pipeline.reference_brute_force(cfg.with_overrides(J=max(cfg.sweep)), int(cfg.reference_multiplier))
    rows = []
    for J in cfg.sweep:
        c = cfg.with_overrides(J=int(J))
        e_fth = pipeline.run_fth(c).max_error(ref)
        e_ss = pipeline.run_fth_ss(c).max_error(ref)
        rows.append((int(J), e_fth, e_ss))
        print(f"J={J}: FTH {e_fth:.3e}  FTH-SS {e_ss:.3e}")
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["J", "err_fth", "err_fth_ss"])
        for J, a, b in rows:
            w.writerow([J, _fmt(a), _fmt(b)])
    return {"rows": rows}


def cmd_window_debug(cfg: SimulationConfig, out: Path, args) -> dict:
    inc = cfg.incident_field()
    win = {"H": quadrature.DEFAULT_H, "alpha": quadrature.DEFAULT_ALPHA, "rho": quadrature.DEFAULT_RHO}
    win.update(cfg.window)
    T = inc.T_inc if math.isfinite(inc.T_inc) else float(cfg.time_grid()[-1])
    part = quadrature.WindowPartition(T, win["H"], win["alpha"], win["rho"])
    ts = np.linspace(-part.H, T + part.H, 2001)
    with open(out / "windows.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"w{k}" for k in range(1, part.K + 1)] + ["sum"])
        for t in ts:
            vals = [part.window(k, t) for k in range(1, part.K + 1)]
            w.writerow([_fmt(t)] + [_fmt(v) for v in vals] + [_fmt(sum(vals))])
    grid = np.linspace(float(cfg.band[0]), float(cfg.band[1]), int(cfg.J))
    sig = lambda t: np.real(inc.signal(t)) if inc.profile == "chirp" else inc.signal(t)
    with open(out / "spectra.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega"] + [f"abs_A{k}" for k in range(1, part.K + 1)])
        cols = [np.abs(quadrature.windowed_spectrum(sig, k, part, grid).samples) for k in range(1, part.K + 1)]
        for j, om in enumerate(grid):
            w.writerow([_fmt(om)] + [_fmt(c[j]) for c in cols])
    print(f"{part.K} window(s); partition tail {part.tail:.3e}")
    return {"K": part.K, "tail": part.tail}


COMMANDS = {
    "resonances": cmd_resonances,
    "field": cmd_field,
    "snapshot": cmd_snapshot,
    "decay": cmd_decay,
    "compare": cmd_compare,
    "window-debug": cmd_window_debug,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fthss", description="Time-domain 2D scattering by FTH-SS.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML configuration file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--mode", choices=["fth", "fth-ss"])
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="dotted config key, value parsed as YAML; repeatable")
        sp.add_argument("--cross-validate", action="store_true", help="resonances: RE cross-check")
        sp.add_argument("--error-against", metavar="CSV", help="field: reference time series")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = load_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        extra = COMMANDS[args.command](cfg, out, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as e:
        print(f"resource guard: {e}", file=sys.stderr)
        return EXIT_GUARD
    except NUMERICAL_ERRORS as e:
        stage = getattr(e, "stage", args.command)
        print(f"numerical failure [{stage}]: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    write_manifest(out, args.command, cfg, time.perf_counter() - t0, argv, {"result": extra})
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
