"""Compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``; prints the median wall time
of each assembly routine for both backends and their maximum difference.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from artifact import _kernels_py, geometry, helmholtz

try:
    from artifact import _kernels
except ImportError:  # extension not built
    _kernels = None


def _time(fn, repeat):
    out, ts = None, []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t)
    return statistics.median(ts), out


def cases(N):
    circ = geometry.discretize(geometry.make_curve("unit-circle"), N)
    arc = geometry.discretize(geometry.make_curve("circular-arc"), N)
    logw, lg = helmholtz._closed_tables(N)
    W, lnc = helmholtz._arc_tables(N)
    for k in (20.0, 20.0 - 0.3j):
        yield (f"closed_blocks N={N} k={k}",
               lambda m, k=k: m.closed_blocks(*map(np.ascontiguousarray, (circ.nodes, circ.d1, circ.d2)), complex(k), logw, lg))
        yield (f"arc_matrix    N={N} k={k}",
               lambda m, k=k: m.arc_matrix(*map(np.ascontiguousarray, (arc.nodes, arc.jacobians)), lnc, W, complex(k)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, nargs="+", default=[128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'case':40s} {'numpy [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for N in args.N:
        for name, fn in cases(N):
            tp, a = _time(lambda: fn(_kernels_py), args.repeat)
            if _kernels is None:
                print(f"{name:40s} {1e3 * tp:12.2f}")
                continue
            tc, b = _time(lambda: fn(_kernels), args.repeat)
            a = a if isinstance(a, tuple) else (a,)
            b = b if isinstance(b, tuple) else (b,)
            diff = max(float(np.abs(x - y).max()) for x, y in zip(a, b))
            print(f"{name:40s} {1e3 * tp:12.2f} {1e3 * tc:12.2f} {tp / tc:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
