"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each workload runs on both implementations; outputs are checked for
agreement before timings are reported (median wall time per call).
"""
import argparse
import math
import statistics
import sys
import time

import numpy as np

from gashomotopy import _kernels_py

try:
    from gashomotopy import _ckernels
except ImportError:
    _ckernels = None

A = np.array([[-0.5, 1.0], [-1.0, -0.5]])


def _spiral(t, x):
    return A @ x


def _dopri(mod, t_end):
    # snap disabled so the whole horizon is stepped
    return mod.dopri45(_spiral, 0.0, np.array([1.0, 2.0]), t_end, 1e-10, 1e-12, math.inf, 0.0, 0.0,
                       np.zeros(2), -math.inf, math.inf, 1e12, 10 ** 7)


WORKLOADS = {
    "dopri45 spiral, t = 200": (lambda m: _dopri(m, 200.0), lambda r: r[1][-1]),
    "halton 20000 x 6": (lambda m: m.halton(20000, 6, 20), lambda r: r),
    "angle_increments 200000": (
        lambda m: m.angle_increments(np.linspace(0.0, 6 * math.pi, 200000)), lambda r: np.asarray(r)),
}


def _time(fn, repeat):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; run: python3 setup.py build_ext --inplace")
        return 1
    print(f"{'workload':<28} {'python [s]':>12} {'cython [s]':>12} {'speedup':>9}")
    for name, (run, key) in WORKLOADS.items():
        ref, got = key(run(_kernels_py)), key(run(_ckernels))
        if not np.allclose(ref, got, rtol=1e-9, atol=1e-12):
            print(f"{name}: implementations disagree", file=sys.stderr)
            return 2
        tp = _time(lambda: run(_kernels_py), args.repeat)
        tc = _time(lambda: run(_ckernels), args.repeat)
        print(f"{name:<28} {tp:>12.4f} {tc:>12.4f} {tp / tc:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
