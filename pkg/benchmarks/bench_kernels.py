"""Compare the compiled ray-tracing kernel with the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 32 64 128] [--angles 30]

Prints build time per backend and checks that both produce the same matrix.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from partnorm import _kernels
from partnorm._kernels import _fallback
from partnorm.linop import default_det_count, uniform_angles


def best_of(fn, repeats):
    best, out = np.inf, None
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def as_csr(triplets, shape):
    rows, cols, vals = triplets
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--angles", type=int, default=30)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if _kernels.BACKEND != "cython":
        print("compiled kernel not available; only the fallback is timed")
    print(f"{'n':>5} {'python [s]':>11} {'cython [s]':>11} {'speed-up':>9} {'max |diff|':>11}")
    for n in args.sizes:
        angles = uniform_angles(args.angles)
        det = default_det_count(n)
        shape = (args.angles * det, n * n)
        t_py, ref = best_of(lambda: _fallback.siddon_system(n, n, angles, det), args.repeats)
        if _kernels.BACKEND == "cython":
            t_cy, got = best_of(lambda: _kernels.siddon_system(n, n, angles, det), args.repeats)
            diff = abs(as_csr(ref, shape) - as_csr(got, shape)).max()
            print(f"{n:5d} {t_py:11.4f} {t_cy:11.4f} {t_py / t_cy:9.1f} {diff:11.2e}")
        else:
            print(f"{n:5d} {t_py:11.4f} {'-':>11} {'-':>9} {'-':>11}")


if __name__ == "__main__":
    main()
