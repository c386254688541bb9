"""Compiled vs numpy all-pairs scan used by fractional Hoelder norms.

    python benchmarks/bench_pair_scan.py [--grids 16x32,24x48,32x64] [--repeat 3]

Prints one CSV row per grid: n_r, n_theta, pairs, python_s, compiled_s, speedup, max_rel_diff.
"""
import argparse
import time

import numpy as np

from freeboundary import _kernels
from freeboundary.calculus import derivatives
from freeboundary.grid import DiskGrid


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--grids", default="16x32,24x48,32x64")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--s", type=float, default=0.75)
    args = ap.parse_args()
    print("n_r,n_theta,pairs,python_s,compiled_s,speedup,max_rel_diff")
    for spec in args.grids.split(","):
        n_r, n_t = (int(v) for v in spec.split("x"))
        g = DiskGrid(n_r, n_t)
        y1, y2 = g.y
        u = np.exp(y1) * np.cos(3 * y2) + np.abs(y1 - 0.2) ** 1.5
        D = derivatives(u, g, 1).reshape(2, -1)
        pts = g.y.reshape(2, -1)
        tp, vp = best_time(lambda: _kernels.pair_scan(D, pts, args.s, backend="python"), args.repeat)
        if _kernels.HAVE_COMPILED:
            tc, vc = best_time(lambda: _kernels.pair_scan(D, pts, args.s, backend="compiled"), args.repeat)
            diff = abs(vc - vp) / abs(vp)
            print(f"{n_r},{n_t},{g.size ** 2},{tp:.4f},{tc:.4f},{tp / tc:.2f},{diff:.2e}")
        else:
            print(f"{n_r},{n_t},{g.size ** 2},{tp:.4f},nan,nan,nan")


if __name__ == "__main__":
    main()
