"""Time the compiled and numpy sm-MGDA kernels against the generic loop.

Usage: python benchmarks/bench_kernels.py [--m 50] [--iters 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from smgda import kernels
from smgda import solver as S
from smgda.manifolds import Stiefel
from smgda.penalty import make_penalized
from smgda.problems import generate_quadratic, make_problem, practical_L


def bench(pp, cfg, backend, repeat):
    best, res = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = S.run(pp, cfg, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, res


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=50)
    ap.add_argument("--iters", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--mu-y", type=float, default=1.0)
    a = ap.parse_args()

    inst = generate_quadratic(a.m, a.m, 5.0, a.mu_y, seed=0)
    pp = make_penalized(make_problem(inst), Stiefel(a.m, 1), 10.0, 1000.0)
    cfg = S.practical_config(practical_L(inst), max_iters=a.iters, record_every=a.iters)

    backends = kernels.available_backends() + ["generic"]
    print(f"m = n = {a.m}, {a.iters} iterations, best of {a.repeat}")
    ref = None
    for b in backends:
        sec, res = bench(pp, cfg, b, a.repeat)
        if ref is None:
            ref = res
        dev = max(np.abs(res.state.x - ref.state.x).max(), np.abs(res.state.y - ref.state.y).max())
        print(f"{b:>8}: {sec:8.3f} s  {res.iters / sec:12.0f} it/s  max dev {dev:.1e}")


if __name__ == "__main__":
    main()
