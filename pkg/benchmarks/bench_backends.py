"""Compare the compiled and pure-numpy regression kernels.

Times ``regress_batch`` on one double-gyre step and a full FTLE pipeline run
for each available backend, and checks the two agree.

    python benchmarks/bench_backends.py [--tracers 5000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from lgrflow import backend
from lgrflow.lgr import RCOND_TOL, KernelConfig
from lgrflow.neighbors import batch_neighbors
from lgrflow.pipeline import compute_metrics
from lgrflow.synthetic import advect, double_gyre, random_seeds


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tracers", type=int, default=5000)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    n = args.tracers
    tset = advect(double_gyre(), random_seeds(n, ((0, 2), (0, 1)), 0), 0.0, 0.1 * args.steps, 0.1)
    cfg = KernelConfig(k=args.k, s=float(np.sqrt(2.0 / n)))
    x0 = np.ascontiguousarray(tset.positions_at(np.arange(n), 0))
    x1 = np.ascontiguousarray(tset.positions_at(np.arange(n), 1))
    centers = np.arange(n, dtype=np.intp)
    nbrs = np.ascontiguousarray(batch_neighbors(x0, centers, tset.track_ids, cfg.k), dtype=np.intp)

    print(f"tracers={n} k={cfg.k} steps={args.steps} backends={sorted(backend.BACKENDS)}")
    kernel_out, kernel_t, pipe_t, pipe_out = {}, {}, {}, {}
    for name in sorted(backend.BACKENDS):
        kern = backend.get_backend(name)
        kernel_t[name], kernel_out[name] = best_of(
            lambda: kern.regress_batch(x0, x1, centers, nbrs, cfg.s, cfg.gamma, RCOND_TOL, 3), args.repeat)
        pipe_t[name], pipe_out[name] = best_of(
            lambda: compute_metrics(tset, cfg, 0, args.steps, ["ftle"], backend=name)["ftle"],
            max(1, args.repeat // 2))
        print(f"{name:>9}: regress_batch {kernel_t[name] * 1e3:8.2f} ms   "
              f"ftle pipeline {pipe_t[name]:7.3f} s")
    if len(backend.BACKENDS) == 2:
        diff = np.nanmax(np.abs(kernel_out["compiled"][0] - kernel_out["python"][0]))
        fdiff = np.max(np.abs(pipe_out["compiled"].values - pipe_out["python"].values))
        print(f"speedup: kernel {kernel_t['python'] / kernel_t['compiled']:.1f}x, "
              f"pipeline {pipe_t['python'] / pipe_t['compiled']:.2f}x")
        print(f"max |compiled - python|: jacobians {diff:.2e}, ftle {fdiff:.2e}")


if __name__ == "__main__":
    main()
