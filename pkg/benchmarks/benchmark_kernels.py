#!/usr/bin/env python3
"""Benchmark the jitted kernels against the plain-numpy fallback.

Times the forward pass, the gradient computation, and the fused GD
training loop at several widths, and prints a speedup table. Run from
the repository root:

    python3 benchmarks/benchmark_kernels.py [--widths 100,1000,5000]
                                            [--steps 200] [--repeats 3]

Numba compilation happens once per function signature; the first jitted
call is excluded from timing via a warmup pass.
"""

import argparse
import time

import numpy as np

from phasegrid import kernels
from phasegrid.data import augment, synthetic_1d


def problem(m, seed=0):
    rng = np.random.default_rng(seed)
    data = synthetic_1d()
    Xb = augment(data.X)
    d = data.d
    scale = m ** -0.5
    W1 = scale * rng.standard_normal((m, d + 1))
    W2 = scale * rng.standard_normal((m, m + 1))
    A = scale * rng.standard_normal((data.d_out, m))
    return W1, W2, A, Xb, data.Y


def best_of(repeats, fn):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", default="100,1000,5000")
    ap.add_argument("--steps", type=int, default=200,
                    help="GD steps per train-loop timing")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    widths = [int(w) for w in args.widths.split(",")]

    if not kernels.USING_NUMBA:
        raise SystemExit("numba path is disabled (PHASEGRID_DISABLE_NUMBA); "
                         "nothing to compare")

    jit = {"forward": kernels.batch_forward,
           "gradients": kernels.batch_gradients,
           "train_loop": kernels.gd_train_loop}
    ref = {"forward": kernels.numpy_forward,
           "gradients": kernels.numpy_gradients,
           "train_loop": kernels.numpy_train_loop}

    print(f"{'width':>7} {'kernel':<12} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for m in widths:
        W1, W2, A, Xb, Y = problem(m)
        calls = {
            "forward": lambda f: f(W1, W2, A, Xb, 1.0, 1.0),
            "gradients": lambda f: f(W1, W2, A, Xb, Y, 1.0, 1.0),
            "train_loop": lambda f: f(W1.copy(), W2.copy(), A.copy(), Xb, Y,
                                      1.0, 1.0, 1e-6, args.steps, 1e-16, 1e12),
        }
        for name, call in calls.items():
            call(jit[name])  # warmup / compile
            t_np = best_of(args.repeats, lambda: call(ref[name]))
            t_nb = best_of(args.repeats, lambda: call(jit[name]))
            print(f"{m:>7} {name:<12} {t_np:>9.4f}s {t_nb:>9.4f}s "
                  f"{t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
