"""Benchmark the jitted iteration kernel against the pure-numpy fallback.

Runs the fused identity-split iteration for each eligible preset and prints
per-step timings, the speedup, and the maximum numerical drift between the
two implementations.  Usage:

    python3 benchmarks/benchmark_kernels.py [--steps N] [--reps R]
"""

import argparse
import time

import numpy as np

from stocadmm import kernels
from stocadmm.presets import build_preset
from stocadmm.solvers import SolverConfig


def bench_preset(name: str, steps: int, reps: int, seed: int = 0):
    preset = build_preset(name, seed=seed)
    if preset.kernel is None:
        print(f"{name}: no fused kernel (non-identity constraint), skipped")
        return
    spec = preset.spec
    ki = preset.kernel
    solver = SolverConfig(variant="stochastic", schedule="convex", t_max=steps)
    etas = np.array([solver.eta(k + 1, spec) for k in range(steps)])
    buf = preset.make_oracle(0).presample(steps)
    idx = buf.indices if buf.indices is not None else np.full(steps, -1, np.int64)
    noise = buf.noise if buf.noise is not None else np.zeros((steps, spec.d1))
    args = (ki.data, ki.targets, ki.theta1_kind, ki.mu, ki.theta2_coef,
            ki.theta2_kind, ki.radius, solver.beta, etas, idx, noise,
            np.array([steps], dtype=np.int64),
            np.zeros(spec.d1), np.zeros(spec.d2))

    def clock(fn):
        fn(*args)  # warm-up: JIT compile / cache touch
        best = float("inf")
        for _ in range(reps):
            t0 = time.perf_counter()
            out = fn(*args)
            best = min(best, time.perf_counter() - t0)
        return best, out

    py_s, py_out = clock(kernels.admm_identity_split_py)
    print(f"{name}: numpy fallback {py_s / steps * 1e6:8.2f} us/step")
    if kernels.NUMBA_ENABLED:
        nb_s, nb_out = clock(kernels.admm_identity_split)
        drift = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
                    for a, b in zip(py_out, nb_out))
        print(f"{name}: numba kernel   {nb_s / steps * 1e6:8.2f} us/step  "
              f"speedup x{py_s / nb_s:.1f}  max drift {drift:.2e}")
    else:
        print(f"{name}: numba kernel disabled (STOCADMM_NO_NUMBA or numba missing)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=100_000)
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    for name in ("lasso-split", "strongly-convex-lasso", "hinge-svm-split",
                 "fused-lasso-graph"):
        bench_preset(name, args.steps, args.reps, args.seed)


if __name__ == "__main__":
    main()
