"""Benchmark the JIT kernels against their pure-numpy fallbacks.

Runs each kernel at a production-ish size on both paths (the JIT warms up
before timing) and prints a small table. Invoke from the repo root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from bikeml.kernels import BACKEND, logreg_fit, logreg_fit_py, run_reservoir, run_reservoir_py


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_reservoir():
    rng = np.random.default_rng(0)
    n_res, dim, steps = 100, 12, 20000
    w_in = rng.uniform(-1, 1, (n_res, dim + 1))
    w = rng.uniform(-1, 1, (n_res, n_res))
    w *= 0.9 / np.max(np.abs(np.linalg.eigvals(w)))
    inputs = np.ascontiguousarray(rng.normal(0, 1, (steps, dim)))
    run_reservoir(w_in, w, 0.3, inputs[:10])  # JIT warm-up
    jit = time_call(run_reservoir, w_in, w, 0.3, inputs)
    py = time_call(run_reservoir_py, w_in, w, 0.3, inputs, repeats=2)
    return f"reservoir ({steps} steps x {n_res} units)", jit, py


def bench_logreg():
    rng = np.random.default_rng(1)
    n, d, k = 200, 20, 8
    x = np.ascontiguousarray(rng.normal(size=(n, d)))
    y = np.zeros((n, k))
    y[np.arange(n), rng.integers(0, k, n)] = 1.0
    logreg_fit(x, y, 0.0, 0.1, 10, 1e-6)  # JIT warm-up
    jit = time_call(logreg_fit, x, y, 0.0, 0.1, 10000, 1e-6, repeats=3)
    py = time_call(logreg_fit_py, x, y, 0.0, 0.1, 10000, 1e-6, repeats=1)
    return f"logistic descent ({n}x{d}, {k} classes, 10k iters)", jit, py


def main():
    print(f"active backend: {BACKEND}")
    rows = [bench_reservoir(), bench_logreg()]
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  {'jit (s)':>10}  {'numpy (s)':>10}  {'speedup':>8}")
    for name, jit, py in rows:
        print(f"{name.ljust(width)}  {jit:10.4f}  {py:10.4f}  {py / jit:7.1f}x")
    if BACKEND == "numpy":
        print("note: numba unavailable or disabled; both columns ran the fallback")


if __name__ == "__main__":
    main()
