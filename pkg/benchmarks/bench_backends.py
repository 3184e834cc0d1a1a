#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Both callables always exist in effdim._kernels: the jitted one is what
the package uses when numba is enabled (EFFDIM_NUMBA unset or truthy),
the _py_ original is the fallback path.  Usage:

    python3 benchmarks/bench_backends.py
"""

import time

import numpy as np

from effdim import _kernels
from effdim.model import LinearGaussianProblem


def best_of(fn, repeats=5):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_dare():
    print("DARE fixed-point sweep (tol 1e-12)")
    print(f"{'m':>5} {'q/r':>8} {'iters':>6} {'numpy':>10} {'numba':>10} "
          f"{'speedup':>8}")
    for m, q, r in ((5, 1.0, 1.0), (50, 1.0, 1.0), (100, 1.0, 1.0),
                    (100, 0.1, 10.0)):
        problem = LinearGaussianProblem.isotropic(m, q, r)
        args = (problem.A, problem.Q, problem.H, problem.R, problem.Sigma0,
                1e-12, 100_000)
        if _kernels.NUMBA_ENABLED:
            _kernels.dare_fixed_point(*args)  # compile/cache
        _, iters, _ = _kernels._py_dare_fixed_point(*args)
        t_py = best_of(lambda: _kernels._py_dare_fixed_point(*args))
        t_jit = best_of(lambda: _kernels.dare_fixed_point(*args))
        tag = "" if _kernels.NUMBA_ENABLED else " (numba disabled)"
        print(f"{m:>5} {q / r:>8.2f} {iters:>6d} {t_py * 1e3:>9.2f}ms "
              f"{t_jit * 1e3:>9.2f}ms {t_py / t_jit:>7.1f}x{tag}")


def bench_resample():
    print("\nsystematic resampling")
    print(f"{'N':>9} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n in (1_000, 100_000, 1_000_000):
        w = rng.random(n)
        w /= w.sum()
        cdf = np.cumsum(w)
        points = (np.arange(n) + rng.random()) / n
        if _kernels.NUMBA_ENABLED:
            _kernels.systematic_resample(cdf, points)
        t_py = best_of(lambda: _kernels._py_systematic_resample(cdf, points))
        t_jit = best_of(lambda: _kernels.systematic_resample(cdf, points))
        print(f"{n:>9} {t_py * 1e3:>9.2f}ms {t_jit * 1e3:>9.2f}ms "
              f"{t_py / t_jit:>7.1f}x")


if __name__ == "__main__":
    print(f"numba enabled: {_kernels.NUMBA_ENABLED}\n")
    bench_dare()
    bench_resample()
