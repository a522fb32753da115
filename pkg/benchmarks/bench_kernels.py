"""Benchmark the compiled demeaning kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--rows N] [--repeats R]

Times the fixed-effect absorption sweep (the hot loop behind every
regression in the Monte Carlo suites) on synthetic three-way panels of
increasing size, plus one end-to-end absorbed WLS fit per size.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from exposure_lens import kernels
from exposure_lens.regression import FixedEffectSpec, Frame, wls_absorbed


def make_instance(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    groups = (max(n // 200, 5), 51, 10)
    codes = np.stack([rng.integers(0, g, n) for g in groups]).astype(np.int64)
    w = rng.uniform(0.5, 3.0, n)
    k = 4
    X = rng.normal(size=(n, k))
    effects = [rng.normal(size=g) for g in groups]
    y = X @ rng.normal(size=k) + sum(effects[d][codes[d]] for d in range(3)) + rng.normal(size=n)
    mat = np.column_stack([y, X])
    return mat, codes, w, groups


def time_backend(mat, codes, w, backend: str, repeats: int) -> tuple[float, int]:
    best = float("inf")
    sweeps = 0
    for _ in range(repeats):
        work = mat.copy()
        start = time.perf_counter()
        _, sweeps = kernels.demean(work, codes, w, tol=1e-8, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, sweeps


def time_fit(n: int, backend: str, repeats: int) -> float:
    import os

    rng = np.random.default_rng(1)
    groups = (max(n // 200, 5), 51, 10)
    cols = {
        "occ": rng.integers(0, groups[0], n),
        "state": rng.integers(0, groups[1], n),
        "year": rng.integers(0, groups[2], n),
        "w": rng.uniform(0.5, 3.0, n),
    }
    X = rng.normal(size=(n, 4))
    for j in range(4):
        cols[f"x{j}"] = X[:, j]
    cols["y"] = X @ rng.normal(size=4) + rng.normal(size=n)
    frame = Frame(cols)
    env = "EXPOSURE_LENS_PURE_PYTHON"
    old = os.environ.get(env)
    if backend == "numpy":
        os.environ[env] = "1"
    else:
        os.environ.pop(env, None)
    try:
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            wls_absorbed(
                frame, "y ~ x0 + x1 + x2 + x3",
                FixedEffectSpec(("occ", "state", "year")), weights="w", cluster="state",
            )
            best = min(best, time.perf_counter() - start)
        return best
    finally:
        if old is None:
            os.environ.pop(env, None)
        else:
            os.environ[env] = old


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=0, help="Single size instead of the sweep.")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not kernels.HAVE_COMPILED:
        print("compiled kernel unavailable; only the numpy backend will run")
    sizes = [args.rows] if args.rows else [10_000, 100_000, 500_000]

    print(f"{'rows':>9}  {'backend':>8}  {'demean (s)':>11}  {'sweeps':>6}  {'full fit (s)':>12}")
    for n in sizes:
        mat, codes, w, _ = make_instance(n)
        for backend in ("numpy", "cython") if kernels.HAVE_COMPILED else ("numpy",):
            t, sweeps = time_backend(mat, codes, w, backend, args.repeats)
            fit_t = time_fit(n, backend, args.repeats)
            print(f"{n:>9}  {backend:>8}  {t:>11.4f}  {sweeps:>6}  {fit_t:>12.4f}")
        if kernels.HAVE_COMPILED:
            a, _ = kernels.demean(mat.copy(), codes, w, backend="numpy")
            b, _ = kernels.demean(mat.copy(), codes, w, backend="cython")
            print(f"{'':>9}  backends agree to {np.abs(a - b).max():.2e}")


if __name__ == "__main__":
    main()
