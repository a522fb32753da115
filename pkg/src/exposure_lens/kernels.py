"""Weighted group-demeaning kernels.

Fixed-effect absorption alternates weighted within-group demeaning over
each factor dimension until the largest subtracted group mean falls below
tolerance. That sweep loop dominates the runtime of every regression in
the Monte Carlo suites, so it has a compiled core (Cython) with a
pure-numpy fallback selected at import time.

Set ``EXPOSURE_LENS_PURE_PYTHON=1`` to force the numpy backend;
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConvergenceError

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

HAVE_COMPILED = _compiled is not None


def active_backend() -> str:
    if os.environ.get("EXPOSURE_LENS_PURE_PYTHON"):
        return "numpy"
    return "cython" if HAVE_COMPILED else "numpy"


def _demean_numpy(
    mat: np.ndarray,
    codes: np.ndarray,
    counts: np.ndarray,
    weights: np.ndarray,
    tol: float,
    max_sweeps: int,
) -> int:
    n_dims = codes.shape[0]
    group_w = [np.bincount(codes[d], weights=weights, minlength=counts[d]) for d in range(n_dims)]
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for d in range(n_dims):
            idx = codes[d]
            for j in range(mat.shape[1]):
                sums = np.bincount(idx, weights=weights * mat[:, j], minlength=counts[d])
                means = sums / group_w[d]
                mat[:, j] -= means[idx]
                delta = float(np.max(np.abs(means)))
                if delta > max_delta:
                    max_delta = delta
        if max_delta < tol:
            return sweep
    raise ConvergenceError(
        f"fixed-effect absorption did not converge in {max_sweeps} sweeps "
        f"(last change {max_delta:.3e}, tol {tol:.0e})"
    )


def demean(
    mat: np.ndarray,
    codes: np.ndarray,
    weights: np.ndarray,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
    backend: str | None = None,
) -> tuple[np.ndarray, int]:
    """Residualize columns of ``mat`` on the group structure in ``codes``.

    Parameters
    ----------
    mat : (n, k) array, overwritten in place (a float64 copy is made if
        the input is not float64 and C-contiguous).
    codes : (d, n) integer array of group labels per dimension, each
        factorized to 0..G_d-1.
    weights : (n,) positive weights.
    tol : convergence threshold on the largest subtracted group mean.
    max_sweeps : sweep cap; exceeding it raises ``ConvergenceError``.

    Returns the demeaned matrix and the number of sweeps used.
    """
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat[:, None]
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    if codes.ndim == 1:
        codes = codes[None, :]
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    counts = (codes.max(axis=1) + 1).astype(np.int64)

    chosen = backend or active_backend()
    if chosen == "cython" and HAVE_COMPILED:
        sweeps = _compiled.demean_inplace(mat, codes, counts, weights, tol, max_sweeps)
        if sweeps < 0:
            raise ConvergenceError(
                f"fixed-effect absorption did not converge in {max_sweeps} sweeps (tol {tol:.0e})"
            )
        return mat, sweeps
    return mat, _demean_numpy(mat, codes, counts, weights, tol, max_sweeps)
