"""Hot numeric kernels, JIT-compiled when numba is available.

Two inner loops dominate the package's runtime: the Riccati fixed-point
sweep (hundreds of small-matrix updates per solve) and systematic
resampling (an O(N) scan per filter step).  Both are written once in
plain numpy below and compiled with ``numba.njit`` unless the env flag

    EFFDIM_NUMBA=0

selects the pure-numpy fallback (any of 0/false/no/off disables; numba
failing to import also falls back).  The matrix-heavy particle updates
elsewhere are BLAS-bound and stay in vectorized numpy on purpose.
``benchmarks/bench_backends.py`` times the two paths side by side.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("EFFDIM_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


def _py_dare_fixed_point(A, Q, H, R, P0, tol, max_iter):
    """Iterate the Kalman covariance map until the Frobenius change is small.

    One sweep: X = A P A' + Q; S = H X H' + R; P <- X - (H X)' S^{-1} (H X),
    symmetrized.  Stops when ||P_new - P||_F <= tol * (1 + ||P_new||_F).
    Returns (P, iterations, last_change).
    """
    P = P0.copy()
    change = np.inf
    it = 0
    while it < max_iter:
        X = A @ P @ A.T + Q
        HX = H @ X
        S = H @ X @ H.T + R
        Pn = X - HX.T @ np.linalg.solve(S, HX)
        Pn = 0.5 * (Pn + Pn.T)
        change = np.sqrt(np.sum((Pn - P) ** 2))
        P = Pn
        it += 1
        if change <= tol * (1.0 + np.sqrt(np.sum(P ** 2))):
            break
    return P, it, change


def _loop_systematic_resample(cdf, points):
    """Indices of the particles hit by ordered points against a weight CDF.

    ``points`` must be sorted ascending in [0, 1); ``cdf`` is the running
    sum of normalized weights.  Point p selects the first index i with
    cdf[i] >= p.  Single-pass merge, written for njit.
    """
    n_points = points.shape[0]
    n = cdf.shape[0]
    idx = np.empty(n_points, dtype=np.int64)
    i = 0
    for j in range(n_points):
        while i < n - 1 and cdf[i] < points[j]:
            i += 1
        idx[j] = i
    return idx


def _py_systematic_resample(cdf, points):
    """Vectorized equivalent of the merge loop (the numpy fallback)."""
    idx = np.searchsorted(cdf, points, side="left")
    return np.minimum(idx, cdf.shape[0] - 1).astype(np.int64)


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    dare_fixed_point = njit(cache=True)(_py_dare_fixed_point)
    systematic_resample = njit(cache=True)(_loop_systematic_resample)
else:
    dare_fixed_point = _py_dare_fixed_point
    systematic_resample = _py_systematic_resample
