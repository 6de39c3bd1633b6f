"""Hot numeric kernels, with optional numba acceleration.

The two entry points, :func:`additive_gram` and :func:`se_cross`, dominate the
runtime of likelihood evaluation and acquisition-table construction.  Both
exist in two functionally identical flavours:

* a pure-numpy implementation (always available), and
* a numba ``@njit`` implementation compiled at import time.

The numba path is used when numba imports cleanly and the environment variable
``ADDBO_NUMBA`` is unset or truthy; set ``ADDBO_NUMBA=0`` to force the numpy
fallback.  ``benchmarks/bench_kernels.py`` times the two side by side.

Variable groups are passed in a flattened (CSR-like) layout so the compiled
kernels never see Python containers: ``group_idx[group_ptr[m]:group_ptr[m+1]]``
holds the variable indices of group ``m``.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_enabled() -> bool:
    flag = os.environ.get("ADDBO_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def additive_gram_numpy(X, group_idx, group_ptr, scales, inv_two_lsq):
    """Gram matrix of the additive squared-exponential kernel (no noise term).

    ``inv_two_lsq[k]`` is ``1 / (2 * lengthscale[k]**2)``; each group
    contributes ``scales[m] * exp(-sum_k inv_two_lsq[k] * diff_k**2)``.
    """
    n = X.shape[0]
    K = np.zeros((n, n))
    for m in range(scales.size):
        idx = group_idx[group_ptr[m]:group_ptr[m + 1]]
        S = X[:, idx]
        W = inv_two_lsq[idx]
        sq = (S * S) @ W
        expo = sq[:, None] + sq[None, :] - 2.0 * ((S * W) @ S.T)
        np.maximum(expo, 0.0, out=expo)
        K += scales[m] * np.exp(-expo)
    return K


def se_cross_numpy(A, B, scale, inv_two_lsq):
    """Cross kernel block of one squared-exponential component.

    ``A`` is ``(m, d)``, ``B`` is ``(n, d)``; both already restricted to the
    group's variables, with ``inv_two_lsq`` the matching ``(d,)`` weights.
    """
    sq_a = (A * A) @ inv_two_lsq
    sq_b = (B * B) @ inv_two_lsq
    expo = sq_a[:, None] + sq_b[None, :] - 2.0 * ((A * inv_two_lsq) @ B.T)
    np.maximum(expo, 0.0, out=expo)
    return scale * np.exp(-expo)


# ---------------------------------------------------------------------------
# loop bodies shared with the numba path
# ---------------------------------------------------------------------------

def _additive_gram_loops(X, group_idx, group_ptr, scales, inv_two_lsq, out):
    n = X.shape[0]
    n_groups = scales.size
    for a in range(n):
        for b in range(a, n):
            acc = 0.0
            for m in range(n_groups):
                expo = 0.0
                for t in range(group_ptr[m], group_ptr[m + 1]):
                    k = group_idx[t]
                    diff = X[a, k] - X[b, k]
                    expo += diff * diff * inv_two_lsq[k]
                acc += scales[m] * np.exp(-expo)
            out[a, b] = acc
            out[b, a] = acc


def _se_cross_loops(A, B, scale, inv_two_lsq, out):
    m, d = A.shape
    n = B.shape[0]
    for i in range(m):
        for j in range(n):
            expo = 0.0
            for k in range(d):
                diff = A[i, k] - B[j, k]
                expo += diff * diff * inv_two_lsq[k]
            out[i, j] = scale * np.exp(-expo)


HAVE_NUMBA = False
additive_gram_numba = None
se_cross_numba = None

if _numba_enabled():
    try:
        from numba import njit

        _gram_jit = njit(cache=True)(_additive_gram_loops)
        _cross_jit = njit(cache=True)(_se_cross_loops)

        def additive_gram_numba(X, group_idx, group_ptr, scales, inv_two_lsq):
            out = np.empty((X.shape[0], X.shape[0]))
            _gram_jit(X, group_idx, group_ptr, scales, inv_two_lsq, out)
            return out

        def se_cross_numba(A, B, scale, inv_two_lsq):
            out = np.empty((A.shape[0], B.shape[0]))
            _cross_jit(A, B, scale, inv_two_lsq, out)
            return out

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised only without numba
        HAVE_NUMBA = False

if HAVE_NUMBA:
    BACKEND = "numba"
    additive_gram = additive_gram_numba
    se_cross = se_cross_numba
else:
    BACKEND = "numpy"
    additive_gram = additive_gram_numpy
    se_cross = se_cross_numpy


def backend_name() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND
