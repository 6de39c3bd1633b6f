"""Squared-exponential component kernels and their additive combination.

Every component kernel shares one D-dimensional lengthscale vector; component
``i`` over variable group ``G_i`` is

    k_i(x, x') = s_i * exp(-0.5 * sum_{k in G_i} (x_k - x'_k)^2 / l_k^2)

with scale ``s_i = |G_i| / sum_j |G_j|`` so the additive kernel has unit
diagonal.  Matrix-level routines are dispatched through :mod:`addbo.backend`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import backend
from .graphs import Decomposition


@dataclass(frozen=True)
class KernelParams:
    """Shared lengthscale vector and observation noise variance."""

    lengthscales: np.ndarray
    noise_variance: float

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float)
        if ls.ndim != 1 or ls.size < 1:
            raise ValueError("lengthscales must be a 1-d vector")
        if np.any(ls <= 0.0):
            raise ValueError("lengthscales must be positive")
        if self.noise_variance < 0.0:
            raise ValueError("noise variance must be nonnegative")
        ls = ls.copy()
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @classmethod
    def isotropic(cls, dim: int, lengthscale: float, noise_variance: float) -> "KernelParams":
        return cls(np.full(dim, float(lengthscale)), noise_variance)

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    @cached_property
    def inv_two_lsq(self) -> np.ndarray:
        """Per-variable weights 1 / (2 l_k^2)."""
        w = 1.0 / (2.0 * self.lengthscales ** 2)
        w.setflags(write=False)
        return w


def group_scales(decomp: Decomposition) -> np.ndarray:
    """Component scales d_i / sum_j d_j; they sum to one."""
    sizes = decomp.group_sizes().astype(float)
    return sizes / sizes.sum()


def _csr_groups(decomp: Decomposition):
    idx = np.concatenate([np.asarray(g, dtype=np.int64) for g in decomp.groups])
    ptr = np.zeros(len(decomp.groups) + 1, dtype=np.int64)
    np.cumsum([len(g) for g in decomp.groups], out=ptr[1:])
    return idx, ptr


def se_kernel_component(xa, xb, group_index: int, decomp: Decomposition,
                        params: KernelParams) -> float:
    """One component kernel evaluated at two group-restricted points."""
    group = decomp.groups[group_index]
    xa = np.asarray(xa, dtype=float).reshape(-1)
    xb = np.asarray(xb, dtype=float).reshape(-1)
    if xa.size != len(group) or xb.size != len(group):
        raise ValueError(
            f"group {group_index} has {len(group)} variables, "
            f"got points of size {xa.size} and {xb.size}"
        )
    w = params.inv_two_lsq[list(group)]
    diff = xa - xb
    scale = group_scales(decomp)[group_index]
    return float(scale * np.exp(-np.dot(diff * diff, w)))


def additive_kernel(xa, xb, decomp: Decomposition, params: KernelParams) -> float:
    """Sum of all component kernels at two full-dimensional points."""
    xa = np.asarray(xa, dtype=float).reshape(-1)
    xb = np.asarray(xb, dtype=float).reshape(-1)
    if xa.size != params.dim or xb.size != params.dim:
        raise ValueError("point dimension does not match the lengthscale vector")
    total = 0.0
    for i, g in enumerate(decomp.groups):
        gl = list(g)
        total += se_kernel_component(xa[gl], xb[gl], i, decomp, params)
    return total


def additive_gram_matrix(X: np.ndarray, decomp: Decomposition,
                         params: KernelParams) -> np.ndarray:
    """Noise-free Gram matrix of the additive kernel over the rows of X."""
    X = np.ascontiguousarray(X, dtype=float)
    idx, ptr = _csr_groups(decomp)
    scales = group_scales(decomp)
    return backend.additive_gram(X, idx, ptr, scales, params.inv_two_lsq)


def se_cross_matrix(A: np.ndarray, B: np.ndarray, group_index: int,
                    decomp: Decomposition, params: KernelParams) -> np.ndarray:
    """Cross kernel block of one component between group-restricted row sets."""
    group = list(decomp.groups[group_index])
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    if A.shape[1] != len(group) or B.shape[1] != len(group):
        raise ValueError("row width does not match the group size")
    scale = float(group_scales(decomp)[group_index])
    w = np.ascontiguousarray(params.inv_two_lsq[group])
    return backend.se_cross(A, B, scale, w)
