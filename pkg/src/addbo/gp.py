"""Posterior inference for the additive GP model.

All posteriors condition on the same factorized matrix ``gram = K + noise*I``
over the observed points.  Component posteriors use the cross-covariance of a
single component against the full observation set; their means sum exactly to
the full posterior mean, while the summed component standard deviations
over-estimate the full posterior standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NumericalError
from .graphs import Decomposition, DependencyGraph, maximal_cliques
from .kernels import (
    KernelParams,
    additive_gram_matrix,
    group_scales,
    se_cross_matrix,
)

# escalating diagonal jitter used whenever a Cholesky factorization fails
JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

# component variances this far below zero are treated as round-off and clamped
VARIANCE_CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class ObservationSet:
    """Observed inputs (n, D) and noisy values (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} points but {y.size} values")
        X = X.copy()
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def empty(cls, dim: int) -> "ObservationSet":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def extended(self, x, value: float) -> "ObservationSet":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return ObservationSet(np.vstack([self.X, x]), np.append(self.y, value))


@dataclass(frozen=True)
class FactorizedGram:
    """Noise-augmented Gram matrix with its lower Cholesky factor."""

    gram: np.ndarray
    chol: np.ndarray
    jitter_applied: float
    n: int


def _cholesky_with_jitter(matrix: np.ndarray, context: str):
    for jitter in JITTER_LADDER:
        try:
            shifted = matrix if jitter == 0.0 else matrix + jitter * np.eye(matrix.shape[0])
            return np.linalg.cholesky(shifted), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"{context}: Cholesky failed even with jitter {JITTER_LADDER[-1]:g} "
        f"(n={matrix.shape[0]}, min diag={matrix.diagonal().min():.3e})"
    )


def fit_gram(obs: ObservationSet, decomp: Decomposition,
             params: KernelParams) -> FactorizedGram:
    """Factorize ``K + noise*I`` over the observations, escalating jitter on failure."""
    if obs.n < 1:
        raise ValueError("need at least one observation")
    K = additive_gram_matrix(obs.X, decomp, params)
    K[np.diag_indices_from(K)] += params.noise_variance
    chol, jitter = _cholesky_with_jitter(K, "gram factorization")
    if jitter > 0.0:
        K = K + jitter * np.eye(obs.n)
    return FactorizedGram(gram=K, chol=chol, jitter_applied=jitter, n=obs.n)


def _check_gram(gram, obs):
    if gram is None:
        if obs.n != 0:
            raise ValueError("gram is required for nonempty observation sets")
        return
    if gram.n != obs.n:
        raise ValueError(f"gram built for {gram.n} observations, got {obs.n} (stale gram)")


def _clamp_variances(var: np.ndarray, context: str) -> np.ndarray:
    low = var.min() if var.size else 0.0
    if low < -VARIANCE_CLAMP_TOL:
        raise NumericalError(f"{context}: negative variance {low:.3e} beyond round-off")
    return np.maximum(var, 0.0)


def posterior_component_batch(j: int, Xq_group: np.ndarray, gram, obs: ObservationSet,
                              decomp: Decomposition, params: KernelParams):
    """Posterior mean and variance of component ``j`` at many group-restricted points.

    ``Xq_group`` has shape ``(m, d_j)``; returns two ``(m,)`` arrays.
    """
    _check_gram(gram, obs)
    Xq_group = np.atleast_2d(np.asarray(Xq_group, dtype=float))
    scale = float(group_scales(decomp)[j])
    if obs.n == 0:
        m = Xq_group.shape[0]
        return np.zeros(m), np.full(m, scale)
    group = list(decomp.groups[j])
    kstar = se_cross_matrix(Xq_group, obs.X[:, group], j, decomp, params)
    alpha = cho_solve((gram.chol, True), obs.y)
    mean = kstar @ alpha
    v = solve_triangular(gram.chol, kstar.T, lower=True)
    var = scale - np.einsum("ij,ij->j", v, v)
    return mean, _clamp_variances(var, f"component {j} posterior")


def posterior_component(j: int, xq, gram, obs: ObservationSet,
                        decomp: Decomposition, params: KernelParams):
    """Posterior mean and variance of component ``j`` at one full point."""
    xq = np.asarray(xq, dtype=float).reshape(-1)
    group = list(decomp.groups[j])
    mean, var = posterior_component_batch(j, xq[group][None, :], gram, obs, decomp, params)
    return float(mean[0]), float(var[0])


def posterior_full_batch(Xq: np.ndarray, gram, obs: ObservationSet,
                         decomp: Decomposition, params: KernelParams):
    """Posterior of the full additive GP at many points, shape ``(m, D)``."""
    _check_gram(gram, obs)
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    m = Xq.shape[0]
    if obs.n == 0:
        return np.zeros(m), np.ones(m)
    kfull = np.zeros((m, obs.n))
    for j, group in enumerate(decomp.groups):
        gl = list(group)
        kfull += se_cross_matrix(Xq[:, gl], obs.X[:, gl], j, decomp, params)
    alpha = cho_solve((gram.chol, True), obs.y)
    mean = kfull @ alpha
    v = solve_triangular(gram.chol, kfull.T, lower=True)
    var = 1.0 - np.einsum("ij,ij->j", v, v)
    return mean, _clamp_variances(var, "full posterior")


def posterior_full(xq, gram, obs: ObservationSet, decomp: Decomposition,
                   params: KernelParams):
    mean, var = posterior_full_batch(np.asarray(xq, dtype=float)[None, :],
                                     gram, obs, decomp, params)
    return float(mean[0]), float(var[0])


def data_fit_terms(obs: ObservationSet, decomp: Decomposition, params: KernelParams):
    """Quadratic form ``y' (K + noise I)^-1 y`` and ``log|K + noise I|``."""
    gram = fit_gram(obs, decomp, params)
    alpha = cho_solve((gram.chol, True), obs.y)
    quad = float(obs.y @ alpha)
    logdet = 2.0 * float(np.sum(np.log(np.diag(gram.chol))))
    return quad, logdet


def log_marginal_likelihood(obs: ObservationSet, graph: DependencyGraph,
                            params: KernelParams) -> float:
    """Log evidence of the observations under the graph's additive kernel."""
    if obs.n < 1:
        raise ValueError("need at least one observation")
    decomp = maximal_cliques(graph)
    quad, logdet = data_fit_terms(obs, decomp, params)
    return -0.5 * quad - 0.5 * logdet - 0.5 * obs.n * math.log(2.0 * math.pi)
