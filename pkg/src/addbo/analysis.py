"""Numerical studies of the additive posterior approximation and information gain.

The additive acquisition replaces the full posterior standard deviation with
the sum of component standard deviations, which never under-estimates it; the
scan quantifies that gap empirically.  The information gain of an observation
set A is ``0.5 * log det(I + K_A / noise)`` in nats; a greedy selector gives a
tractable lower bound on its maximum over sets of a given size.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .domain import Domain
from .errors import CapacityError
from .gp import _cholesky_with_jitter, posterior_component_batch, posterior_full_batch
from .graphs import Decomposition
from .kernels import KernelParams, additive_gram_matrix

RATIO_FLAG_TOL = 1e-12


@dataclass(frozen=True)
class VarianceGapSample:
    point: np.ndarray
    true_std: float
    approx_std: float
    ratio: float  # inf when true_std is numerically zero


def variance_gap_scan(domain: Domain, gram, obs, decomp: Decomposition,
                      params: KernelParams, num_points: int, seed) -> list:
    """Compare true and summed-component posterior stds at random points.

    Returns samples sorted by true std.  The summed approximation must sit
    above the truth at every point (up to round-off).
    """
    rng = np.random.default_rng(seed)
    idx = domain.random_indices(rng, num_points)
    X = domain.points(idx)
    _, full_var = posterior_full_batch(X, gram, obs, decomp, params)
    approx_std = np.zeros(num_points)
    for j, group in enumerate(decomp.groups):
        _, comp_var = posterior_component_batch(j, X[:, list(group)], gram, obs,
                                                decomp, params)
        approx_std += np.sqrt(comp_var)
    true_std = np.sqrt(full_var)
    samples = []
    for k in range(num_points):
        ratio = float("inf") if true_std[k] < RATIO_FLAG_TOL else float(approx_std[k] / true_std[k])
        samples.append(VarianceGapSample(point=X[k], true_std=float(true_std[k]),
                                         approx_std=float(approx_std[k]), ratio=ratio))
    samples.sort(key=lambda s: s.true_std)
    return samples


def scan_csv(samples) -> str:
    out = io.StringIO()
    out.write("true_std,approx_std,ratio\n")
    for s in samples:
        out.write(f"{s.true_std!r},{s.approx_std!r},{s.ratio!r}\n")
    return out.getvalue()


def count_violations(samples, tol: float = 1e-9) -> int:
    return sum(1 for s in samples if s.approx_std < s.true_std - tol)


def information_gain(A: np.ndarray, decomp: Decomposition, params: KernelParams) -> float:
    """Mutual information (nats) between noisy observations at A and the function there."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] < 1:
        raise ValueError("need at least one point")
    if params.noise_variance <= 0.0:
        raise ValueError("information gain needs positive noise variance")
    K = additive_gram_matrix(A, decomp, params)
    M = np.eye(A.shape[0]) + K / params.noise_variance
    chol, _ = _cholesky_with_jitter(M, "information gain")
    return float(np.sum(np.log(np.diag(chol))))


@dataclass(frozen=True)
class InfoGainResult:
    points: np.ndarray
    gains: np.ndarray  # gains[k] = gain of the first k+1 points

    @property
    def gain(self) -> float:
        return float(self.gains[-1])


def greedy_info_gain(candidates, T: int, decomp: Decomposition,
                     params: KernelParams, cap: int = 100_000) -> InfoGainResult:
    """Greedy point selection maximizing the marginal information gain.

    ``candidates`` is either a Domain (fully enumerated) or an ``(m, D)``
    point matrix.  Ties break toward the earliest candidate.
    """
    if isinstance(candidates, Domain):
        if candidates.size > cap:
            raise CapacityError(
                f"domain has {candidates.size} points, enumeration cap is {cap}")
        sizes = candidates.sizes
        idx = np.stack(np.unravel_index(np.arange(candidates.size), sizes), axis=-1)
        pool = candidates.points(idx)
    else:
        pool = np.atleast_2d(np.asarray(candidates, dtype=float))
        if pool.shape[0] > cap:
            raise CapacityError(f"{pool.shape[0]} candidates, cap is {cap}")
    if T < 1:
        raise ValueError("T must be at least 1")
    if T > pool.shape[0]:
        raise ValueError("T exceeds the number of candidate points")

    chosen = []
    gains = []
    for _ in range(T):
        best_gain, best_k = -np.inf, -1
        for k in range(pool.shape[0]):
            trial = np.vstack(chosen + [pool[k]]) if chosen else pool[k][None, :]
            g = information_gain(trial, decomp, params)
            if g > best_gain + 1e-15:
                best_gain, best_k = g, k
        chosen.append(pool[best_k])
        gains.append(best_gain)
    return InfoGainResult(points=np.vstack(chosen), gains=np.array(gains))


def info_gain_csv(result: InfoGainResult) -> str:
    out = io.StringIO()
    out.write("T,gain\n")
    for k, g in enumerate(result.gains, start=1):
        out.write(f"{k},{g!r}\n")
    return out.getvalue()
