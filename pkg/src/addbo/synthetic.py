"""Synthetic additive test functions drawn from the GP prior.

Each component is sampled exactly on its group's subdomain grid (a finite
multivariate normal draw), so the function is a dense sum of per-group tables
and its global optimum can be computed exactly by message passing over the
true decomposition.  That exact optimum is what makes regret measurable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import maximize_tables
from .domain import Domain
from .errors import CapacityError
from .gp import _cholesky_with_jitter
from .graphs import DependencyGraph, Decomposition, maximal_cliques, triangulate, build_junction_tree
from .kernels import KernelParams, group_scales, se_cross_matrix

SUBDOMAIN_CAP = 1_000_000


@dataclass(frozen=True)
class SyntheticFunction:
    """A sum of per-group value tables with known structure and optimum."""

    domain: Domain
    true_graph: DependencyGraph
    decomposition: Decomposition
    lengthscales: np.ndarray
    tables: tuple
    true_optimum_value: float
    true_optimizer: tuple

    def value_at_indices(self, indices) -> float:
        total = 0.0
        for g, table in zip(self.decomposition.groups, self.tables):
            total += float(table[tuple(indices[v] for v in g)])
        return total

    def evaluate(self, point) -> float:
        return self.value_at_indices(self.domain.indices_of(point))

    def evaluate_batch(self, index_array: np.ndarray) -> np.ndarray:
        index_array = np.asarray(index_array)
        total = np.zeros(index_array.shape[0])
        for g, table in zip(self.decomposition.groups, self.tables):
            sub = index_array[:, list(g)]
            total += table.reshape(-1)[np.ravel_multi_index(sub.T, table.shape)]
        return total


def sample_synthetic(graph: DependencyGraph, params: KernelParams, domain: Domain,
                     seed, subdomain_cap: int = SUBDOMAIN_CAP) -> SyntheticFunction:
    """Draw one additive function whose components follow the graph's cliques.

    Component ``i`` is a zero-mean Gaussian draw over the group's full grid
    with covariance given by that component's kernel, so repeated calls with
    the same seed reproduce the function exactly.
    """
    rng = np.random.default_rng(seed)
    decomp = maximal_cliques(graph)
    scales = group_scales(decomp)
    tables = []
    for j, group in enumerate(decomp.groups):
        shape = domain.group_shape(group)
        size = int(np.prod([int(s) for s in shape], dtype=object))
        if size > subdomain_cap:
            raise CapacityError(
                f"group {group} grid has {size} configurations, cap is {subdomain_cap}"
            )
        grid = domain.group_grid(group)
        cov = se_cross_matrix(grid, grid, j, decomp, params)
        cov = 0.5 * (cov + cov.T)
        chol, _ = _cholesky_with_jitter(cov, f"sampling component {j} (scale {scales[j]:.3g})")
        draw = chol @ rng.standard_normal(size)
        tables.append(draw.reshape(shape))

    # the exact-optimum pass is bounded by table size, not treewidth
    tri = triangulate(graph)
    tree = build_junction_tree(tri, graph, max_treewidth=64)
    table_map = dict(zip(decomp.groups, tables))
    best = maximize_tables(tree, table_map, domain, max_table_size=subdomain_cap)
    return SyntheticFunction(
        domain=domain,
        true_graph=graph,
        decomposition=decomp,
        lengthscales=params.lengthscales,
        tables=tuple(tables),
        true_optimum_value=best.value,
        true_optimizer=best.indices,
    )
