"""Exact maximization of additive objectives over a junction tree.

Each term lives on one variable group as a dense table over that group's
subdomain grid.  Upward max-messages with stored backpointers give the global
maximum of the summed tables in one leaf-to-root sweep; a root-to-leaf pass
recovers an argmax assignment.  A chunked brute-force enumerator serves as
the independent oracle.

All ties break toward the lexicographically smallest configuration (variables
in increasing index order), so results are deterministic and independent of
the root choice for the maximum value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Domain
from .errors import CapacityError, InconsistencyError
from .gp import ObservationSet, posterior_component, posterior_component_batch
from .graphs import Decomposition, JunctionTree
from .kernels import KernelParams

MAX_TABLE_SIZE = 1_000_000
BRUTE_FORCE_CAP = 10_000_000


@dataclass(frozen=True)
class ComponentAcquisition:
    """Upper-confidence table of one component over its full subdomain grid."""

    group: tuple
    table: np.ndarray


def component_ucb(j: int, xq, gram, obs: ObservationSet, decomp: Decomposition,
                  params: KernelParams, beta: float) -> float:
    """mean + sqrt(beta) * std of component ``j`` at one point."""
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    mean, var = posterior_component(j, xq, gram, obs, decomp, params)
    return mean + np.sqrt(beta) * np.sqrt(var)


def build_acquisition_tables(gram, obs: ObservationSet, decomp: Decomposition,
                             params: KernelParams, domain: Domain,
                             beta: float) -> list:
    """Component UCB tables for every group, over the full group grids."""
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    tables = []
    for j, group in enumerate(decomp.groups):
        grid = domain.group_grid(group)
        mean, var = posterior_component_batch(j, grid, gram, obs, decomp, params)
        values = mean + np.sqrt(beta) * np.sqrt(var)
        tables.append(ComponentAcquisition(group, values.reshape(domain.group_shape(group))))
    return tables


@dataclass(frozen=True)
class MaximizeResult:
    indices: tuple
    point: np.ndarray
    value: float
    entries_evaluated: int
    max_eval_exceeded: bool


def maximize_tables(tree: JunctionTree, tables: dict, domain: Domain, *,
                    max_table_size: int = MAX_TABLE_SIZE,
                    max_eval=None) -> MaximizeResult:
    """Maximize a sum of per-group tables by message passing on ``tree``.

    ``tables`` maps each group tuple to a dense array shaped like the group's
    grid.  Every group must be assigned to a tree node.  ``max_eval`` is a
    soft cap: when the total number of table entries touched exceeds it the
    result is still exact but flagged, so callers can report the overrun.
    """
    assigned = {g for terms in tree.node_terms for g in terms}
    missing = set(tables) - assigned
    if missing:
        raise InconsistencyError(f"groups {sorted(missing)} not assigned to any tree node")

    node_axes = {}
    entries = 0
    combined = {}
    for i, node in enumerate(tree.nodes):
        shape = domain.group_shape(node)
        size = int(np.prod([int(s) for s in shape], dtype=object))
        if size > max_table_size:
            raise CapacityError(
                f"clique {node} table has {size} entries, cap is {max_table_size}"
            )
        entries += size
        node_axes[i] = {v: ax for ax, v in enumerate(node)}
        table = np.zeros(shape)
        for g in tree.node_terms[i]:
            if g not in tables:
                raise InconsistencyError(f"no table supplied for assigned group {g}")
            bshape = tuple(len(domain.values[v]) if v in g else 1 for v in node)
            table = table + tables[g].reshape(bshape)
        combined[i] = table

    # upward pass, deepest nodes first
    depth = {tree.root: 0}
    for i in _topdown(tree):
        if i != tree.root:
            depth[i] = depth[tree.parent[i]] + 1
    upward = sorted(range(tree.num_nodes), key=lambda i: -depth[i])

    messages = {}
    backptrs = {}
    elim_vars = {}
    for i in upward:
        table = combined[i]
        for c in tree.children[i]:
            sep = tree.separators[c]
            bshape = tuple(len(domain.values[v]) if v in sep else 1 for v in tree.nodes[i])
            table = table + messages[c].reshape(bshape)
        if i == tree.root:
            combined[i] = table
            continue
        node = tree.nodes[i]
        sep = tree.separators[i]
        keep_axes = [node_axes[i][v] for v in sep]
        drop_vars = tuple(v for v in node if v not in sep)
        drop_axes = [node_axes[i][v] for v in drop_vars]
        moved = np.moveaxis(table, drop_axes, range(len(keep_axes), len(node)))
        flat = moved.reshape(tuple(moved.shape[:len(keep_axes)]) + (-1,))
        messages[i] = flat.max(axis=-1)
        backptrs[i] = flat.argmax(axis=-1)
        elim_vars[i] = drop_vars

    root_table = combined[tree.root]
    flat_root = root_table.reshape(-1)
    best_flat = int(flat_root.argmax())
    value = float(flat_root[best_flat])

    assignment = {}
    root_node = tree.nodes[tree.root]
    for v, ix in zip(root_node, np.unravel_index(best_flat, root_table.shape)):
        assignment[v] = int(ix)

    # downward pass: decode backpointers using the parent's separator values
    for i in _topdown(tree):
        if i == tree.root:
            continue
        sep = tree.separators[i]
        sep_cfg = tuple(assignment[v] for v in sep)
        flat_j = int(backptrs[i][sep_cfg])
        drop_vars = elim_vars[i]
        drop_shape = tuple(len(domain.values[v]) for v in drop_vars)
        for v, ix in zip(drop_vars, np.unravel_index(flat_j, drop_shape)):
            assignment[v] = int(ix)

    indices = tuple(assignment.get(v, 0) for v in range(domain.dim))
    exceeded = max_eval is not None and entries > max_eval
    return MaximizeResult(
        indices=indices,
        point=domain.point(indices),
        value=value,
        entries_evaluated=entries,
        max_eval_exceeded=exceeded,
    )


def _topdown(tree: JunctionTree):
    order = [tree.root]
    pos = 0
    while pos < len(order):
        order.extend(tree.children[order[pos]])
        pos += 1
    return order


def maximize_acquisition(tree: JunctionTree, terms, domain: Domain, *,
                         max_table_size: int = MAX_TABLE_SIZE,
                         max_eval=None) -> MaximizeResult:
    """Maximize the summed component UCB terms exactly via message passing."""
    tables = {term.group: term.table for term in terms}
    if len(tables) != len(terms):
        raise InconsistencyError("duplicate groups in the term list")
    return maximize_tables(tree, tables, domain,
                           max_table_size=max_table_size, max_eval=max_eval)


@dataclass(frozen=True)
class BruteForceResult:
    indices: tuple
    point: np.ndarray
    value: float


def brute_force_maximize(domain: Domain, evaluator, *,
                         cap: int = BRUTE_FORCE_CAP,
                         chunk: int = 262_144) -> BruteForceResult:
    """Exhaustive maximum over the whole domain; first-in-lexicographic ties.

    ``evaluator`` is called with an ``(m, D)`` matrix of points and must
    return ``(m,)`` values; wrap scalar functions with
    :func:`pointwise_evaluator`.
    """
    total = domain.size
    if total > cap:
        raise CapacityError(f"domain has {total} points, brute-force cap is {cap}")
    sizes = domain.sizes
    best_value = -np.inf
    best_flat = -1
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        flat = np.arange(start, stop)
        idx = np.stack(np.unravel_index(flat, sizes), axis=-1)
        values = np.asarray(evaluator(domain.points(idx)), dtype=float)
        k = int(values.argmax())
        # strict > keeps the first (lexicographically smallest) maximizer
        if values[k] > best_value:
            best_value = float(values[k])
            best_flat = start + k
    indices = tuple(int(i) for i in np.unravel_index(best_flat, sizes))
    return BruteForceResult(indices=indices, point=domain.point(indices),
                            value=best_value)


def pointwise_evaluator(fn):
    """Adapt a scalar point -> value function to the batched interface."""

    def batched(X):
        return np.array([fn(x) for x in X], dtype=float)

    return batched


def table_sum_evaluator(tables: dict, domain: Domain):
    """Batched evaluator for a sum of per-group tables (used by the oracle)."""

    groups = list(tables)
    flats = [tables[g].reshape(-1) for g in groups]
    shapes = [domain.group_shape(g) for g in groups]
    orders = [np.argsort(v) for v in domain.values]
    sorted_vals = [v[o] for v, o in zip(domain.values, orders)]

    def batched(X):
        X = np.atleast_2d(X)
        idx = np.empty(X.shape, dtype=np.int64)
        for k in range(domain.dim):
            idx[:, k] = orders[k][np.searchsorted(sorted_vals[k], X[:, k])]
        total = np.zeros(X.shape[0])
        for g, flat, shape in zip(groups, flats, shapes):
            sub = idx[:, list(g)]
            total += flat[np.ravel_multi_index(sub.T, shape)]
        return total

    return batched
