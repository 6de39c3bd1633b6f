"""Gibbs sampling over edge indicators and lengthscale indices.

The sampler walks coordinate by coordinate: each edge indicator is resampled
from its Bernoulli conditional, each lengthscale index from its categorical
conditional, both driven by the data-fit score

    phi(graph, lengthscales) = -0.5 y' (K + noise I)^-1 y - 0.5 log|K + noise I|

(the log marginal likelihood without its constant term).  Scores are memoized
per state, and the budget counts *fresh* score evaluations only.  After the
walk, the visited state with the highest score wins.

The ``no_overlap`` mode constrains the walk to disjoint unions of cliques by
resampling each variable's group membership over the existing groups plus a
fresh singleton.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .gp import ObservationSet, data_fit_terms
from .graphs import DependencyGraph, maximal_cliques
from .kernels import KernelParams

MODES = ("overlap", "no_overlap")


@dataclass(frozen=True)
class StructureParams:
    """One Gibbs state: a graph plus per-variable lengthscale grid indices."""

    graph: DependencyGraph
    lengthscale_indices: tuple
    edge_prior_p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.edge_prior_p < 1.0:
            raise ValueError("edge prior must lie strictly inside (0, 1)")
        object.__setattr__(self, "lengthscale_indices",
                           tuple(int(i) for i in self.lengthscale_indices))

    def key(self):
        return (self.graph.adjacency.tobytes(), self.lengthscale_indices)

    def lengthscales(self, grids) -> np.ndarray:
        return np.array([grids[k][i] for k, i in enumerate(self.lengthscale_indices)])

    def with_edge(self, i, j, present) -> "StructureParams":
        return StructureParams(self.graph.with_edge(i, j, present),
                               self.lengthscale_indices, self.edge_prior_p)

    def with_lengthscale_index(self, k, idx) -> "StructureParams":
        new = list(self.lengthscale_indices)
        new[k] = int(idx)
        return StructureParams(self.graph, tuple(new), self.edge_prior_p)

    def with_graph(self, graph) -> "StructureParams":
        return StructureParams(graph, self.lengthscale_indices, self.edge_prior_p)


def default_lengthscale_grids(dim: int, low: float = 0.1, high: float = 1.0,
                              count: int = 8) -> list:
    """One log-spaced candidate grid per variable."""
    grid = np.geomspace(low, high, count)
    return [grid.copy() for _ in range(dim)]


def initial_params(dim: int, grids, edge_prior_p: float = 0.5) -> StructureParams:
    """Empty graph and grid-midpoint lengthscales."""
    mids = tuple(len(g) // 2 for g in grids)
    return StructureParams(DependencyGraph.empty(dim), mids, edge_prior_p)


def structure_score(obs: ObservationSet, graph: DependencyGraph,
                    lengthscales, noise_variance: float) -> float:
    """Data-fit score of one (graph, lengthscales) state."""
    params = KernelParams(np.asarray(lengthscales, dtype=float), noise_variance)
    quad, logdet = data_fit_terms(obs, maximal_cliques(graph), params)
    return -0.5 * quad - 0.5 * logdet


class _ScoreCache:
    """Memoized structure scores with an evaluation budget.

    States whose factorization fails numerically score -inf and are never
    selected as best.
    """

    def __init__(self, obs, grids, noise_variance, budget):
        self.obs = obs
        self.grids = grids
        self.noise_variance = noise_variance
        self.budget = budget
        self.evaluations = 0
        self._table = {}

    def cost(self, params: StructureParams) -> int:
        return 0 if params.key() in self._table else 1

    def affordable(self, candidates) -> bool:
        needed = sum(self.cost(c) for c in candidates)
        return self.evaluations + needed <= self.budget

    def score(self, params: StructureParams) -> float:
        key = params.key()
        if key not in self._table:
            self.evaluations += 1
            try:
                value = structure_score(self.obs, params.graph,
                                        params.lengthscales(self.grids),
                                        self.noise_variance)
            except NumericalError:
                value = -math.inf
            self._table[key] = value
        return self._table[key]


def _bernoulli_log_odds(log_odds: float, rng: np.random.Generator) -> bool:
    """Sample a Bernoulli given log(p1/p0), safely for large magnitudes."""
    if math.isnan(log_odds):  # both scores failed numerically
        return False
    if log_odds >= 0:
        p1 = 1.0 / (1.0 + math.exp(-log_odds))
    else:
        e = math.exp(log_odds)
        p1 = e / (1.0 + e)
    return bool(rng.random() < p1)


def _categorical_from_logs(logs: np.ndarray, rng: np.random.Generator) -> int:
    if not np.isfinite(logs.max()):
        return 0
    probs = softmax_probs(logs)
    return int(rng.choice(len(probs), p=probs))


def softmax_probs(logs) -> np.ndarray:
    logs = np.asarray(logs, dtype=float)
    shifted = logs - logs.max()
    w = np.exp(shifted)
    return w / w.sum()


def edge_conditional(i: int, j: int, params: StructureParams, obs: ObservationSet,
                     grids, noise_variance: float) -> float:
    """Posterior probability that edge (i, j) is present, all else fixed."""
    if not 0 <= i < j < params.graph.dim:
        raise ValueError("need variable indices with i < j")
    ls = params.lengthscales(grids)
    phi1 = structure_score(obs, params.graph.with_edge(i, j, True), ls, noise_variance)
    phi0 = structure_score(obs, params.graph.with_edge(i, j, False), ls, noise_variance)
    p = params.edge_prior_p
    log_odds = math.log(p) - math.log1p(-p) + phi1 - phi0
    if log_odds >= 0:
        return 1.0 / (1.0 + math.exp(-log_odds))
    e = math.exp(log_odds)
    return e / (1.0 + e)


def lengthscale_conditional(k: int, params: StructureParams, obs: ObservationSet,
                            grids, noise_variance: float) -> np.ndarray:
    """Categorical posterior over candidate values of lengthscale ``k``."""
    grid = grids[k]
    if len(grid) == 0:
        raise ValueError("empty candidate grid")
    logs = []
    for idx in range(len(grid)):
        cand = params.with_lengthscale_index(k, idx)
        logs.append(structure_score(obs, cand.graph, cand.lengthscales(grids),
                                    noise_variance))
    return softmax_probs(np.array(logs))


def assignment_from_graph(graph: DependencyGraph) -> list:
    """Connected components as a variable -> group-id list (for no_overlap mode)."""
    labels = [-1] * graph.dim
    neighbors = graph.neighbor_sets()
    group = 0
    for v in range(graph.dim):
        if labels[v] >= 0:
            continue
        stack = [v]
        labels[v] = group
        while stack:
            cur = stack.pop()
            for u in neighbors[cur]:
                if labels[u] < 0:
                    labels[u] = group
                    stack.append(u)
        group += 1
    return labels


def graph_from_assignment(labels) -> DependencyGraph:
    """Disjoint clique union induced by a variable -> group-id map."""
    dim = len(labels)
    adj = np.zeros((dim, dim), dtype=bool)
    for i in range(dim):
        for j in range(i + 1, dim):
            if labels[i] == labels[j]:
                adj[i, j] = adj[j, i] = True
    return DependencyGraph(adj)


def _assignment_candidates(v: int, labels):
    """Candidate reassignments of variable v: every existing group + a new singleton."""
    others = sorted({g for u, g in enumerate(labels) if u != v})
    fresh = max(labels) + 1 if labels else 0
    candidates = []
    for g in others + [fresh]:
        cand = list(labels)
        cand[v] = g
        candidates.append(cand)
    return candidates


def no_overlap_step(v: int, labels, obs: ObservationSet, params: StructureParams,
                    grids, noise_variance: float, rng: np.random.Generator) -> list:
    """Resample variable ``v``'s group membership; returns the new assignment."""
    if len(labels) == 1:
        return list(labels)
    ls = params.lengthscales(grids)
    candidates = _assignment_candidates(v, labels)
    logs = [structure_score(obs, graph_from_assignment(c), ls, noise_variance)
            for c in candidates]
    choice = _categorical_from_logs(np.array(logs), rng)
    return candidates[choice]


@dataclass
class GibbsTrace:
    """Every accepted state with its score, plus the best state seen."""

    visited: list = field(default_factory=list)
    best_params: StructureParams = None
    best_score: float = -math.inf
    likelihood_evaluation_count: int = 0

    def record(self, params: StructureParams, score: float):
        self.visited.append((params, score))
        if score > self.best_score:
            self.best_score = score
            self.best_params = params

    def visited_graphs(self):
        return [p.graph for p, _ in self.visited]


def gibbs_learn(obs: ObservationSet, init: StructureParams, n_gibbs: int,
                mode: str, seed, grids, noise_variance: float,
                max_steps=None) -> GibbsTrace:
    """Coordinate-wise Gibbs walk, returning the trace of accepted states.

    ``n_gibbs`` caps fresh score evaluations; the walk also stops after
    ``max_steps`` coordinate updates (default ``10 * n_gibbs``), which keeps
    small state spaces from cycling forever on cached scores.  In
    ``no_overlap`` mode every visited graph is a disjoint union of cliques.
    """
    if n_gibbs < 1:
        raise ValueError("n_gibbs must be at least 1")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rng = np.random.default_rng(seed)
    if max_steps is None:
        max_steps = 10 * n_gibbs

    dim = init.graph.dim
    cache = _ScoreCache(obs, grids, noise_variance, n_gibbs)
    trace = GibbsTrace()

    state = init
    labels = None
    if mode == "no_overlap":
        labels = assignment_from_graph(init.graph)
        state = init.with_graph(graph_from_assignment(labels))

    trace.record(state, cache.score(state))

    steps = 0
    log_prior_odds = math.log(state.edge_prior_p) - math.log1p(-state.edge_prior_p)

    def out_of_steps():
        return steps >= max_steps

    exhausted = False
    while not exhausted and not out_of_steps():
        if mode == "overlap":
            for i, j in itertools.combinations(range(dim), 2):
                on = state.with_edge(i, j, True)
                off = state.with_edge(i, j, False)
                if not cache.affordable([on, off]):
                    exhausted = True
                    break
                log_odds = log_prior_odds + cache.score(on) - cache.score(off)
                state = on if _bernoulli_log_odds(log_odds, rng) else off
                trace.record(state, cache.score(state))
                steps += 1
                if out_of_steps():
                    break
        else:
            for v in range(dim):
                if dim == 1:
                    break
                candidate_labels = _assignment_candidates(v, labels)
                candidates = [state.with_graph(graph_from_assignment(c))
                              for c in candidate_labels]
                if not cache.affordable(candidates):
                    exhausted = True
                    break
                logs = np.array([cache.score(c) for c in candidates])
                choice = _categorical_from_logs(logs, rng)
                labels = candidate_labels[choice]
                state = candidates[choice]
                trace.record(state, cache.score(state))
                steps += 1
                if out_of_steps():
                    break
        if exhausted or out_of_steps():
            break
        for k in range(dim):
            candidates = [state.with_lengthscale_index(k, idx)
                          for idx in range(len(grids[k]))]
            if not cache.affordable(candidates):
                exhausted = True
                break
            logs = np.array([cache.score(c) for c in candidates])
            choice = _categorical_from_logs(logs, rng)
            state = candidates[choice]
            trace.record(state, cache.score(state))
            steps += 1
            if out_of_steps():
                break

    trace.likelihood_evaluation_count = cache.evaluations
    return trace
