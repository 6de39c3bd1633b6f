"""The upper-confidence-bound optimization loop and its comparison modes.

Four modes share one protocol: draw ``n_init`` random observations, then for
each iteration refit the model, maximize the additive UCB acquisition by
message passing, and query the chosen point.

* ``overlap``    - graph and lengthscales learned by Gibbs sampling, any graph
* ``no_overlap`` - learned under the disjoint-clique-union constraint
* ``oracle``     - true graph and lengthscales supplied, no learning
* ``random``     - uniform random queries, no model

Structure learning runs before iteration 1 and every ``n_cyc`` iterations
thereafter, warm-started from its previous result.  Randomness is split into
fixed named streams (children of one seed sequence, in order: initial points,
observation noise, learning, random-mode queries), so the initial situation
and noise are identical across modes for a given seed.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .acquisition import build_acquisition_tables, maximize_acquisition
from .domain import Domain
from .errors import CapacityError
from .gp import ObservationSet, fit_gram
from .graphs import DependencyGraph, maximal_cliques, triangulate, build_junction_tree
from .kernels import KernelParams
from .structure import StructureParams, gibbs_learn, initial_params

logger = logging.getLogger(__name__)

MODES = ("overlap", "no_overlap", "oracle", "random")


def beta_log_schedule(scale: float = 0.5, rate: float = 2.0):
    """The schedule ``beta_t = scale * log(rate * t)``, floored at zero."""

    def schedule(t: int) -> float:
        return max(0.0, scale * math.log(rate * t))

    return schedule


@dataclass(frozen=True)
class BOConfig:
    n_init: int
    n_iter: int
    beta: object  # callable t -> beta_t
    n_cyc: int = 30
    n_gibbs: int = 200
    mode: str = "overlap"
    seed: int = 0
    noise_variance: float = 0.01
    lengthscale_grids: tuple = None
    edge_prior_p: float = 0.5
    max_treewidth: int = 8
    max_table_size: int = 1_000_000
    max_eval: int = None

    def __post_init__(self):
        if self.n_init < 1 or self.n_iter < 1 or self.n_cyc < 1:
            raise ValueError("n_init, n_iter and n_cyc must all be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class LearningRound:
    index: int
    t: int
    graph: DependencyGraph
    lengthscales: np.ndarray
    cc: float
    cs: float


@dataclass
class RegretTrace:
    """Per-iteration queries and regret statistics for one run.

    ``regrets[t-1]`` is the gap to the exact optimum at iteration ``t``;
    ``simple[t-1]`` is the best gap over everything queried so far including
    the initial points; ``avg_cumulative[t-1]`` averages the iteration gaps.
    """

    mode: str
    seed: int
    queries: np.ndarray
    observations: np.ndarray
    regrets: np.ndarray
    simple: np.ndarray
    avg_cumulative: np.ndarray
    init_points: np.ndarray
    init_values: np.ndarray
    init_regrets: np.ndarray
    rounds: list = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return self.regrets.size

    def to_csv(self) -> str:
        dim = self.queries.shape[1]
        out = io.StringIO()
        out.write("t," + ",".join(f"x_{k + 1}" for k in range(dim)) + ",y,r,S,Ravg\n")
        for t in range(self.n_iter):
            xs = ",".join(repr(float(v)) for v in self.queries[t])
            out.write(f"{t + 1},{xs},{self.observations[t]!r},{self.regrets[t]!r},"
                      f"{self.simple[t]!r},{self.avg_cumulative[t]!r}\n")
        return out.getvalue()

    def rounds_csv(self) -> str:
        lines = ["round,t,CC,CS"]
        for r in self.rounds:
            lines.append(f"{r.index},{r.t},{r.cc!r},{r.cs!r}")
        return "\n".join(lines) + "\n"


def graph_accuracy(learned: DependencyGraph, truth: DependencyGraph):
    """(correct-connections, correct-separations) of a learned graph.

    CC is the fraction of true edges present in the learned graph; CS is the
    fraction of true non-edges absent from it.  An edgeless truth fixes CC=1
    and a complete truth fixes CS=1 (logged, since the ratio is undefined).
    """
    if learned.dim != truth.dim:
        raise ValueError("graphs must have the same number of variables")
    true_edges = set(truth.edge_list())
    learned_edges = set(learned.edge_list())
    all_pairs = {(i, j) for i in range(truth.dim) for j in range(i + 1, truth.dim)}
    non_edges = all_pairs - true_edges
    if true_edges:
        cc = len(true_edges & learned_edges) / len(true_edges)
    else:
        logger.info("truth graph has no edges; CC defined as 1")
        cc = 1.0
    if non_edges:
        cs = len(non_edges - learned_edges) / len(non_edges)
    else:
        logger.info("truth graph is complete; CS defined as 1")
        cs = 1.0
    return cc, cs


def _spawn_streams(seed):
    """Named child generators: initial points, noise, learning, random queries."""
    children = np.random.SeedSequence(seed).spawn(4)
    return {
        "init": np.random.default_rng(children[0]),
        "noise": np.random.default_rng(children[1]),
        "learn": children[2],
        "random": np.random.default_rng(children[3]),
    }


def function_seed(seed):
    """Child seed reserved for sampling the synthetic objective of a run."""
    return np.random.SeedSequence(seed).spawn(5)[4]


def _best_feasible_params(trace, config: BOConfig):
    """Best-scoring visited state whose triangulated treewidth fits the cap."""
    ranked = sorted(trace.visited, key=lambda item: -item[1])
    for params, _ in ranked:
        cliques = maximal_cliques(triangulate(params.graph).graph)
        width = max(len(c) for c in cliques.groups) - 1
        if width <= config.max_treewidth:
            return params
    raise CapacityError("no visited graph fits the treewidth cap")


def run_bo(config: BOConfig, objective, truth=None) -> RegretTrace:
    """One optimization run; returns its regret trace.

    ``objective`` must expose ``domain``, ``value_at_indices`` and
    ``true_optimum_value`` (see :class:`addbo.synthetic.SyntheticFunction`).
    ``truth`` is a ``(graph, lengthscales)`` pair, required in oracle mode and
    otherwise used only to score learned graphs.
    """
    if config.mode == "oracle" and truth is None:
        raise ValueError("oracle mode needs the true graph and lengthscales")
    domain = objective.domain
    dim = domain.dim
    streams = _spawn_streams(config.seed)
    noise_std = math.sqrt(config.noise_variance)
    f_opt = objective.true_optimum_value

    grids = config.lengthscale_grids
    if grids is None:
        from .structure import default_lengthscale_grids

        grids = default_lengthscale_grids(dim)
    grids = [np.asarray(g, dtype=float) for g in grids]

    init_idx = domain.sample_indices_without_replacement(streams["init"], config.n_init)
    init_points = domain.points(init_idx)
    init_true = np.array([objective.value_at_indices(idx) for idx in init_idx])
    init_values = init_true + noise_std * streams["noise"].standard_normal(config.n_init)
    obs = ObservationSet(init_points, init_values)
    best_seen = float(np.max(init_true))

    learned = initial_params(dim, grids, config.edge_prior_p)
    truth_graph = truth[0] if truth is not None else None

    queries = np.zeros((config.n_iter, dim))
    observations = np.zeros(config.n_iter)
    regrets = np.zeros(config.n_iter)
    simple = np.zeros(config.n_iter)
    avg_cum = np.zeros(config.n_iter)
    rounds = []

    learns = config.mode in ("overlap", "no_overlap")
    cum_regret = 0.0

    for t in range(1, config.n_iter + 1):
        if learns and (t - 1) % config.n_cyc == 0:
            round_seed = streams["learn"].spawn(1)[0]
            trace = gibbs_learn(obs, learned, config.n_gibbs, config.mode,
                                round_seed, grids, config.noise_variance)
            learned = _best_feasible_params(trace, config)
            if truth_graph is not None:
                cc, cs = graph_accuracy(learned.graph, truth_graph)
            else:
                cc, cs = math.nan, math.nan
            rounds.append(LearningRound(index=len(rounds), t=t,
                                        graph=learned.graph,
                                        lengthscales=learned.lengthscales(grids),
                                        cc=cc, cs=cs))

        if config.mode == "random":
            query_idx = tuple(int(v) for v in domain.random_indices(streams["random"], 1)[0])
        else:
            if config.mode == "oracle":
                graph, lengthscales = truth[0], np.asarray(truth[1], dtype=float)
            else:
                graph, lengthscales = learned.graph, learned.lengthscales(grids)
            params = KernelParams(lengthscales, config.noise_variance)
            decomp = maximal_cliques(graph)
            tree = build_junction_tree(triangulate(graph), graph,
                                       max_treewidth=config.max_treewidth)
            gram = fit_gram(obs, decomp, params)
            beta_t = config.beta(t)
            terms = build_acquisition_tables(gram, obs, decomp, params, domain, beta_t)
            result = maximize_acquisition(tree, terms, domain,
                                          max_table_size=config.max_table_size,
                                          max_eval=config.max_eval)
            if result.max_eval_exceeded:
                logger.warning(
                    "iteration %d: acquisition touched %d table entries "
                    "(max_eval=%d)", t, result.entries_evaluated, config.max_eval)
            query_idx = result.indices

        f_true = objective.value_at_indices(query_idx)
        y = f_true + noise_std * streams["noise"].standard_normal()
        obs = obs.extended(domain.point(query_idx), y)
        best_seen = max(best_seen, f_true)

        queries[t - 1] = domain.point(query_idx)
        observations[t - 1] = y
        regrets[t - 1] = f_opt - f_true
        cum_regret += regrets[t - 1]
        simple[t - 1] = f_opt - best_seen
        avg_cum[t - 1] = cum_regret / t

    return RegretTrace(
        mode=config.mode,
        seed=config.seed,
        queries=queries,
        observations=observations,
        regrets=regrets,
        simple=simple,
        avg_cumulative=avg_cum,
        init_points=init_points,
        init_values=init_values,
        init_regrets=f_opt - init_true,
        rounds=rounds,
    )


@dataclass(frozen=True)
class AggregateResult:
    """Per-iteration means and standard errors across runs."""

    t: np.ndarray
    simple_mean: np.ndarray
    simple_se: np.ndarray
    avg_cum_mean: np.ndarray
    avg_cum_se: np.ndarray
    round_t: np.ndarray
    cc_mean: np.ndarray
    cc_se: np.ndarray
    cs_mean: np.ndarray
    cs_se: np.ndarray

    def to_csv(self) -> str:
        lines = ["t,S_mean,S_se,Ravg_mean,Ravg_se"]
        for k in range(self.t.size):
            lines.append(f"{self.t[k]},{self.simple_mean[k]!r},{self.simple_se[k]!r},"
                         f"{self.avg_cum_mean[k]!r},{self.avg_cum_se[k]!r}")
        return "\n".join(lines) + "\n"

    def rounds_csv(self) -> str:
        lines = ["round,t,CC_mean,CC_se,CS_mean,CS_se"]
        for k in range(self.round_t.size):
            lines.append(f"{k},{self.round_t[k]},{self.cc_mean[k]!r},{self.cc_se[k]!r},"
                         f"{self.cs_mean[k]!r},{self.cs_se[k]!r}")
        return "\n".join(lines) + "\n"


def _mean_se(matrix: np.ndarray):
    mean = matrix.mean(axis=0)
    if matrix.shape[0] > 1:
        se = matrix.std(axis=0, ddof=1) / math.sqrt(matrix.shape[0])
    else:
        se = np.zeros(matrix.shape[1])
    return mean, se


def aggregate_runs(traces) -> AggregateResult:
    """Elementwise means and standard errors of the regret and accuracy curves."""
    if not traces:
        raise ValueError("need at least one trace")
    lengths = {tr.n_iter for tr in traces}
    if len(lengths) != 1:
        raise ValueError(f"traces have mismatched lengths {sorted(lengths)}")
    round_counts = {len(tr.rounds) for tr in traces}
    if len(round_counts) != 1:
        raise ValueError("traces have mismatched learning-round counts")

    simple = np.stack([tr.simple for tr in traces])
    avg_cum = np.stack([tr.avg_cumulative for tr in traces])
    s_mean, s_se = _mean_se(simple)
    r_mean, r_se = _mean_se(avg_cum)

    n_rounds = round_counts.pop()
    if n_rounds:
        round_t = np.array([r.t for r in traces[0].rounds])
        cc = np.stack([[r.cc for r in tr.rounds] for tr in traces])
        cs = np.stack([[r.cs for r in tr.rounds] for tr in traces])
        cc_mean, cc_se = _mean_se(cc)
        cs_mean, cs_se = _mean_se(cs)
    else:
        round_t = np.zeros(0, dtype=int)
        cc_mean = cc_se = cs_mean = cs_se = np.zeros(0)

    return AggregateResult(
        t=np.arange(1, traces[0].n_iter + 1),
        simple_mean=s_mean, simple_se=s_se,
        avg_cum_mean=r_mean, avg_cum_se=r_se,
        round_t=round_t,
        cc_mean=cc_mean, cc_se=cc_se,
        cs_mean=cs_mean, cs_se=cs_se,
    )
