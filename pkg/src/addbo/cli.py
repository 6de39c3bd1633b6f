"""Command-line harness: synthetic experiments, structure learning, analysis.

Exit codes: 0 success, 2 config error, 3 capacity error, 4 numerical error,
5 invariant violation.  Set ADDBO_THREADS to dispatch independent (mode, run)
pairs to a process pool; outputs are identical either way.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys

import numpy as np

from .analysis import (
    count_violations,
    greedy_info_gain,
    info_gain_csv,
    scan_csv,
    variance_gap_scan,
)
from .config import ExperimentConfig
from .domain import Domain
from .engine import BOConfig, aggregate_runs, function_seed, run_bo
from .errors import CapacityError, ConfigError, InconsistencyError, NumericalError
from .gp import ObservationSet, fit_gram
from .graphs import format_edge_list, maximal_cliques
from .kernels import KernelParams
from .structure import gibbs_learn, initial_params
from .synthetic import sample_synthetic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_NUMERICAL = 4
EXIT_INVARIANT = 5


def _worker_count() -> int:
    raw = os.environ.get("ADDBO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"ADDBO_THREADS must be an integer, got {raw!r}") from None


def _run_seeds(seed: int, runs: int) -> list:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(runs)]


def _domain_for(cfg: ExperimentConfig) -> Domain:
    return Domain.uniform(cfg.effective_dim(), cfg.grid_size,
                          cfg.domain_low, cfg.domain_high)


def _one_run(cfg: ExperimentConfig, mode: str, run_seed: int):
    dim = cfg.effective_dim()
    domain = _domain_for(cfg)
    truth_graph = cfg.true_graph()
    true_ls = np.full(dim, cfg.true_lengthscale)
    objective = sample_synthetic(
        truth_graph,
        KernelParams(true_ls, cfg.noise_variance),
        domain,
        function_seed(run_seed),
    )
    bo = BOConfig(
        n_init=cfg.n_init, n_iter=cfg.n_iter, beta=cfg.beta(),
        n_cyc=cfg.n_cyc, n_gibbs=cfg.n_gibbs, mode=mode, seed=run_seed,
        noise_variance=cfg.noise_variance,
        lengthscale_grids=tuple(map(tuple, cfg.lengthscale_grids(dim))),
        edge_prior_p=cfg.edge_prior, max_treewidth=cfg.max_treewidth,
        max_table_size=cfg.max_table_size, max_eval=cfg.max_eval,
    )
    return run_bo(bo, objective, truth=(truth_graph, true_ls))


def cmd_synth(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    seeds = _run_seeds(cfg.seed, cfg.runs)
    jobs = [(mode, k, seeds[k]) for mode in cfg.modes for k in range(cfg.runs)]

    workers = _worker_count()
    results = {}
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_one_run, cfg, mode, s): (mode, k)
                       for mode, k, s in jobs}
            for fut, key in futures.items():
                results[key] = None
            for fut in concurrent.futures.as_completed(futures):
                results[futures[fut]] = fut.result()
    else:
        for mode, k, s in jobs:
            results[(mode, k)] = _one_run(cfg, mode, s)

    with open(os.path.join(cfg.out_dir, "truth_graph.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(cfg.true_graph()))

    for mode in cfg.modes:
        traces = [results[(mode, k)] for k in range(cfg.runs)]
        for k, trace in enumerate(traces):
            path = os.path.join(cfg.out_dir, f"trace_{mode}_run{k:02d}.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(trace.to_csv())
            if trace.rounds:
                rpath = os.path.join(cfg.out_dir, f"rounds_{mode}_run{k:02d}.csv")
                with open(rpath, "w", encoding="utf-8") as fh:
                    fh.write(trace.rounds_csv())
                for r in trace.rounds:
                    gpath = os.path.join(
                        cfg.out_dir, f"graph_{mode}_run{k:02d}_round{r.index}.txt")
                    with open(gpath, "w", encoding="utf-8") as fh:
                        fh.write(format_edge_list(r.graph, r.lengthscales))
        agg = aggregate_runs(traces)
        with open(os.path.join(cfg.out_dir, f"agg_{mode}.csv"), "w", encoding="utf-8") as fh:
            fh.write(agg.to_csv())
        if agg.round_t.size:
            path = os.path.join(cfg.out_dir, f"agg_rounds_{mode}.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(agg.rounds_csv())
    return EXIT_OK


def read_data_csv(path: str) -> ObservationSet:
    """Data file with header x_1,...,x_D,y and one observation per row."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc}") from None
    if not lines:
        raise ConfigError(f"{path}: empty data file")
    header = [tok.strip() for tok in lines[0].split(",")]
    if len(header) < 2 or header[-1] != "y" or header[:-1] != [f"x_{k + 1}" for k in range(len(header) - 1)]:
        raise ConfigError(f"{path}: line 1: header must be x_1,...,x_D,y")
    dim = len(header) - 1
    rows = []
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != dim + 1:
            raise ConfigError(f"{path}: line {lineno}: expected {dim + 1} columns, got {len(parts)}")
        try:
            nums = [float(tok) for tok in parts]
        except ValueError:
            raise ConfigError(f"{path}: line {lineno}: non-numeric value") from None
        rows.append(nums[:-1])
        values.append(nums[-1])
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return ObservationSet(np.array(rows), np.array(values))


def cmd_learn(cfg: ExperimentConfig, data_path: str, mode: str = None) -> int:
    obs = read_data_csv(data_path)
    dim = obs.X.shape[1]
    grids = cfg.lengthscale_grids(dim)
    learn_mode = mode or ("overlap" if "overlap" in cfg.modes else cfg.modes[0])
    if learn_mode not in ("overlap", "no_overlap"):
        raise ConfigError(f"learn supports modes overlap/no_overlap, got {learn_mode!r}")
    init = initial_params(dim, grids, cfg.edge_prior)
    trace = gibbs_learn(obs, init, cfg.n_gibbs, learn_mode, cfg.seed, grids,
                        cfg.noise_variance)

    os.makedirs(cfg.out_dir, exist_ok=True)
    best = trace.best_params
    with open(os.path.join(cfg.out_dir, "learned_structure.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(best.graph, best.lengthscales(grids)))
    with open(os.path.join(cfg.out_dir, "gibbs_trace.csv"), "w", encoding="utf-8") as fh:
        fh.write("step,loglik\n")
        for step, (_, score) in enumerate(trace.visited):
            fh.write(f"{step},{score!r}\n")
    return EXIT_OK


def cmd_analyze(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    dim = cfg.effective_dim()
    domain = _domain_for(cfg)
    truth_graph = cfg.true_graph()
    params = KernelParams(np.full(dim, cfg.true_lengthscale), cfg.noise_variance)
    objective = sample_synthetic(truth_graph, params, domain, function_seed(cfg.seed))

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[0])
    idx = domain.sample_indices_without_replacement(rng, cfg.analysis_observations)
    X = domain.points(idx)
    y = objective.evaluate_batch(idx) + np.sqrt(cfg.noise_variance) * rng.standard_normal(len(idx))
    obs = ObservationSet(X, y)
    decomp = maximal_cliques(truth_graph)
    gram = fit_gram(obs, decomp, params)

    samples = variance_gap_scan(domain, gram, obs, decomp, params,
                                cfg.analysis_scan_points,
                                np.random.SeedSequence(cfg.seed).spawn(2)[1])
    with open(os.path.join(cfg.out_dir, "variance_gap.csv"), "w", encoding="utf-8") as fh:
        fh.write(scan_csv(samples))

    cand_idx = domain.random_indices(rng, cfg.info_gain_candidates)
    result = greedy_info_gain(domain.points(cand_idx), cfg.info_gain_steps,
                              decomp, params)
    with open(os.path.join(cfg.out_dir, "info_gain.csv"), "w", encoding="utf-8") as fh:
        fh.write(info_gain_csv(result))

    violations = count_violations(samples)
    if violations:
        print(f"variance inequality violated at {violations} scan points", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="addbo",
        description="Additive GP Bayesian optimization with overlapping groups",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (("synth", "run the synthetic benchmark experiments"),
                       ("learn", "learn a dependency graph from a data CSV"),
                       ("analyze", "variance-gap and information-gain studies")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--runs", type=int, help="override the run count")
        p.add_argument("--mode", help="comma list of modes to run")
        if name == "learn":
            p.add_argument("data", help="CSV with columns x_1..x_D,y")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = (ExperimentConfig.from_file(args.config) if args.config
               else ExperimentConfig())
        modes = tuple(args.mode.split(",")) if args.mode else None
        cfg.overrides(seed=args.seed, out_dir=args.out, runs=args.runs, modes=modes)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "learn":
            mode = modes[0] if modes else None
            return cmd_learn(cfg, args.data, mode)
        return cmd_analyze(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InconsistencyError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
