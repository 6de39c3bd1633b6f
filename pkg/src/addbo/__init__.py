"""Additive Gaussian-process Bayesian optimization with overlapping variable groups."""

from .acquisition import (
    ComponentAcquisition,
    brute_force_maximize,
    build_acquisition_tables,
    component_ucb,
    maximize_acquisition,
    maximize_tables,
)
from .analysis import greedy_info_gain, information_gain, variance_gap_scan
from .backend import backend_name
from .domain import Domain
from .engine import (
    BOConfig,
    RegretTrace,
    aggregate_runs,
    beta_log_schedule,
    graph_accuracy,
    run_bo,
)
from .errors import (
    AddboError,
    CapacityError,
    ConfigError,
    InconsistencyError,
    NumericalError,
)
from .gp import (
    FactorizedGram,
    ObservationSet,
    fit_gram,
    log_marginal_likelihood,
    posterior_component,
    posterior_full,
)
from .graphs import (
    Decomposition,
    DependencyGraph,
    JunctionTree,
    TriangulatedGraph,
    build_junction_tree,
    is_chordal,
    maximal_cliques,
    triangulate,
)
from .kernels import KernelParams, additive_kernel, group_scales, se_kernel_component
from .structure import (
    GibbsTrace,
    StructureParams,
    edge_conditional,
    gibbs_learn,
    lengthscale_conditional,
    no_overlap_step,
)
from .synthetic import SyntheticFunction, sample_synthetic

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
