"""Differentially private network release and noise-aware ERGM inference.

The pipeline: hold a true graph x, flip each dyad independently (keep an edge
with probability p, keep a non-edge with probability q), publish the result y,
then fit an ERGM to y either at face value or with the flipping treated as a
missing-data problem.  The privacy guarantee, the release step, the samplers,
and both estimators live in the submodules re-exported here.
"""

__version__ = "0.1.0"

from .netgraph import (
    CatColumn,
    Graph,
    GraphFormatError,
    NodeAttributes,
    NumColumn,
    dyad_count,
    dyad_endpoints,
    dyad_index,
    hamming_distance,
    load_attributes,
    load_edge_list,
    write_edge_list,
)
from .terms import (
    CompiledModel,
    ModelError,
    ModelSpec,
    TermSpec,
    change_stats,
    compile_model,
    compute_stats,
    gwesp_weight,
    parse_model,
)
from .privacy import (
    EdpCheck,
    MechanismError,
    MechanismParams,
    RiskReport,
    build_mechanism,
    conditional_llr,
    eps_for_flip,
    epsilon_of,
    feasible_bounds,
    log_mechanism_prob,
    optimal_pq,
    parse_mechanism,
    release,
    verify_edp,
)
from .mcmc import ChainConfig, SampleSet, init_graph, sample_conditional, sample_ergm
from .inference import (
    FitConfig,
    FitResult,
    InferenceError,
    KLConfig,
    KLEstimate,
    MLEDoesNotExistError,
    SeparationError,
    denoise,
    dyad_independent_fit,
    exact_fit_small,
    kl_utility,
    mcmle_fit,
    missing_data_fit,
    missing_information,
    wald_table,
)
from .evalharness import (
    ExperimentPlan,
    ExperimentReport,
    FitRecord,
    HarnessError,
    run_experiment,
    summarize,
    summary_rows,
    uniform_sweep,
)

__all__ = [
    "__version__",
    "CatColumn",
    "ChainConfig",
    "CompiledModel",
    "EdpCheck",
    "ExperimentPlan",
    "ExperimentReport",
    "FitConfig",
    "FitRecord",
    "FitResult",
    "Graph",
    "GraphFormatError",
    "HarnessError",
    "InferenceError",
    "KLConfig",
    "KLEstimate",
    "MLEDoesNotExistError",
    "MechanismError",
    "MechanismParams",
    "ModelError",
    "ModelSpec",
    "NodeAttributes",
    "NumColumn",
    "RiskReport",
    "SampleSet",
    "SeparationError",
    "TermSpec",
    "build_mechanism",
    "change_stats",
    "compile_model",
    "compute_stats",
    "conditional_llr",
    "denoise",
    "dyad_count",
    "dyad_endpoints",
    "dyad_index",
    "dyad_independent_fit",
    "eps_for_flip",
    "epsilon_of",
    "exact_fit_small",
    "feasible_bounds",
    "gwesp_weight",
    "hamming_distance",
    "init_graph",
    "kl_utility",
    "load_attributes",
    "load_edge_list",
    "log_mechanism_prob",
    "mcmle_fit",
    "missing_data_fit",
    "missing_information",
    "optimal_pq",
    "parse_mechanism",
    "parse_model",
    "release",
    "run_experiment",
    "sample_conditional",
    "sample_ergm",
    "summarize",
    "summary_rows",
    "uniform_sweep",
    "verify_edp",
    "wald_table",
    "write_edge_list",
]
