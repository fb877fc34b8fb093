"""Edge-differentially-private release of graphs and ERGM estimation from
randomized-response releases."""
from .estimation import (
    ConvergenceWarning, EstimationConfig, FitResult, exact_loglik, fit, fit_exact,
    fit_exact_missing, fit_missing, fit_mple, fit_naive, log_ratio_missing,
    log_ratio_naive, mple, privacy_log_weights,
)
from .estimator import ERGM
from .evaluation import (
    EvalRecord, kl_divergence, kl_exact, mse_table, relative_efficiency,
)
from .graph import Graph, complete_graph, empty_graph, hamming, read_edgelist, write_edgelist
from .harness import ExperimentConfig, run_experiment, synthetic_graph
from .model import Edges, Gwdegree, Gwesp, ModelSpec, Nodematch, change_stats, stats
from .privacy import (
    PrivacyParams, RandomizedResponse, epsilon_general, epsilon_symmetric,
    log_conditional, pi_for_epsilon, release,
)
from .sampler import SampleSet, SamplerConfig, sample, sample_conditional

__version__ = "0.1.0"

__all__ = [
    "ConvergenceWarning", "EstimationConfig", "FitResult", "exact_loglik", "fit",
    "fit_exact", "fit_exact_missing", "fit_missing", "fit_mple", "fit_naive",
    "log_ratio_missing", "log_ratio_naive", "mple", "privacy_log_weights", "ERGM",
    "EvalRecord", "kl_divergence", "kl_exact", "mse_table", "relative_efficiency",
    "Graph", "complete_graph", "empty_graph", "hamming", "read_edgelist",
    "write_edgelist", "ExperimentConfig", "run_experiment", "synthetic_graph",
    "Edges", "Gwdegree", "Gwesp", "ModelSpec", "Nodematch", "change_stats", "stats",
    "PrivacyParams", "RandomizedResponse", "epsilon_general", "epsilon_symmetric",
    "log_conditional", "pi_for_epsilon", "release", "SampleSet", "SamplerConfig",
    "sample", "sample_conditional",
]
