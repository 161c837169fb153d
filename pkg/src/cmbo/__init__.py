"""Clustering-based meta Bayesian optimization over discretized GP posteriors."""
from .engine import (
    CmboConfig,
    TableOracle,
    build_meta_model,
    run_baseline,
    run_cmbo,
    synthesize_prior,
    update_weights,
)
from .errors import CmboError, DataError, NumericalError
from .gaussmath import GaussianDist
from .gp import Dataset, GpModel, TaskPosterior, posterior
from .metacluster import kmeans_gd, sweep_cluster_count
from .statdist import jeffreys, kl_divergence, wasserstein2, wasserstein_barycenter
from .trace import RunTrace, nsr

__version__ = "0.1.0"
