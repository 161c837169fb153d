"""Benchmark harness: datasets, experiment matrix, aggregation and CLI."""
from .data import MetaDataset, load_meta_dataset, make_synthetic_meta_dataset, split_tasks
from .experiment import ExperimentConfig, run_matrix
from .metrics import aggregate
