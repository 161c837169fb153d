"""Seeded experiment matrix: splits x targets x runs x acquisitions x methods.

Every random choice draws from a seed derived from the master seed and the
cell coordinates, so any cell can be rerun on its own and the whole matrix
is a pure function of (dataset, config, master seed) regardless of the
worker count.
"""
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from ..engine import (
    BASELINES,
    RANDOM_SEARCH,
    VANILLA_GP,
    CmboConfig,
    TableOracle,
    build_meta_model,
    parse_variant,
    run_baseline,
    run_cmbo,
)
from ..trace import RunTrace, csv_header
from .data import derive_seed, fixed_split, split_tasks, subsample_meta_observations

DEFAULT_METHODS = ("WssClus_WssCMP", VANILLA_GP, RANDOM_SEARCH)
METHOD_ALIASES = {"cmbo": "WssClus_WssCMP", "vanilla": VANILLA_GP, "random": RANDOM_SEARCH}
WORKERS_ENV = "CMBO_WORKERS"


@dataclass(frozen=True)
class ExperimentConfig:
    split_ratio: float = 0.85
    n_split_seeds: int = 5
    runs_per_target: int = 8
    T: int = 50
    n_init: int = 5
    meta_obs_per_task: int = 50
    C_range: tuple = (2, 3, 4, 5, 6)
    n_clusters: int = 2
    methods: tuple = DEFAULT_METHODS
    afs: tuple = ("ucb",)
    cluster_grid_size: int = 100
    compare_grid_size: int = 300
    threshold: float = 0.005
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie in (0, 1)")
        for name in ("n_split_seeds", "runs_per_target", "T", "n_init", "meta_obs_per_task",
                     "n_clusters", "cluster_grid_size", "compare_grid_size", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.methods or not self.afs:
            raise ValueError("need at least one method and one acquisition")
        for m in self.methods:
            if m not in BASELINES:
                parse_variant(m)

    def cmbo_config(self, method, af, seed):
        base = CmboConfig(
            n_clusters=self.n_clusters, acquisition=af, T=self.T, n_init=self.n_init,
            cluster_grid_size=self.cluster_grid_size,
            compare_grid_size=self.compare_grid_size, seed=seed,
        )
        return base if method in BASELINES else parse_variant(method, base)

    def as_dict(self):
        d = asdict(self)
        d["C_range"] = list(self.C_range)
        d["methods"] = list(self.methods)
        d["afs"] = list(self.afs)
        return d


def resolve_method(name):
    return METHOD_ALIASES.get(name, name)


def worker_count(config):
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return config.workers
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return n


def splits(dataset, config):
    """(split index, train ids, test ids); a dataset-declared split is used once."""
    if dataset.test_tasks:
        train, test = fixed_split(dataset)
        return [(0, train, test)]
    return [
        (s, *split_tasks(dataset, config.split_ratio, derive_seed(config.seed, "split", s)))
        for s in range(config.n_split_seeds)
    ]


def target_oracle(dataset, tid, config, split):
    """Target task restricted to at most ``compare_grid_size`` candidates."""
    task = dataset.tasks[tid]
    sub = subsample_meta_observations(
        task, config.compare_grid_size, derive_seed(config.seed, "target", split, tid))
    return TableOracle(sub.X, sub.y, name=tid)


def meta_data(dataset, train, config, split):
    return [
        subsample_meta_observations(dataset.tasks[t], config.meta_obs_per_task,
                                    derive_seed(config.seed, "meta", split, t))
        for t in train
    ]


def method_label(config, method, af):
    return method if len(config.afs) == 1 else f"{method}/{af}"


def _cell(args):
    """All runs of one method and acquisition on one split."""
    dataset, config, split, train, test, method, af = args
    meta = None
    meta_model = None
    traces = []
    for tid in test:
        oracle = target_oracle(dataset, tid, config, split)
        for r in range(config.runs_per_target):
            seed = derive_seed(config.seed, split, tid, r)
            cfg = config.cmbo_config(method, af, seed)
            run_id = f"s{split}-{tid}-r{r}-{af}"
            if method in (RANDOM_SEARCH, VANILLA_GP):
                tr = run_baseline(method, oracle, config=cfg, run_id=run_id)
            else:
                if meta is None:
                    meta = meta_data(dataset, train, config, split)
                    meta_model = build_meta_model(meta, cfg)
                if method in BASELINES:
                    tr = run_baseline(method, oracle, meta, cfg, meta_model, run_id)
                else:
                    tr = run_cmbo(meta, oracle, cfg, meta_model, run_id)
            tr.method = method_label(config, method, af)
            traces.append(tr)
    return traces


def run_matrix(dataset, config):
    """Run every (split, method, acquisition) cell; returns traces in a fixed order."""
    jobs = [
        (dataset, config, s, train, test, m, af)
        for s, train, test in splits(dataset, config)
        for af in config.afs
        for m in config.methods
    ]
    n = min(worker_count(config), len(jobs))
    if n <= 1:
        results = [_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_cell, jobs))
    return [t for cell in results for t in cell]


def trace_stem(trace):
    return f"{trace.run_id}__{trace.method.replace('/', '-')}"


def write_traces(traces, out_dir):
    """One CSV + JSON per trace, then a merged ``traces.csv`` in matrix order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for tr in traces:
        (out / f"{trace_stem(tr)}.csv").write_text(tr.to_csv(), encoding="utf-8", newline="")
        (out / f"{trace_stem(tr)}.json").write_text(tr.dumps() + "\n", encoding="utf-8",
                                                   newline="")
    if traces:
        n_w = max(t.n_weights() for t in traces)
        merged = ",".join(csv_header(n_w)) + "\n"
        merged += "".join(t.to_csv(n_w, header=False) for t in traces)
        (out / "traces.csv").write_text(merged, encoding="utf-8", newline="")
    return out


def read_traces(trace_dir):
    """Load every per-trace JSON file in ``trace_dir`` (sorted by name)."""
    paths = sorted(Path(trace_dir).glob("*.json"))
    out = []
    for p in paths:
        doc = json.loads(p.read_text(encoding="utf-8"))
        if isinstance(doc, dict) and "records" in doc and "method" in doc:
            out.append(RunTrace.from_json(doc))
    return out


def sweep_runs(dataset, config, method="WssClus_WssCMP", af="ucb"):
    """Per-C traces of one cm-BO variant, for C over ``config.C_range``."""
    out = {}
    for C in config.C_range:
        cfg = replace(config, n_clusters=int(C), methods=(method,), afs=(af,))
        out[int(C)] = run_matrix(dataset, cfg)
    return out


def mean_curve(traces):
    return np.mean([t.nsr_by_tau() for t in traces], axis=0)
