"""Meta-dataset ingestion, splitting, subsampling and the synthetic generator.

On-disk schema (UTF-8 JSON)::

    {"search_space": "rpart.preproc", "dim": 3,
     "tasks": {"<task id>": {"X": [[...], ...], "y": [...]}, ...},
     "test_tasks": [...],            # optional fixed test split
     "scaling": {"min": [...], "max": [...]}}   # optional, X already scaled

Without a ``scaling`` block the inputs are min-max rescaled per dimension
across all tasks of the search space.
"""
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DimMismatch, ParseError, SchemaError, TooFewTasks
from ..gp import Dataset


@dataclass(frozen=True, eq=False)
class Task:
    X: np.ndarray
    y: np.ndarray

    @property
    def y_min(self):
        return float(self.y.min())

    @property
    def y_max(self):
        return float(self.y.max())

    def __len__(self):
        return self.y.size


@dataclass(frozen=True, eq=False)
class MetaDataset:
    search_space_id: str
    dim: int
    tasks: dict
    x_min: np.ndarray
    x_max: np.ndarray
    test_tasks: tuple = field(default=())

    @property
    def task_ids(self):
        return list(self.tasks)

    def to_json(self):
        doc = {
            "search_space": self.search_space_id,
            "dim": self.dim,
            "tasks": {
                tid: {"X": t.X.tolist(), "y": t.y.tolist()} for tid, t in self.tasks.items()
            },
            "scaling": {"min": self.x_min.tolist(), "max": self.x_max.tolist()},
        }
        if self.test_tasks:
            doc["test_tasks"] = list(self.test_tasks)
        return doc


def save_meta_dataset(dataset, path):
    Path(path).write_text(json.dumps(dataset.to_json()) + "\n", encoding="utf-8")


def _require(cond, msg):
    if not cond:
        raise SchemaError(msg)


def parse_meta_dataset(doc):
    _require(isinstance(doc, dict), "top level must be an object")
    for key in ("search_space", "dim", "tasks"):
        _require(key in doc, f"missing field '{key}'")
    space = doc["search_space"]
    _require(isinstance(space, str), "field 'search_space' must be a string")
    dim = doc["dim"]
    _require(isinstance(dim, int) and not isinstance(dim, bool) and dim >= 1,
             "field 'dim' must be a positive integer")
    raw = doc["tasks"]
    _require(isinstance(raw, dict) and raw, "field 'tasks' must be a non-empty object")

    tasks = {}
    for tid, t in raw.items():
        _require(isinstance(t, dict) and "X" in t and "y" in t,
                 f"task '{tid}' needs fields 'X' and 'y'")
        try:
            X = np.array(t["X"], dtype=float)
            y = np.array(t["y"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"task '{tid}': non-numeric data ({exc})") from exc
        _require(y.ndim == 1 and y.size >= 1, f"task '{tid}': 'y' must be a non-empty list")
        _require(np.all(np.isfinite(y)), f"task '{tid}': 'y' must be finite")
        _require(X.ndim == 2 and X.shape[0] == y.size,
                 f"task '{tid}': 'X' must be a {y.size}-row matrix")
        if X.shape[1] != dim:
            raise DimMismatch(f"task '{tid}': rows have {X.shape[1]} dims, search space declares {dim}")
        _require(np.all(np.isfinite(X)), f"task '{tid}': 'X' must be finite")
        tasks[str(tid)] = (X, y)

    if "scaling" in doc:
        sc = doc["scaling"]
        _require(isinstance(sc, dict) and "min" in sc and "max" in sc,
                 "field 'scaling' needs 'min' and 'max'")
        lo = np.array(sc["min"], dtype=float)
        hi = np.array(sc["max"], dtype=float)
        if lo.shape != (dim,) or hi.shape != (dim,):
            raise DimMismatch("scaling vectors must have length 'dim'")
        scaled = {tid: Task(X, y) for tid, (X, y) in tasks.items()}
    else:
        allX = np.vstack([X for X, _ in tasks.values()])
        lo, hi = allX.min(0), allX.max(0)
        span = np.where(hi > lo, hi - lo, 1.0)
        scaled = {tid: Task((X - lo) / span, y) for tid, (X, y) in tasks.items()}
    for t in scaled.values():
        t.X.setflags(write=False)
        t.y.setflags(write=False)

    test = tuple(str(t) for t in doc.get("test_tasks", ()))
    for t in test:
        _require(t in scaled, f"test task '{t}' is not a task id")
    return MetaDataset(space, dim, scaled, lo, hi, test)


def load_meta_dataset(path, format="json"):
    if format != "json":
        raise ValueError(f"unsupported format {format!r}")
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_meta_dataset(doc)


def split_tasks(dataset, ratio=0.85, seed=0):
    """Seeded shuffle; the first ceil(ratio*K) ids train, the rest test.

    The train share is capped at K-1 so the test side is never empty.
    """
    ids = sorted(dataset.task_ids)
    K = len(ids)
    if K < 2:
        raise TooFewTasks(f"need at least 2 tasks to split, got {K}")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(K)
    n_train = min(math.ceil(round(ratio * K, 9)), K - 1)
    train = [ids[i] for i in order[:n_train]]
    test = [ids[i] for i in order[n_train:]]
    return train, test


def fixed_split(dataset):
    test = list(dataset.test_tasks)
    train = [t for t in dataset.task_ids if t not in set(test)]
    return train, test


def subsample_meta_observations(task, count, seed):
    """Uniform without-replacement subsample of a task's observations."""
    m = len(task)
    if count >= m:
        return Dataset(task.X, task.y)
    idx = np.sort(np.random.default_rng(seed).choice(m, size=max(int(count), 0), replace=False))
    return Dataset(task.X[idx], task.y[idx])


def stable_hash(text):
    return zlib.crc32(str(text).encode("utf-8"))


def derive_seed(master, *parts):
    """Counter-style seed derivation: same (master, parts) -> same integer seed."""
    words = [int(master)] + [stable_hash(p) if isinstance(p, str) else int(p) for p in parts]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


# ---------------------------------------------------------------- synthetic data


def _bump_field(rng, dim, n_bumps, width):
    centers = rng.uniform(0.0, 1.0, size=(n_bumps, dim))
    amps = rng.uniform(0.3, 1.0, size=n_bumps) * rng.choice([-1.0, 1.0], size=n_bumps)
    amps[0] = 1.5  # one dominant peak gives a clear global maximum

    def f(X):
        X = np.atleast_2d(X)
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        return np.exp(-0.5 * d2 / width**2) @ amps

    return f


def make_synthetic_meta_dataset(
    seed=0,
    dim=4,
    n_per_family=5,
    n_targets=3,
    n_meta_obs=50,
    n_target_obs=300,
    noise=0.01,
    perturb=0.0,
    n_bumps=12,
    width=0.15,
    shared_design=True,
):
    """Two-family synthetic meta-dataset: tasks are f or -f plus observation noise.

    Every task gets i.i.d. noise of standard deviation ``noise``; a nonzero
    ``perturb`` also adds a per-task low-amplitude bump field. With
    ``shared_design`` all meta-tasks are evaluated on one common set of
    configurations, as in tabular HPO benchmarks; targets always get their
    own ``n_target_obs`` random configurations. Targets alternate
    between the families (A, B, A, ...) and are recorded as the fixed test
    split.
    """
    rng = np.random.default_rng(seed)
    f = _bump_field(rng, dim, n_bumps, width)

    design = rng.uniform(0.0, 1.0, size=(n_meta_obs, dim)) if shared_design else None

    def task(sign, m, X=None):
        own = _bump_field(rng, dim, 4, 2 * width)
        if X is None:
            X = rng.uniform(0.0, 1.0, size=(m, dim))
        y = sign * f(X) + perturb * own(X) + noise * rng.normal(size=m)
        return {"X": X.tolist(), "y": y.tolist()}

    tasks = {}
    for fam, sign in (("A", 1.0), ("B", -1.0)):
        for i in range(n_per_family):
            tasks[f"{fam}{i}"] = task(sign, n_meta_obs, design)
    targets = []
    for j in range(n_targets):
        fam, sign = (("A", 1.0), ("B", -1.0))[j % 2]
        tid = f"target_{fam}{j}"
        tasks[tid] = task(sign, n_target_obs)
        targets.append(tid)
    doc = {
        "search_space": "synthetic-two-family",
        "dim": dim,
        "tasks": tasks,
        "test_tasks": targets,
        "scaling": {"min": [0.0] * dim, "max": [1.0] * dim},
    }
    return parse_meta_dataset(doc)
