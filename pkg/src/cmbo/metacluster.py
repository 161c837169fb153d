"""K-means over discretized GP posteriors and clustering-quality metrics."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidC, SingleCluster
from .gaussmath import GaussianDist
from .statdist import DISTANCE_KINDS, WASSERSTEIN, distance, wasserstein2

DEFAULT_MAX_ITER = 10


@dataclass(frozen=True, eq=False)
class Clustering:
    assignments: np.ndarray
    centroids: list
    distance_kind: str
    iterations_run: int
    member_counts: list
    seed: int = 0
    converged: bool = True
    cost_history: list = field(default_factory=list)
    # (cost of the previous assignment, cost of the new one) under the same centroids
    step_costs: list = field(default_factory=list)

    @property
    def n_clusters(self):
        return len(self.centroids)

    def members(self, c):
        return np.flatnonzero(self.assignments == c)

    def groups(self):
        return [self.members(c) for c in range(self.n_clusters)]

    def to_json(self, metrics=None):
        out = {
            "assignments": [int(a) for a in self.assignments],
            "member_counts": [int(m) for m in self.member_counts],
            "n_clusters": self.n_clusters,
            "distance_kind": self.distance_kind,
            "seed": int(self.seed),
            "iterations_run": int(self.iterations_run),
            "converged": bool(self.converged),
        }
        if metrics:
            out["metrics"] = {k: float(v) for k, v in metrics.items()}
        return out


def _centroid(posteriors, idx):
    mean = np.mean([posteriors[i].mean for i in idx], axis=0)
    cov = np.mean([posteriors[i].cov for i in idx], axis=0)
    return GaussianDist(mean, cov)


def _distance_matrix(posteriors, centroids, kind):
    D = np.empty((len(posteriors), len(centroids)))
    for j, c in enumerate(centroids):
        for i, p in enumerate(posteriors):
            D[i, j] = distance(kind, p, c)
    return D


def _validate(posteriors, C, kind):
    if kind not in DISTANCE_KINDS:
        raise ValueError(f"unknown distance kind {kind!r}")
    K = len(posteriors)
    if not 1 <= C <= K:
        raise InvalidC(f"C={C} must lie in [1, {K}]")
    dims = {p.dim for p in posteriors}
    if len(dims) != 1:
        raise DimensionMismatch(f"posteriors have mixed dimensions {sorted(dims)}")


def farthest_point_seeds(posteriors, C, kind, seed):
    rng = np.random.default_rng(seed)
    K = len(posteriors)
    chosen = [int(rng.integers(K))]
    nearest = np.array([distance(kind, p, posteriors[chosen[0]]) for p in posteriors])
    while len(chosen) < C:
        masked = nearest.copy()
        masked[chosen] = -np.inf
        nxt = int(np.argmax(masked))
        chosen.append(nxt)
        nearest = np.minimum(nearest, [distance(kind, p, posteriors[nxt]) for p in posteriors])
    return chosen


def _repair_empty(assign, D, C):
    # move the member farthest from its centroid into each empty cluster
    assign = assign.copy()
    reseeded = []
    for c in range(C):
        if np.any(assign == c):
            continue
        counts = np.bincount(assign, minlength=C)
        own = D[np.arange(len(assign)), assign]
        own = np.where(counts[assign] > 1, own, -np.inf)
        own[reseeded] = -np.inf
        i = int(np.argmax(own))
        assign[i] = c
        reseeded.append(i)
    return assign


def kmeans_gd(posteriors, C, distance_kind=WASSERSTEIN, seed=0, max_iter=DEFAULT_MAX_ITER):
    """Lloyd's k-means on Gaussians with averaged centroids.

    Seeds by greedy farthest-point selection starting from a seeded random
    member; assignment ties go to the lowest cluster id.
    """
    posteriors = list(posteriors)
    _validate(posteriors, C, distance_kind)
    centroids = [posteriors[i] for i in farthest_point_seeds(posteriors, C, distance_kind, seed)]
    assign = None
    costs = []
    steps = []
    converged = False
    it = 0
    while it < max_iter:
        D = _distance_matrix(posteriors, centroids, distance_kind)
        new = _repair_empty(np.argmin(D, axis=1), D, C)
        rows = np.arange(len(new))
        costs.append(float(D[rows, new].sum()))
        if assign is not None:
            steps.append((float(D[rows, assign].sum()), costs[-1]))
        it += 1
        if assign is not None and np.array_equal(new, assign):
            converged = True
            break
        assign = new
        centroids = [_centroid(posteriors, np.flatnonzero(assign == c)) for c in range(C)]
    return Clustering(
        assignments=assign,
        centroids=centroids,
        distance_kind=distance_kind,
        iterations_run=it,
        member_counts=[int(n) for n in np.bincount(assign, minlength=C)],
        seed=seed,
        converged=converged,
        cost_history=costs,
        step_costs=steps,
    )


def pairwise_w2(posteriors):
    K = len(posteriors)
    D = np.zeros((K, K))
    for i in range(K):
        for j in range(i + 1, K):
            D[i, j] = D[j, i] = wasserstein2(posteriors[i], posteriors[j])
    return D


def intra_cluster_entropy(clustering, posteriors, pairwise=None):
    """Mean over clusters of the average within-cluster pairwise W2 distance."""
    D = pairwise_w2(posteriors) if pairwise is None else pairwise
    terms = []
    for idx in clustering.groups():
        n = len(idx)
        if n < 2:
            terms.append(0.0)
            continue
        sub = D[np.ix_(idx, idx)]
        terms.append(sub[np.triu_indices(n, 1)].sum() * 2.0 / (n * (n - 1)))
    return float(np.mean(terms))


def inter_cluster_separation(clustering, posteriors, pairwise=None):
    """Mean W2 distance over pairs of members lying in different clusters."""
    if clustering.n_clusters < 2:
        raise SingleCluster("inter-cluster separation needs at least two clusters")
    D = pairwise_w2(posteriors) if pairwise is None else pairwise
    a = np.asarray(clustering.assignments)
    cross = a[:, None] != a[None, :]
    n_pairs = cross.sum()
    if n_pairs == 0:
        return 0.0
    return float(D[cross].sum() / n_pairs)


JOINT = "joint"
PER_METRIC = "per-metric"


def _minmax(v, lo=None, hi=None):
    v = np.asarray(v, dtype=float)
    lo = v.min() if lo is None else lo
    hi = v.max() if hi is None else hi
    span = hi - lo
    if span <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        return np.zeros_like(v)
    return (v - lo) / span


def sweep_scores(intra, inter, scaling=JOINT):
    """Selection score per C: scaled interCS minus scaled intraCE.

    ``joint`` maps both metrics through one min-max transform (bounds taken
    over all values of both), so their relative magnitudes survive;
    ``per-metric`` rescales each metric to [0, 1] on its own.
    """
    intra = np.asarray(intra, dtype=float)
    inter = np.asarray(inter, dtype=float)
    if scaling == PER_METRIC:
        return _minmax(inter) - _minmax(intra)
    if scaling == JOINT:
        both = np.concatenate([intra, inter])
        lo, hi = both.min(), both.max()
        return _minmax(inter, lo, hi) - _minmax(intra, lo, hi)
    raise ValueError(f"unknown scaling {scaling!r}")


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: list  # (C, Clustering, intraCE, interCS)
    recommended: int
    scores: np.ndarray = None

    def to_json(self):
        return {
            "recommended": int(self.recommended),
            "rows": [
                {"C": int(c), "intraCE": float(a), "interCS": float(b), "score": float(s),
                 "clustering": cl.to_json()}
                for (c, cl, a, b), s in zip(self.rows, self.scores)
            ],
        }


def sweep_cluster_count(posteriors, C_range=range(2, 7), distance_kind=WASSERSTEIN, seed=0,
                        scaling=JOINT):
    """k-means for each C; recommends the C maximizing ``sweep_scores`` (ties -> smaller C)."""
    posteriors = list(posteriors)
    Cs = sorted({int(c) for c in C_range})
    if not Cs:
        raise InvalidC("empty cluster-count range")
    for c in Cs:
        if not 1 <= c <= len(posteriors):
            raise InvalidC(f"C={c} outside [1, {len(posteriors)}]")
    D = pairwise_w2(posteriors)
    rows = []
    for c in Cs:
        cl = kmeans_gd(posteriors, c, distance_kind, seed)
        intra = intra_cluster_entropy(cl, posteriors, D)
        inter = inter_cluster_separation(cl, posteriors, D) if c >= 2 else 0.0
        rows.append((c, cl, intra, inter))
    score = sweep_scores([r[2] for r in rows], [r[3] for r in rows], scaling)
    best = int(np.flatnonzero(score >= score.max() - 1e-12)[0])
    return SweepResult(rows, rows[best][0], score)
