"""Clustering-based meta-BO: prototypes, adaptive prior, and the BO loops.

Stage 1 fits one GP posterior per meta-task and clusters their
discretizations; stage 2 summarizes each cluster by a prototype; stage 3
runs BO on the target with a prior re-synthesized before every query from
the prototypes, weighted by how close the current target posterior is to
each of them.
"""
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from . import acquisition as acq
from .errors import (
    AllCandidatesExhausted,
    DimensionMismatch,
    EmptyCluster,
    NonFiniteDistance,
    OracleFailure,
)
from .gaussmath import GaussianDist, cholesky_with_jitter, sqrtm_psd
from .gp import (
    DEFAULT_NOISE,
    Dataset,
    GpModel,
    Matern32,
    TaskPosterior,
    discretize,
    fit_hyperparams,
    locate_rows,
    posterior,
    standardize,
)
from .metacluster import kmeans_gd
from .statdist import JEFFREYS, WASSERSTEIN, jeffreys, wasserstein2, wasserstein_barycenter
from .trace import RunTrace

CENTER = "center"
BARYCENTER = "barycenter"

RANDOM_SEARCH = "RandomSearch"
VANILLA_GP = "VanillaGP"
GLOBAL_CEN = "GlobalCen"
INDI_WEIGHT_JEF = "IndiWeightJef"
BASELINES = (RANDOM_SEARCH, VANILLA_GP, GLOBAL_CEN, INDI_WEIGHT_JEF)

_SHORT = {JEFFREYS: "Jef", WASSERSTEIN: "Wss"}
_LONG = {v: k for k, v in _SHORT.items()}


@dataclass(frozen=True)
class CmboConfig:
    n_clusters: int = 2
    cluster_distance: str = WASSERSTEIN
    compare_distance: str = WASSERSTEIN
    prototype: str = CENTER
    acquisition: str = acq.UCB
    beta: float = acq.DEFAULT_BETA
    T: int = 50
    n_init: int = 5
    cluster_grid_size: int = 100
    compare_grid_size: int = 300
    noise_var: float = DEFAULT_NOISE
    interpolation: float = 1.0
    seed: int = 0
    cluster_seed: int = 0
    kmeans_max_iter: int = 10

    @property
    def variant_name(self):
        name = f"{_SHORT[self.cluster_distance]}Clus_{_SHORT[self.compare_distance]}CMP"
        return name + ("_Bary" if self.prototype == BARYCENTER else "")

    def as_dict(self):
        return asdict(self)


def parse_variant(name, base=None):
    """Config for a named variant such as ``WssClus_JefCMP`` or ``WssClus_WssCMP_Bary``."""
    base = CmboConfig() if base is None else base
    parts = name.split("_")
    try:
        clus = _LONG[parts[0].removesuffix("Clus")]
        cmp_ = _LONG[parts[1].removesuffix("CMP")]
    except (IndexError, KeyError):
        raise ValueError(f"unknown cm-BO variant {name!r}") from None
    if not (parts[0].endswith("Clus") and parts[1].endswith("CMP")) or len(parts) > 3:
        raise ValueError(f"unknown cm-BO variant {name!r}")
    if len(parts) == 3 and parts[2] != "Bary":
        raise ValueError(f"unknown cm-BO variant {name!r}")
    proto = BARYCENTER if len(parts) == 3 else CENTER
    return replace(base, cluster_distance=clus, compare_distance=cmp_, prototype=proto)


# ---------------------------------------------------------------- oracle


class TableOracle:
    """Target task given as a finite table of (candidate, value) pairs."""

    def __init__(self, X, y, name="target"):
        self.candidates = np.asarray(X, dtype=float)
        self.values = np.asarray(y, dtype=float)
        if self.candidates.shape[0] != self.values.size:
            raise DimensionMismatch("candidate and value counts differ")
        self.name = name

    def __len__(self):
        return self.values.size

    def __call__(self, index):
        return float(self.values[index])

    @property
    def y_min(self):
        return float(self.values.min())

    @property
    def y_max(self):
        return float(self.values.max())


def _query(oracle, index):
    try:
        y = float(oracle(index))
    except Exception as exc:  # noqa: BLE001 - any oracle error is reported uniformly
        raise OracleFailure(f"oracle failed at candidate {index}: {exc}") from exc
    if not np.isfinite(y):
        raise OracleFailure(f"oracle returned non-finite value at candidate {index}")
    return y


# ---------------------------------------------------------------- prototypes


def _on(member, points):
    if isinstance(member, GpModel):
        return discretize(member, points)
    return member.on(points)


@dataclass(frozen=True, eq=False)
class GeometricCenter:
    """Equal-weight average of member GP posteriors, evaluable on any points."""

    members: tuple
    kind = CENTER

    @property
    def coefficients(self):
        n = len(self.members)
        return np.full(n, 1.0 / n)

    def on(self, points):
        dists = [_on(m, points) for m in self.members]
        mean = np.mean([g.mean for g in dists], axis=0)
        cov = np.mean([g.cov for g in dists], axis=0)
        return GaussianDist(mean, cov)


@dataclass(frozen=True, eq=False)
class PinnedPrototype:
    """A prototype fixed as a Gaussian on ``grid`` (e.g. a W2 barycenter)."""

    dist: GaussianDist
    grid: np.ndarray
    kind = BARYCENTER

    def on(self, points):
        idx = locate_rows(self.grid, points)
        return self.dist.restrict(idx)


def geometric_center(members):
    members = tuple(members)
    if not members:
        raise EmptyCluster("cannot build a prototype for an empty cluster")
    return GeometricCenter(members)


def barycenter_prototype(members, grid, tol=1e-7, max_iter=200):
    """W2 barycenter of the members discretized on ``grid``, with equal weights."""
    members = tuple(members)
    if not members:
        raise EmptyCluster("cannot build a prototype for an empty cluster")
    grid = np.asarray(grid, dtype=float)
    dists = [_on(m, grid) for m in members]
    bary = wasserstein_barycenter(dists, np.full(len(dists), 1.0 / len(dists)), tol, max_iter)
    return PinnedPrototype(bary, grid)


# ---------------------------------------------------------------- weights and prior


@dataclass(frozen=True, eq=False)
class WeightState:
    weights: np.ndarray
    last_distances: np.ndarray
    tau: int = 0

    @classmethod
    def initial(cls, C):
        return cls(np.full(C, 1.0 / C), np.zeros(C), 0)


def update_weights(distances, prev, interpolation=1.0):
    """Softmax of ``1 - d_i / d_max``; uniform when every distance is zero.

    ``interpolation`` < 1 blends the new weights with the previous ones.
    """
    d = np.asarray(distances, dtype=float)
    if d.shape != prev.weights.shape:
        raise DimensionMismatch(f"{d.size} distances for {prev.weights.size} prototypes")
    if not np.all(np.isfinite(d)):
        raise NonFiniteDistance("prototype distances must be finite")
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    d_max = d.max()
    if d_max == 0.0:
        w = np.full(d.size, 1.0 / d.size)
    else:
        e = np.exp(1.0 - d / d_max)
        w = e / e.sum()
    if interpolation != 1.0:
        w = interpolation * w + (1.0 - interpolation) * prev.weights
        w = w / w.sum()
    return WeightState(w, d, prev.tau + 1)


def synthesize_prior(prototypes, weights, eval_points, noise_var=DEFAULT_NOISE):
    """GP prior on ``eval_points``: mean sum w_i mu_i, covariance sum w_i^2 k_i.

    ``prototypes`` may also be GaussianDists already evaluated on the points.
    """
    w = weights.weights if isinstance(weights, WeightState) else np.asarray(weights, float)
    if w.size != len(prototypes) or abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
        raise ValueError("weights must be a simplex vector, one per prototype")
    dists = [p if isinstance(p, GaussianDist) else p.on(eval_points) for p in prototypes]
    mean = sum(wi * g.mean for wi, g in zip(w, dists))
    cov = sum(wi * wi * g.cov for wi, g in zip(w, dists))
    cholesky_with_jitter(cov)
    return GpModel(eval_points, mean, cov, noise_var, check=False)


# ---------------------------------------------------------------- stages 1 and 2


def cluster_index_grid(dim, n=100, seed=0):
    """Shared scrambled-Sobol index points in the unit hypercube."""
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)[:n]
    return pts


@dataclass(eq=False)
class MetaModel:
    posteriors: list
    cluster_grid: np.ndarray
    clustering: object
    prototypes: list = field(default_factory=list)
    config: CmboConfig = None
    _pinned: dict = field(default_factory=dict)

    @property
    def discretized(self):
        return [p.on(self.cluster_grid) for p in self.posteriors]

    def prototypes_for(self, grid):
        """Prototypes usable on ``grid``; barycenters are pinned to it."""
        if self.config.prototype == CENTER:
            return self.prototypes
        key = np.asarray(grid).tobytes()
        if key not in self._pinned:
            self._pinned[key] = [
                barycenter_prototype(
                    [self.posteriors[i] for i in self.clustering.members(c)], grid
                )
                for c in range(self.clustering.n_clusters)
            ]
        return self._pinned[key]


def fit_meta_posteriors(meta_tasks, noise_var=DEFAULT_NOISE):
    out = []
    for t in meta_tasks:
        if isinstance(t, TaskPosterior):
            out.append(t)
        else:
            out.append(TaskPosterior.fit(t.X, t.y, noise_var=noise_var))
    return out


def build_meta_model(meta_tasks, config):
    """Stages 1 and 2: per-task posteriors, clustering and prototypes."""
    posts = fit_meta_posteriors(meta_tasks, config.noise_var)
    if not posts:
        raise EmptyCluster("no meta-tasks given")
    dim = posts[0].input_dim
    grid = cluster_index_grid(dim, config.cluster_grid_size, config.cluster_seed)
    gds = [p.on(grid) for p in posts]
    C = min(config.n_clusters, len(posts))
    clustering = kmeans_gd(gds, C, config.cluster_distance, config.cluster_seed,
                           config.kmeans_max_iter)
    protos = [
        geometric_center([posts[i] for i in clustering.members(c)])
        for c in range(clustering.n_clusters)
    ]
    return MetaModel(posts, grid, clustering, protos, config)


# ---------------------------------------------------------------- BO loops


def comparison_grid(oracle, size, seed):
    """Candidate indices used as the comparison grid (all, or a seeded subset)."""
    n = len(oracle)
    if n <= size:
        return np.arange(n)
    return np.sort(np.random.default_rng(seed).choice(n, size, replace=False))


def _start(oracle, config, method, run_id=""):
    n = len(oracle)
    if config.n_init > n:
        raise AllCandidatesExhausted("more initial points than candidates")
    rng = np.random.default_rng(config.seed)
    init = rng.choice(n, config.n_init, replace=False)
    trace = RunTrace(method, config.seed, f"n{n}", run_id, oracle.y_min, oracle.y_max,
                     config=config.as_dict())
    for i in init:
        trace.append(0, i, oracle.candidates[i], _query(oracle, int(i)))
    return trace, rng


def _observed(trace, V):
    idx = np.array(trace.queried, dtype=int)
    ys, _, _ = standardize([r.y for r in trace.records])
    return idx, ys, Dataset(V[idx], ys)


def _distance(kind, G, proto, sqrt_proto):
    if kind == WASSERSTEIN:
        return wasserstein2(G, proto, sqrt_q=sqrt_proto)
    return jeffreys(G, proto)


def _adaptive_loop(prototypes, oracle, config, method, run_id="", fixed_weights=False):
    """Stage 3 on a finite candidate table (shared by cm-BO and its ablations)."""
    trace, _ = _start(oracle, config, method, run_id)
    V = oracle.candidates
    C = len(prototypes)
    on_V = [p.on(V) for p in prototypes]
    roots = [sqrtm_psd(g.cov) if config.compare_distance == WASSERSTEIN else None for g in on_V]
    state = WeightState.initial(C)
    init_w = tuple(float(w) for w in state.weights)
    trace.records[:] = [replace(r, weights=init_w) for r in trace.records]
    for tau in range(1, config.T + 1):
        prior = synthesize_prior(on_V, state, V, config.noise_var)
        idx, ys, data = _observed(trace, V)
        post = posterior(prior, data)
        _, nxt = acq.acquisition(config.acquisition, post.prior_mean, post.var, ys.max(),
                                 config.beta, exclude=idx)
        y = _query(oracle, nxt)
        if fixed_weights or C == 1:
            d = np.zeros(C)
        else:
            G = GaussianDist(post.prior_mean, post.prior_cov)
            d = np.array([_distance(config.compare_distance, G, g, r)
                          for g, r in zip(on_V, roots)])
            state = update_weights(d, state, config.interpolation)
        trace.append(tau, nxt, V[nxt], y, state.weights, d)
    return trace


def run_cmbo(meta_tasks, target_oracle, config=CmboConfig(), meta_model=None, run_id=""):
    """Full clustering-based meta-BO run against ``target_oracle``.

    ``meta_tasks`` are Datasets (raw outputs) or fitted TaskPosteriors; a
    prebuilt ``meta_model`` skips stages 1-2.
    """
    if meta_model is None:
        meta_model = build_meta_model(meta_tasks, config)
    protos = meta_model.prototypes_for(target_oracle.candidates)
    return _adaptive_loop(protos, target_oracle, config, config.variant_name, run_id)


def _random_search(oracle, config, run_id):
    trace, rng = _start(oracle, config, RANDOM_SEARCH, run_id)
    remaining = np.setdiff1d(np.arange(len(oracle)), trace.queried)
    order = rng.permutation(remaining)
    if config.T > order.size:
        raise AllCandidatesExhausted("T exceeds the number of unqueried candidates")
    for tau, i in enumerate(order[: config.T], start=1):
        trace.append(tau, i, oracle.candidates[i], _query(oracle, int(i)))
    return trace


def _vanilla_gp(oracle, config, run_id):
    trace, _ = _start(oracle, config, VANILLA_GP, run_id)
    V = oracle.candidates
    template = Matern32((1.0,) * V.shape[1])
    for tau in range(1, config.T + 1):
        idx, ys, data = _observed(trace, V)
        kernel = fit_hyperparams(template, data, config.noise_var)
        prior = GpModel(V, np.zeros(len(V)), kernel.gram(V), config.noise_var, check=False)
        post = posterior(prior, data)
        _, nxt = acq.acquisition(config.acquisition, post.prior_mean, post.var, ys.max(),
                                 config.beta, exclude=idx)
        trace.append(tau, nxt, V[nxt], _query(oracle, nxt))
    return trace


def run_baseline(kind, target_oracle, meta_tasks=(), config=CmboConfig(), meta_model=None,
                 run_id=""):
    if kind == RANDOM_SEARCH:
        return _random_search(target_oracle, config, run_id)
    if kind == VANILLA_GP:
        return _vanilla_gp(target_oracle, config, run_id)
    posts = meta_model.posteriors if meta_model is not None else fit_meta_posteriors(
        meta_tasks, config.noise_var)
    if kind == GLOBAL_CEN:
        cfg = replace(config, prototype=CENTER)
        return _adaptive_loop([geometric_center(posts)], target_oracle, cfg, GLOBAL_CEN,
                              run_id, fixed_weights=True)
    if kind == INDI_WEIGHT_JEF:
        cfg = replace(config, compare_distance=JEFFREYS, prototype=CENTER)
        protos = [geometric_center([p]) for p in posts]
        return _adaptive_loop(protos, target_oracle, cfg, INDI_WEIGHT_JEF, run_id)
    raise ValueError(f"unknown baseline {kind!r}")
