"""Exact GP regression over a finite candidate grid.

Kernels are small frozen dataclasses whose Gram matrices come from the
compiled kernels in :mod:`cmbo._accel`. A :class:`GpModel` holds a GP
restricted to a grid (mean vector plus dense covariance), so conditioning
on observations is plain submatrix algebra.
"""
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import _accel
from .errors import DimensionMismatch, InsufficientData, RowNotOnGrid, DataError
from .gaussmath import GaussianDist, cholesky_with_jitter, min_eig_ratio, PSD_RTOL, symmetrize
from .errors import NotPositiveDefinite

NOISE_FLOOR = 1e-8
DEFAULT_NOISE = 1e-4
ROW_TOL = 1e-12
HYPER_GRID = np.logspace(-2.0, 1.0, 21)


# ---------------------------------------------------------------- kernels


def _as_points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


@dataclass(frozen=True)
class _Stationary:
    lengthscales: tuple
    variance: float = 1.0
    kind = None

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if not ls or min(ls) <= 0:
            raise ValueError("lengthscales must be strictly positive")
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        object.__setattr__(self, "lengthscales", ls)

    @property
    def input_dim(self):
        return len(self.lengthscales)

    def gram(self, X1, X2=None):
        X1 = _as_points(X1)
        X2 = X1 if X2 is None else _as_points(X2)
        if X1.shape[1] != self.input_dim or X2.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"kernel expects {self.input_dim} input dims, got {X1.shape[1]} and {X2.shape[1]}"
            )
        K = _accel.gram(X1, X2, np.asarray(self.lengthscales), self.kind)
        if self.variance != 1.0:
            K *= self.variance
        return K

    def with_lengthscale(self, ell):
        return replace(self, lengthscales=(float(ell),) * self.input_dim, variance=1.0)


@dataclass(frozen=True)
class Matern12(_Stationary):
    kind = _accel.MATERN12


@dataclass(frozen=True)
class Matern32(_Stationary):
    kind = _accel.MATERN32


@dataclass(frozen=True)
class RBF(_Stationary):
    kind = _accel.RBF


@dataclass(frozen=True)
class ElementwiseProduct:
    kernels: tuple

    def __post_init__(self):
        ks = tuple(self.kernels)
        if not ks:
            raise ValueError("product kernel needs at least one factor")
        if len({k.input_dim for k in ks}) != 1:
            raise DimensionMismatch("product factors disagree on input dimension")
        object.__setattr__(self, "kernels", ks)

    @property
    def input_dim(self):
        return self.kernels[0].input_dim

    def gram(self, X1, X2=None):
        return reduce(np.multiply, (k.gram(X1, X2) for k in self.kernels))

    def with_lengthscale(self, ell):
        return ElementwiseProduct(tuple(k.with_lengthscale(ell) for k in self.kernels))


@dataclass(frozen=True)
class Scaled:
    signal_variance: float
    inner: object

    def __post_init__(self):
        if self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive")

    @property
    def input_dim(self):
        return self.inner.input_dim

    def gram(self, X1, X2=None):
        return self.signal_variance * self.inner.gram(X1, X2)

    def with_lengthscale(self, ell):
        return self.inner.with_lengthscale(ell)


def kernel_eval(k, x, x2):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.size != k.input_dim:
        raise DimensionMismatch(
            f"points of shape {x.shape} and {x2.shape} for a {k.input_dim}-d kernel"
        )
    return float(k.gram(x[None, :], x2[None, :])[0, 0])


def meta_task_kernel(dim):
    """Default kernel for meta-task posteriors: Matern-3/2 times Matern-1/2."""
    return ElementwiseProduct((Matern32((1.0,) * dim), Matern12((1.0,) * dim)))


# ---------------------------------------------------------------- data types


def _unique_rows(X, tol=ROW_TOL):
    if len(X) < 2:
        return True
    from scipy.spatial.distance import pdist

    return bool(pdist(X).min() > tol)


def locate_rows(grid, X, tol=ROW_TOL):
    """Index of each row of ``X`` in ``grid``; raises RowNotOnGrid otherwise."""
    grid = _as_points(grid)
    X = _as_points(X)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=int)
    if X.shape[1] != grid.shape[1]:
        raise DimensionMismatch(f"rows have {X.shape[1]} dims, grid has {grid.shape[1]}")
    d2 = ((X[:, None, :] - grid[None, :, :]) ** 2).sum(-1)
    idx = np.argmin(d2, axis=1)
    miss = d2[np.arange(len(X)), idx] > tol * tol
    if np.any(miss):
        raise RowNotOnGrid(f"{int(miss.sum())} data row(s) are not grid points")
    return idx


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        X = np.array(self.X, dtype=float)
        if X.size == 0:
            X = X.reshape(0, X.shape[1] if X.ndim == 2 else 0)
        elif X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise DimensionMismatch(f"{X.shape[0]} inputs but {y.size} outputs")
        if not np.all(np.isfinite(y)):
            raise DataError("outputs must be finite")
        if not _unique_rows(X):
            raise DataError("dataset contains duplicate input rows")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0))

    def __len__(self):
        return self.y.size

    def union(self, other):
        return Dataset(np.vstack([self.X, other.X]), np.concatenate([self.y, other.y]))


@dataclass(frozen=True, eq=False)
class GpModel:
    """A GP restricted to ``grid``: mean vector, covariance and noise level.

    For a posterior, ``prior_mean``/``prior_cov`` hold the conditioned
    moments, which then act as the prior for any further conditioning.
    """

    grid: np.ndarray
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    noise_var: float = DEFAULT_NOISE
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        grid = _as_points(self.grid)
        mean = np.asarray(self.prior_mean, dtype=float).reshape(-1)
        cov = symmetrize(self.prior_cov)
        n = grid.shape[0]
        if mean.size != n or cov.shape != (n, n):
            raise DimensionMismatch(
                f"grid has {n} rows, mean {mean.size}, cov {cov.shape}"
            )
        if self.check:
            if not _unique_rows(grid):
                raise DataError("grid rows must be unique")
            if n and min_eig_ratio(cov) < -PSD_RTOL:
                raise NotPositiveDefinite("prior covariance is not PSD")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "prior_mean", mean)
        object.__setattr__(self, "prior_cov", cov)
        object.__setattr__(self, "noise_var", max(float(self.noise_var), NOISE_FLOOR))

    @classmethod
    def from_kernel(cls, grid, kernel, mean=None, noise_var=DEFAULT_NOISE):
        grid = _as_points(grid)
        mu = np.zeros(len(grid)) if mean is None else np.broadcast_to(mean, (len(grid),))
        return cls(grid, mu, kernel.gram(grid), noise_var)

    @property
    def var(self):
        return np.diag(self.prior_cov).copy()


# ---------------------------------------------------------------- inference


def posterior(model, data):
    """Condition ``model`` on ``data`` (whose inputs must be grid rows)."""
    if len(data) == 0:
        return model
    idx = locate_rows(model.grid, data.X)
    K = model.prior_cov
    Kxx = K[np.ix_(idx, idx)] + model.noise_var * np.eye(len(idx))
    L, _ = cholesky_with_jitter(Kxx)
    Kxg = K[idx, :]
    alpha = cho_solve((L, True), data.y - model.prior_mean[idx])
    mean = model.prior_mean + Kxg.T @ alpha
    V = solve_triangular(L, Kxg, lower=True)
    cov = K - V.T @ V
    return GpModel(model.grid, mean, cov, model.noise_var, check=False)


def _gaussian_loglik(K, r):
    L, _ = cholesky_with_jitter(K)
    alpha = cho_solve((L, True), r)
    return float(
        -0.5 * r @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * r.size * np.log(2.0 * np.pi)
    )


def log_marginal_likelihood(model, data):
    if len(data) < 1:
        raise InsufficientData("log marginal likelihood needs at least one observation")
    idx = locate_rows(model.grid, data.X)
    K = model.prior_cov[np.ix_(idx, idx)] + model.noise_var * np.eye(len(idx))
    return _gaussian_loglik(K, data.y - model.prior_mean[idx])


def fit_hyperparams(kernel_family, data, noise_var=DEFAULT_NOISE):
    """Grid-search a shared lengthscale and signal variance by marginal likelihood.

    Both range over ``logspace(-2, 1, 21)``; the prior mean is zero. Ties go
    to the smaller lengthscale, then the smaller variance.
    """
    if len(data) < 2:
        raise InsufficientData("hyperparameter fitting needs at least two observations")
    noise = max(float(noise_var), NOISE_FLOOR)
    y = data.y
    m = y.size
    eye = np.eye(m)
    best, best_ll = None, -np.inf
    for ell in HYPER_GRID:
        base = kernel_family.with_lengthscale(ell)
        G = base.gram(data.X)
        for var in HYPER_GRID:
            K = var * G + noise * eye
            try:
                L = np.linalg.cholesky(K)
            except np.linalg.LinAlgError:
                try:
                    L, _ = cholesky_with_jitter(K)
                except NotPositiveDefinite:
                    continue
            alpha = cho_solve((L, True), y)
            ll = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * m * np.log(2 * np.pi)
            if ll > best_ll:
                best, best_ll = (ell, var), ll
    if best is None:
        raise NotPositiveDefinite("no hyperparameter setting gave a PD Gram matrix")
    ell, var = best
    return Scaled(float(var), kernel_family.with_lengthscale(ell))


def discretize(model, points=None, *, indices=None):
    """Restrict a GP model to some of its grid rows as a GaussianDist."""
    if indices is None:
        indices = np.arange(len(model.grid)) if points is None else locate_rows(model.grid, points)
    idx = np.asarray(indices, dtype=int)
    return GaussianDist(model.prior_mean[idx], model.prior_cov[np.ix_(idx, idx)])


# ---------------------------------------------------------------- task posteriors


def standardize(y):
    """Zero-mean, unit-variance copy of ``y`` plus the (shift, scale) used."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return y.copy(), 0.0, 1.0
    shift = float(y.mean())
    scale = float(y.std())
    if not np.isfinite(scale) or scale < 1e-12:
        scale = 1.0
    return (y - shift) / scale, shift, scale


class TaskPosterior:
    """Posterior of a zero-mean GP fitted to one task, evaluable anywhere.

    The same conditioning algebra as :func:`posterior`, but with the training
    inputs kept off-grid so the posterior can be discretized on any point set.
    """

    def __init__(self, kernel, data, noise_var=DEFAULT_NOISE):
        self.kernel = kernel
        self.data = data
        self.noise_var = max(float(noise_var), NOISE_FLOOR)
        K = kernel.gram(data.X) + self.noise_var * np.eye(len(data))
        self._L, self.jitter = cholesky_with_jitter(K)
        self._alpha = cho_solve((self._L, True), data.y)

    @classmethod
    def fit(cls, X, y, template=None, noise_var=DEFAULT_NOISE):
        X = _as_points(X)
        ys, _, _ = standardize(y)
        data = Dataset(X, ys)
        template = meta_task_kernel(X.shape[1]) if template is None else template
        return cls(fit_hyperparams(template, data, noise_var), data, noise_var)

    @property
    def input_dim(self):
        return self.data.X.shape[1]

    def mean(self, points):
        return self.kernel.gram(points, self.data.X) @ self._alpha

    def cov(self, points, points2=None):
        P = _as_points(points)
        Q = P if points2 is None else _as_points(points2)
        Vp = solve_triangular(self._L, self.kernel.gram(self.data.X, P), lower=True)
        Vq = Vp if points2 is None else solve_triangular(
            self._L, self.kernel.gram(self.data.X, Q), lower=True
        )
        C = self.kernel.gram(P, Q) - Vp.T @ Vq
        return symmetrize(C) if points2 is None else C

    def on(self, points):
        return GaussianDist(self.mean(points), self.cov(points))
