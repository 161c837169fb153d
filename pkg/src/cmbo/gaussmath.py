"""Symmetric-matrix primitives and the finite-dimensional Gaussian value type."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EigenFailure, NotPositiveDefinite

SYM_TOL = 1e-9
PSD_RTOL = 1e-8
MAX_JITTER = 1e-4


def symmetrize(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def _check_square(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")


def jitter_schedule(base_jitter=1e-10):
    """Jitter levels tried in order: 0, then base_jitter * 10**k up to 1e-4."""
    levels = [0.0]
    j = float(base_jitter)
    while j <= MAX_JITTER * (1 + 1e-12):
        levels.append(j)
        j *= 10.0
    if levels[-1] < MAX_JITTER * (1 - 1e-12):
        levels.append(MAX_JITTER)
    return levels


def cholesky_with_jitter(A, base_jitter=1e-10):
    """Lower Cholesky factor of ``A + jitter * I`` with escalating jitter.

    Returns ``(L, jitter)``; ``jitter`` is 0.0 when ``A`` factorizes as is.
    Raises :class:`NotPositiveDefinite` if even 1e-4 does not help.
    """
    A = np.asarray(A, dtype=float)
    _check_square(A)
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    if not np.allclose(A, A.T, rtol=0.0, atol=SYM_TOL * max(1.0, np.abs(A).max(initial=0.0))):
        raise NotPositiveDefinite("matrix is not symmetric")
    eye = np.eye(A.shape[0])
    for jitter in jitter_schedule(base_jitter):
        try:
            L = np.linalg.cholesky(A + jitter * eye if jitter else A)
        except np.linalg.LinAlgError:
            continue
        return L, jitter
    raise NotPositiveDefinite(
        f"Cholesky failed up to jitter {MAX_JITTER:g} (n={A.shape[0]})"
    )


def logdet_psd(A, base_jitter=1e-10):
    L, _ = cholesky_with_jitter(A, base_jitter)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _eigh(A):
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
        raise EigenFailure("eigendecomposition produced non-finite values")
    return w, V


def sqrtm_psd(A):
    """Symmetric PSD square root; negative eigenvalues are clamped to zero."""
    A = symmetrize(A)
    _check_square(A)
    w, V = _eigh(A)
    np.maximum(w, 0.0, out=w)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def sqrtm_and_inv_sqrtm(A, floor=1e-14):
    """Return ``(A^{1/2}, A^{-1/2})`` from one eigendecomposition.

    Eigenvalues below ``floor * max_eig`` are lifted to that floor in the
    inverse root so the result stays finite.
    """
    A = symmetrize(A)
    w, V = _eigh(A)
    np.maximum(w, 0.0, out=w)
    top = w.max(initial=0.0)
    lifted = np.maximum(w, floor * top if top > 0 else floor)
    R = (V * np.sqrt(w)) @ V.T
    Rinv = (V / np.sqrt(lifted)) @ V.T
    return 0.5 * (R + R.T), 0.5 * (Rinv + Rinv.T)


def min_eig_ratio(A):
    """Smallest eigenvalue divided by the largest absolute eigenvalue."""
    w = np.linalg.eigvalsh(A)
    scale = np.abs(w).max(initial=0.0)
    if scale == 0.0:
        return 0.0
    return float(w[0] / scale)


@dataclass(frozen=True, eq=False)
class GaussianDist:
    """Multivariate normal N(mean, cov) on a finite index set.

    ``cov`` is symmetrized on construction and must be PSD up to a relative
    eigenvalue tolerance of 1e-8.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.ndim == 0 and mean.size == 1:
            cov = cov.reshape(1, 1)
        if cov.ndim != 2 or cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"mean has length {mean.size} but cov has shape {cov.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NotPositiveDefinite("GaussianDist has non-finite entries")
        cov = symmetrize(cov)
        if mean.size and min_eig_ratio(cov) < -PSD_RTOL:
            raise NotPositiveDefinite("covariance is not positive semi-definite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size

    @property
    def var(self):
        return np.diag(self.cov).copy()

    def restrict(self, indices):
        idx = np.asarray(indices, dtype=int)
        return GaussianDist(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def __repr__(self):
        return f"GaussianDist(dim={self.dim})"
