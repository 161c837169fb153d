"""Closed-form distances between Gaussians and the W2 barycenter."""
import numpy as np
from scipy.linalg import cho_solve

from .errors import DegenerateMember, DimensionMismatch, NoConvergence, NotPositiveDefinite
from .gaussmath import (
    GaussianDist,
    cholesky_with_jitter,
    sqrtm_and_inv_sqrtm,
    sqrtm_psd,
    symmetrize,
)

JEFFREYS = "jeffreys"
WASSERSTEIN = "wasserstein"
DISTANCE_KINDS = (JEFFREYS, WASSERSTEIN)


def _same_dim(P, Q):
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimension {P.dim} vs {Q.dim}")


def kl_divergence(P, Q):
    """KL(P || Q) for multivariate normals."""
    _same_dim(P, Q)
    L1, _ = cholesky_with_jitter(Q.cov)
    L0, _ = cholesky_with_jitter(P.cov)
    dm = Q.mean - P.mean
    trace = np.trace(cho_solve((L1, True), P.cov))
    maha = dm @ cho_solve((L1, True), dm)
    logdet = 2.0 * (np.sum(np.log(np.diag(L1))) - np.sum(np.log(np.diag(L0))))
    kl = 0.5 * (trace + maha - P.dim + logdet)
    return max(float(kl), 0.0)


def jeffreys(P, Q):
    return kl_divergence(P, Q) + kl_divergence(Q, P)


def wasserstein2(P, Q, *, sqrt_q=None):
    """2-Wasserstein distance (not squared) between two Gaussians.

    ``sqrt_q`` may carry a precomputed square root of ``Q.cov``.
    """
    _same_dim(P, Q)
    if np.array_equal(P.mean, Q.mean) and np.array_equal(P.cov, Q.cov):
        return 0.0  # the square root would turn roundoff into ~1e-7
    root = sqrtm_psd(Q.cov) if sqrt_q is None else sqrt_q
    cross = sqrtm_psd(root @ P.cov @ root)
    dm = P.mean - Q.mean
    sq = dm @ dm + np.trace(P.cov) + np.trace(Q.cov) - 2.0 * np.trace(cross)
    if sq < 0.0:
        if sq < -1e-8 * (1.0 + np.trace(P.cov) + np.trace(Q.cov)):
            raise NotPositiveDefinite(f"negative squared W2 distance {sq:g}")
        sq = 0.0
    return float(np.sqrt(sq))


def distance(kind, P, Q):
    if kind == JEFFREYS:
        return jeffreys(P, Q)
    if kind == WASSERSTEIN:
        return wasserstein2(P, Q)
    raise ValueError(f"unknown distance kind {kind!r}")


def _barycenter_residual(members, weights, Sigma):
    root, inv_root = sqrtm_and_inv_sqrtm(Sigma)
    S = np.zeros_like(Sigma)
    for lam, G in zip(weights, members):
        S += lam * sqrtm_psd(root @ G.cov @ root)
    return S, np.linalg.norm(S - Sigma), inv_root


def wasserstein_barycenter(members, weights=None, tol=1e-7, max_iter=200):
    """W2 barycenter of Gaussians by fixed-point iteration on the covariance.

    Starts from the weighted covariance average and iterates
    ``S <- S^{-1/2} (sum_i w_i (S^{1/2} C_i S^{1/2})^{1/2})^2 S^{-1/2}``
    until the defining-equation residual drops to ``tol`` (Frobenius).
    """
    members = list(members)
    if not members:
        raise DimensionMismatch("barycenter needs at least one member")
    n = len(members)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be a simplex vector, one per member")
    d = members[0].dim
    for G in members:
        if G.dim != d:
            raise DimensionMismatch("barycenter members differ in dimension")
        try:
            cholesky_with_jitter(G.cov)
        except NotPositiveDefinite as exc:
            raise DegenerateMember(str(exc)) from exc
    mean = sum(lam * G.mean for lam, G in zip(w, members))
    Sigma = symmetrize(sum(lam * G.cov for lam, G in zip(w, members)))
    residual = np.inf
    for it in range(max_iter + 1):
        S, residual, inv_root = _barycenter_residual(members, w, Sigma)
        if residual <= tol:
            return GaussianDist(mean, Sigma)
        if it == max_iter:
            break
        Sigma = symmetrize(inv_root @ S @ S @ inv_root)
    raise NoConvergence(
        f"barycenter did not converge in {max_iter} iterations (residual {residual:.3g})",
        residual,
    )


def barycenter_residual(members, weights, bary):
    return float(_barycenter_residual(list(members), np.asarray(weights, float), bary.cov)[1])
