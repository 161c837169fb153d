"""Stationary kernel Gram matrices, numba-compiled with a numpy fallback.

Set ``CMBO_DISABLE_NUMBA=1`` to force the numpy path (useful for short runs
where JIT warm-up dominates, or where numba is unavailable).
"""
import math
import os

import numpy as np

MATERN12 = 0
MATERN32 = 1
RBF = 2

_SQRT3 = math.sqrt(3.0)


def gram_numpy(X1, X2, lengthscales, kind):
    diff = (X1[:, None, :] - X2[None, :, :]) / lengthscales
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if kind == RBF:
        return np.exp(-0.5 * sq)
    r = np.sqrt(sq)
    if kind == MATERN12:
        return np.exp(-r)
    if kind == MATERN32:
        s = _SQRT3 * r
        return (1.0 + s) * np.exp(-s)
    raise ValueError(f"unknown kernel kind {kind}")


try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


if njit is not None:

    @njit(cache=False, fastmath=False)
    def _gram_nb(X1, X2, lengthscales, kind):
        n1, d = X1.shape
        n2 = X2.shape[0]
        out = np.empty((n1, n2))
        for i in range(n1):
            for j in range(n2):
                sq = 0.0
                for k in range(d):
                    t = (X1[i, k] - X2[j, k]) / lengthscales[k]
                    sq += t * t
                if kind == 2:
                    out[i, j] = math.exp(-0.5 * sq)
                else:
                    r = math.sqrt(sq)
                    if kind == 0:
                        out[i, j] = math.exp(-r)
                    else:
                        s = 1.7320508075688772 * r
                        out[i, j] = (1.0 + s) * math.exp(-s)
        return out

    def gram_numba(X1, X2, lengthscales, kind):
        if kind not in (MATERN12, MATERN32, RBF):
            raise ValueError(f"unknown kernel kind {kind}")
        return _gram_nb(
            np.ascontiguousarray(X1, dtype=np.float64),
            np.ascontiguousarray(X2, dtype=np.float64),
            np.ascontiguousarray(lengthscales, dtype=np.float64),
            int(kind),
        )

else:  # pragma: no cover
    gram_numba = None


def numba_enabled():
    if gram_numba is None:
        return False
    return os.environ.get("CMBO_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")


def gram(X1, X2, lengthscales, kind):
    """Unit-variance Gram matrix of a stationary kernel between two point sets."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    ls = np.asarray(lengthscales, dtype=float)
    if numba_enabled():
        return gram_numba(X1, X2, ls, kind)
    return gram_numpy(X1, X2, ls, kind)
