"""Acquisition functions scored over a finite candidate set."""
import numpy as np
from scipy.stats import norm

from .errors import AllCandidatesExhausted

UCB = "ucb"
EI = "ei"
PI = "pi"
KINDS = (UCB, EI, PI)
DEFAULT_BETA = 3.0


def ucb(mean, std, beta=DEFAULT_BETA):
    return mean + np.sqrt(beta) * std


def expected_improvement(mean, std, best_y):
    gap = mean - best_y
    out = np.maximum(gap, 0.0)
    pos = std > 0
    z = gap[pos] / std[pos]
    out[pos] = gap[pos] * norm.cdf(z) + std[pos] * norm.pdf(z)
    return out


def probability_of_improvement(mean, std, best_y):
    gap = mean - best_y
    out = (gap > 0).astype(float)
    pos = std > 0
    out[pos] = norm.cdf(gap[pos] / std[pos])
    return out


def acquisition(kind, mean, var, best_y, beta=DEFAULT_BETA, exclude=()):
    """Score candidates and pick the best one not in ``exclude``.

    Returns ``(scores, index)``. Tied scores go to the larger mean, then
    the lowest index.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.sqrt(np.maximum(np.asarray(var, dtype=float), 0.0))
    if kind == UCB:
        scores = ucb(mean, std, beta)
    elif kind == EI:
        scores = expected_improvement(mean, std, best_y)
    elif kind == PI:
        scores = probability_of_improvement(mean, std, best_y)
    else:
        raise ValueError(f"unknown acquisition {kind!r}")
    masked = scores.copy()
    excl = np.asarray(list(exclude), dtype=int)
    if excl.size:
        masked[excl] = -np.inf
    if masked.size == 0 or not np.any(np.isfinite(masked)):
        raise AllCandidatesExhausted("no unqueried candidates left")
    # flat scores (e.g. EI/PI with zero variance) fall back to the larger mean
    top = np.flatnonzero(masked == masked.max())
    return scores, int(top[np.argmax(mean[top])])
