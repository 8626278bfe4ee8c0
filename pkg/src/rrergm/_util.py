"""Small shared helpers: seed derivation, stable log-mean-exp, weighted moments."""
from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import logsumexp


def derive_seed(*parts) -> int:
    """Deterministic 64-bit seed from a tuple of labels/indices.

    Hash-based so that distinct purposes and replicate indices get
    pairwise-distinct streams regardless of scheduling order.
    """
    text = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def logmeanexp(a, axis=None):
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[axis] if axis is not None else a.size
    return logsumexp(a, axis=axis) - np.log(n)


def softmax_weights(a):
    """Normalized exp(a) computed stably."""
    a = np.asarray(a, dtype=np.float64)
    m = a.max()
    w = np.exp(a - m)
    return w / w.sum()


def weighted_mean_cov(samples, log_weights=None):
    """Self-normalized weighted mean and covariance of sample rows.

    samples: (M, q). log_weights: (M,) unnormalized; None means uniform.
    """
    S = np.asarray(samples, dtype=np.float64)
    m = S.shape[0]
    if log_weights is None:
        w = np.full(m, 1.0 / m)
    else:
        w = softmax_weights(log_weights)
    mu = w @ S
    centered = S - mu
    cov = (centered * w[:, None]).T @ centered
    return mu, cov


def floor_eigenvalues(mat, floor=1e-8):
    """Project a symmetric matrix to one with eigenvalues >= floor.

    Returns (projected, floored_flag).
    """
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() >= floor:
        return sym, False
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T, True


def significance_stars(p_value: float) -> str:
    if p_value <= 0.001:
        return "***"
    if p_value <= 0.01:
        return "**"
    if p_value <= 0.05:
        return "*"
    return ""
