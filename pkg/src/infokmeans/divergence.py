"""Kullback divergences, Gibbs minimizers and geometric-mean centroids.

Infinite divergences are plain ``math.inf``: it compares above every finite
float and ``argmin`` over a row of infinities returns the lowest index, which is
the tie-break the clustering engines rely on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import Density, InvalidInput, ReferenceMeasure, stack_densities


def kl_density(q: Density, p: Density) -> float:
    """K(q, p) = sum_y q(y) log(q(y)/p(y)) nu(y), with 0 log 0 = 0.

    Returns ``inf`` when q puts mass where p has none.
    """
    if q.nu != p.nu:
        raise InvalidInput("densities live on different reference measures")
    qm, pm = q.support_mask, p.support_mask
    if np.any(qm & ~pm):
        return math.inf
    lq, lp = q.log_values[qm], p.log_values[qm]
    w = np.exp(lq) * q.nu.weights[qm]
    return max(float(np.sum(w * (lq - lp))), 0.0)


def kl_matrix(log_q: np.ndarray, log_p: np.ndarray, nu: ReferenceMeasure) -> np.ndarray:
    """All pairwise divergences ``D[i, j] = K(q_j, p_i)``.

    ``log_q`` is ``(k, m)`` (first arguments), ``log_p`` is ``(n, m)``.
    """
    log_q = np.atleast_2d(log_q)
    log_p = np.atleast_2d(log_p)
    qmask = np.isfinite(log_q)
    pmask = np.isfinite(log_p)
    wq = np.exp(log_q) * nu.weights
    neg_entropy = np.sum(np.where(qmask, wq * np.where(qmask, log_q, 0.0), 0.0), axis=1)
    cross = np.where(pmask, log_p, 0.0) @ wq.T
    out = neg_entropy[None, :] - cross
    undominated = ((~pmask).astype(float) @ qmask.T.astype(float)) > 0
    out[undominated] = np.inf
    return np.maximum(out, 0.0)


def kl_probabilities(q, p) -> float:
    """Divergence between two probability vectors on the same finite set."""
    q = np.asarray(q, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if q.shape != p.shape:
        raise InvalidInput("shape mismatch")
    on = q > 0
    if np.any(on & (p <= 0)):
        return math.inf
    return max(float(np.sum(q[on] * (np.log(q[on]) - np.log(p[on])))), 0.0)


@dataclass(frozen=True, eq=False)
class FiniteJoint:
    """Joint law of (X, Y) on a finite product space, as an ``(m_X, m_Y)`` table."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float, copy=True)
        if t.ndim != 2 or t.size == 0:
            raise InvalidInput("joint table must be a nonempty 2-d array")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise InvalidInput("joint table entries must be finite and nonnegative")
        if abs(t.sum() - 1.0) > 1e-12:
            raise InvalidInput(f"joint table sums to {t.sum()!r}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def marginal_x(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def marginal_y(self) -> np.ndarray:
        return self.table.sum(axis=0)


def kl_chain_check(Q: FiniteJoint, P: FiniteJoint) -> tuple[float, float]:
    """Both sides of K(Q_XY, P_XY) = K(Q_X, P_X) + Q_X[K(Q_Y|X, P_Y|X)]."""
    if Q.table.shape != P.table.shape:
        raise InvalidInput("joint tables have different shapes")
    lhs = kl_probabilities(Q.table, P.table)
    qx, px = Q.marginal_x, P.marginal_x
    rhs = kl_probabilities(qx, px)
    if math.isinf(rhs):
        return lhs, rhs
    for x in range(qx.size):
        if qx[x] == 0:
            continue
        cond = kl_probabilities(Q.table[x] / qx[x], P.table[x] / px[x])
        if math.isinf(cond):
            return lhs, math.inf
        rhs += qx[x] * cond
    return lhs, rhs


def bayes_identity_check(P: FiniteJoint) -> float:
    """Largest gap between dP_XY/d(P_X x P_Y) and dP_Y|X/dP_Y over all atoms."""
    px, py = P.marginal_x, P.marginal_y
    if np.any(px <= 0) or np.any(py <= 0):
        raise InvalidInput("Bayes identity needs strictly positive marginals")
    joint_ratio = P.table / np.outer(px, py)
    cond_ratio = (P.table / px[:, None]) / py[None, :]
    return float(np.max(np.abs(joint_ratio - cond_ratio)))


def _check_probability(pi: np.ndarray, name: str = "pi") -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size == 0 or np.any(pi < 0) or not np.all(np.isfinite(pi)):
        raise InvalidInput(f"{name} must be a nonnegative 1-d vector")
    if abs(pi.sum() - 1.0) > 1e-12:
        raise InvalidInput(f"{name} sums to {pi.sum()!r}, not 1")
    return pi


def gibbs_minimizer(pi, h) -> tuple[np.ndarray, float]:
    """Minimize rho -> K(rho, pi) + rho(h) over probability vectors.

    The minimizer is ``pi * exp(-h) / Z`` and the minimum is ``-log Z``.
    """
    pi = _check_probability(pi)
    h = np.asarray(h, dtype=float)
    if h.shape != pi.shape or not np.all(np.isfinite(h)):
        raise InvalidInput("h must be finite with the same shape as pi")
    on = pi > 0
    log_terms = np.full(pi.shape, -np.inf)
    log_terms[on] = np.log(pi[on]) - h[on]
    log_z = logsumexp(log_terms)
    rho = np.exp(log_terms - log_z)
    return rho, float(-log_z)


def gibbs_objective(rho, pi, h) -> float:
    rho = np.asarray(rho, dtype=float)
    h = np.asarray(h, dtype=float)
    return kl_probabilities(rho, pi) + float(np.sum(rho * h))


def geometric_mean_logs(log_p: np.ndarray, weights, nu: ReferenceMeasure):
    """Array form of :func:`geometric_mean` on an ``(n, m)`` log matrix.

    Returns ``(log_q, log_Z)``; ``log_q`` is ``None`` when the weighted
    supports do not intersect.
    """
    log_p = np.atleast_2d(log_p)
    w = np.asarray(weights, dtype=float)
    used = w > 0
    lp = log_p[used]
    # zero-weight rows drop out so -inf * 0 never appears
    log_g = np.sum(w[used][:, None] * lp, axis=0)
    log_z = float(logsumexp(log_g, b=nu.weights))
    if log_z == -math.inf:
        return None, -math.inf
    return log_g - log_z, log_z


def geometric_mean(densities: Sequence[Density], weights=None) -> tuple[Optional[Density], float]:
    """Weighted geometric mean of densities and its log normalizer.

    ``q*(y) = exp(sum_i w_i log p_i(y)) / Z``. When the supports share no
    atom, ``Z = 0``: the center is returned as ``None`` with ``log_Z = -inf``.
    """
    if len(densities) == 0:
        raise InvalidInput("geometric mean of an empty family")
    log_p, nu = stack_densities(densities)
    if weights is None:
        weights = np.full(len(densities), 1.0 / len(densities))
    w = _check_probability(weights, "weights")
    if w.size != len(densities):
        raise InvalidInput("one weight per density required")
    log_q, log_z = geometric_mean_logs(log_p, w, nu)
    if log_q is None:
        return None, log_z
    return Density(log_q, nu), log_z


def weighted_kl_to_center(densities: Sequence[Density], weights, q: Density) -> float:
    """sum_i w_i K(q, p_i)."""
    w = _check_probability(weights, "weights")
    total = 0.0
    for wi, p in zip(w, densities):
        if wi == 0:
            continue
        k = kl_density(q, p)
        if math.isinf(k):
            return math.inf
        total += wi * k
    return total


def gaussian_kl(x, c, sigma: float) -> float:
    """K(N(c, sigma^2 I), N(x, sigma^2 I)) = |x - c|^2 / (2 sigma^2)."""
    if not sigma > 0:
        raise InvalidInput("sigma must be > 0")
    diff = np.asarray(x, dtype=float) - np.asarray(c, dtype=float)
    return float(np.dot(diff, diff)) / (2.0 * sigma * sigma)
