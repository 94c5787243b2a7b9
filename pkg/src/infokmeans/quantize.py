"""Lloyd-style engines for the quadratic, robust and information k-means criteria.

All three share one alternation loop: assign every datum to its cheapest
center (lowest index on ties), recompute centers for the fixed labeling, and
stop once the criterion stops decreasing. Labels are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .core import (Density, GaussianLocationParams, InvalidInput, Labeling, PointSet,
                   ReferenceMeasure, stack_densities)
from .divergence import geometric_mean_logs, kl_matrix

POLICIES = ("farthest_point_reseed", "keep_previous")
INITS = ("dsq_seeding", "random_points")


@dataclass(frozen=True)
class LloydConfig:
    k: int
    max_iters: int = 200
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    seed: int = 0
    init: str = "dsq_seeding"
    empty_cluster_policy: str = "farthest_point_reseed"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInput("k must be >= 1")
        if self.max_iters < 1:
            raise InvalidInput("max_iters must be >= 1")
        if self.rel_tol < 0 or self.abs_tol < 0:
            raise InvalidInput("tolerances must be nonnegative")
        if self.init not in INITS:
            raise InvalidInput(f"init must be one of {INITS}")
        if self.empty_cluster_policy not in POLICIES:
            raise InvalidInput(f"empty_cluster_policy must be one of {POLICIES}")


@dataclass
class RunReport:
    centers: np.ndarray
    labels: np.ndarray
    criterion_trace: list
    iterations: int
    converged: bool
    log_normalizers: Optional[np.ndarray] = None
    flags: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def criterion(self) -> float:
        return self.criterion_trace[-1]


# ---------------------------------------------------------------- families

def sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``(n, k)`` squared Euclidean distances, computed from differences."""
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


class FiniteHistogram:
    """Densities on a finite support; divergence is K(center, datum)."""

    kind = "finite_histogram"

    def __init__(self, nu: ReferenceMeasure):
        self.nu = nu

    def prepare(self, data) -> np.ndarray:
        if isinstance(data, np.ndarray):
            arr = np.atleast_2d(np.asarray(data, dtype=float))
            if arr.shape[1] != self.nu.support_size:
                raise InvalidInput("log-density matrix does not match the reference measure")
            return arr
        log_p, nu = stack_densities(list(data))
        if nu != self.nu:
            raise InvalidInput("data densities use a different reference measure")
        return log_p

    def divergences(self, data: np.ndarray, centers: np.ndarray) -> np.ndarray:
        return kl_matrix(centers, data, self.nu)

    def centroid(self, members: np.ndarray):
        w = np.full(members.shape[0], 1.0 / members.shape[0])
        return geometric_mean_logs(members, w, self.nu)

    def to_densities(self, centers: np.ndarray) -> list:
        return [Density(row, self.nu) for row in centers]


class GaussianLocation:
    """Isotropic Gaussians N(c, sigma^2 I) indexed by their means."""

    kind = "gaussian_location"

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise InvalidInput("sigma must be > 0")
        self.sigma = float(sigma)

    def prepare(self, data) -> np.ndarray:
        if isinstance(data, GaussianLocationParams):
            if data.sigma != self.sigma:
                raise InvalidInput("data sigma differs from family sigma")
            return np.asarray(data.means)
        if isinstance(data, PointSet):
            return np.asarray(data.points)
        arr = np.asarray(data, dtype=float)
        return arr[:, None] if arr.ndim == 1 else arr

    def divergences(self, data: np.ndarray, centers: np.ndarray) -> np.ndarray:
        return sq_distances(data, centers) / (2.0 * self.sigma ** 2)

    def centroid(self, members: np.ndarray):
        # normalizers of the Gaussian family cancel; bookkeeping value is 0
        return members.mean(axis=0), 0.0


def _as_points(points) -> np.ndarray:
    if isinstance(points, PointSet):
        return np.asarray(points.points)
    x = np.asarray(points, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _labels_of(labels) -> np.ndarray:
    return labels.labels if isinstance(labels, Labeling) else np.asarray(labels, dtype=np.int64)


# -------------------------------------------------------------- seeding

def _pick_weighted(weights: np.ndarray, rng: np.random.Generator, taken: np.ndarray) -> int:
    cs = np.cumsum(weights)
    total = cs[-1]
    if not total > 0:
        free = np.flatnonzero(~taken)
        pool = free if free.size else np.arange(weights.size)
        return int(pool[rng.integers(pool.size)])
    idx = int(np.searchsorted(cs, rng.random() * total, side="right"))
    if idx >= weights.size:
        idx = int(np.flatnonzero(weights > 0)[-1])
    return idx


def _dsq_indices(div_to: Callable[[int], np.ndarray], n: int, k: int,
                 rng: np.random.Generator) -> list:
    taken = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    chosen = [first]
    taken[first] = True
    best = div_to(first)
    for _ in range(1, k):
        w = best.copy()
        inf = ~np.isfinite(w)
        if inf.any():
            finite = w[~inf]
            w[inf] = (finite.max() if finite.size else 0.0) + 1.0
        idx = _pick_weighted(w, rng, taken)
        chosen.append(idx)
        taken[idx] = True
        best = np.minimum(best, div_to(idx))
    return chosen


def dsq_seeding(data, k: int, family=None, seed: int = 0) -> np.ndarray:
    """Divergence-proportional seeding (k-means++ with squared distances for points).

    ``family=None`` seeds raw points with squared Euclidean distance.
    Infinite divergences are capped at the largest finite one plus 1.
    """
    rng = np.random.default_rng(seed)
    return _seed_rows(data, k, family, rng, "dsq_seeding")


def _seed_rows(data, k, family, rng, init) -> np.ndarray:
    if family is None:
        x = _as_points(data)
        div = lambda i: sq_distances(x, x[i:i + 1])[:, 0]
    else:
        x = family.prepare(data)
        div = lambda i: family.divergences(x, x[i:i + 1])[:, 0]
    n = x.shape[0]
    if k > n:
        raise InvalidInput(f"k={k} exceeds the number of data points n={n}")
    if init == "random_points":
        idx = rng.choice(n, size=k, replace=False)
    else:
        idx = _dsq_indices(div, n, k, rng)
    return x[np.asarray(idx)].copy()


# ------------------------------------------------------- shared machinery

def _argmin_labels(D: np.ndarray) -> np.ndarray:
    return np.argmin(D, axis=1).astype(np.int64)


def _fill_empty(centers: list, data: np.ndarray, divergences, previous, policy: str,
                flags: list) -> np.ndarray:
    """Resolve clusters whose update produced no center (``None`` entries)."""
    missing = [j for j, c in enumerate(centers) if c is None]
    if not missing:
        return np.vstack(centers)
    if policy == "keep_previous" and previous is not None:
        for j in missing:
            centers[j] = np.array(previous[j], copy=True)
        flags.append("kept_previous_center")
        return np.vstack(centers)
    present = [c for c in centers if c is not None]
    if present:
        losses = divergences(data, np.vstack(present)).min(axis=1)
    else:
        losses = np.zeros(data.shape[0])
    losses = np.where(np.isnan(losses), np.inf, losses)
    for j in missing:
        i = int(np.argmax(losses))
        centers[j] = data[i].copy()
        losses[i] = -np.inf
    flags.append("reseeded_center")
    return np.vstack(centers)


def _run(data: np.ndarray, config: LloydConfig, init_centers, divergences, update,
         criterion, rng_seed_rows) -> RunReport:
    n = data.shape[0]
    if config.k > n:
        raise InvalidInput(f"k={config.k} exceeds the number of data points n={n}")
    if init_centers is None:
        centers = rng_seed_rows()
    else:
        centers = np.array(init_centers, dtype=float, copy=True)
        if centers.shape != (config.k, data.shape[1]):
            raise InvalidInput("init_centers has the wrong shape")
    flags: list = []
    extras: dict = {}
    crit = criterion(centers)
    trace = [crit]
    converged = False
    it = 0
    log_z = None
    while it < config.max_iters:
        it += 1
        D = divergences(data, centers)
        labels = _argmin_labels(D)
        if np.any(np.all(np.isinf(D), axis=1)) and "all_infinite_divergence" not in flags:
            flags.append("all_infinite_divergence")
        centers, log_z = update(labels, centers, D, flags, extras)
        new = criterion(centers)
        trace.append(new)
        if new == crit or new <= crit and crit - new <= config.rel_tol * abs(new) + config.abs_tol:
            converged = True
            break
        crit = new
    labels = _argmin_labels(divergences(data, centers))
    return RunReport(centers=centers, labels=labels, criterion_trace=[float(t) for t in trace],
                     iterations=it, converged=converged, log_normalizers=log_z,
                     flags=flags, extras=extras)


# ------------------------------------------------------------ quadratic

def assign_quadratic(points, centers) -> Labeling:
    x = _as_points(points)
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    if c.shape[1] != x.shape[1]:
        raise InvalidInput("center dimension differs from point dimension")
    return Labeling(_argmin_labels(sq_distances(x, c)), c.shape[0])


def empirical_risk_quadratic(points, centers) -> float:
    """(1/n) sum_i min_j |x_i - c_j|^2."""
    x = _as_points(points)
    return float(np.mean(sq_distances(x, np.atleast_2d(centers)).min(axis=1)))


def update_quadratic(points, labels, k: Optional[int] = None,
                     policy: str = "farthest_point_reseed", previous=None,
                     flags: Optional[list] = None) -> np.ndarray:
    """Cluster means; empty clusters resolved by ``policy``."""
    x = _as_points(points)
    lab = _labels_of(labels)
    if k is None:
        k = labels.k if isinstance(labels, Labeling) else int(lab.max()) + 1
    centers = [x[lab == j].mean(axis=0) if np.any(lab == j) else None for j in range(k)]
    return _fill_empty(centers, x, sq_distances, previous, policy,
                       flags if flags is not None else [])


def lloyd_quadratic(points, config: LloydConfig, init_centers=None) -> RunReport:
    x = _as_points(points)
    rng = np.random.default_rng(config.seed)

    def update(labels, centers, D, flags, extras):
        return update_quadratic(x, labels, config.k, config.empty_cluster_policy,
                                centers, flags), None

    return _run(x, config, init_centers, sq_distances, update,
                lambda c: empirical_risk_quadratic(x, c),
                lambda: _seed_rows(x, config.k, None, rng, config.init))


# --------------------------------------------------------------- robust

def _check_sigma(sigma):
    if not sigma > 0:
        raise InvalidInput("sigma must be > 0")


def criterion_c2(points, centers, sigma: float) -> float:
    """-2 sigma^2 log( mean_i exp(-min_j |x_i - c_j|^2 / (2 sigma^2)) )."""
    _check_sigma(sigma)
    x = _as_points(points)
    d = sq_distances(x, np.atleast_2d(centers)).min(axis=1)
    s = 2.0 * sigma * sigma
    val = -s * (logsumexp(-d / s) - math.log(d.size))
    return max(float(val), 0.0)


def criterion_r2(points, centers, sigma: float) -> float:
    """2 sigma^2 mean_i [1 - exp(-min_j |x_i - c_j|^2 / (2 sigma^2))]."""
    _check_sigma(sigma)
    x = _as_points(points)
    d = sq_distances(x, np.atleast_2d(centers)).min(axis=1)
    s = 2.0 * sigma * sigma
    return float(s * np.mean(-np.expm1(-d / s)))


def update_robust(points, labels, centers, sigma: float,
                  policy: str = "farthest_point_reseed", flags: Optional[list] = None) -> np.ndarray:
    """Exponentially weighted cluster means around the current centers.

    Weights are ``exp(-|x_i - c_j|^2 / (2 sigma^2))`` inside cluster j,
    shifted by the cluster's smallest distance so they never all underflow.
    """
    _check_sigma(sigma)
    x = _as_points(points)
    lab = _labels_of(labels)
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    s = 2.0 * sigma * sigma
    out = []
    for j in range(c.shape[0]):
        members = x[lab == j]
        if members.shape[0] == 0:
            out.append(None)
            continue
        d = sq_distances(members, c[j:j + 1])[:, 0]
        w = np.exp(-(d - d.min()) / s)
        out.append(w @ members / w.sum())
    return _fill_empty(out, x, sq_distances, c, policy, flags if flags is not None else [])


def robust_descent_margin(points, labels, centers, new_centers, sigma: float) -> float:
    """Q*(|c_l - c'_l|^2) with Q* the normalized exponential weights of the data."""
    x = _as_points(points)
    lab = _labels_of(labels)
    c = np.atleast_2d(centers)
    c_new = np.atleast_2d(new_centers)
    d = np.einsum("nd,nd->n", x - c[lab], x - c[lab])
    s = 2.0 * sigma * sigma
    w = np.exp(-(d - d.min()) / s)
    shift = c[lab] - c_new[lab]
    return float(np.sum(w * np.einsum("nd,nd->n", shift, shift)) / w.sum())


def lloyd_robust(points, config: LloydConfig, sigma: float, init_centers=None) -> RunReport:
    """Minimize C2 by alternating nearest-center labels and weighted means.

    ``extras['descent_margins'][t]`` holds the guaranteed decrease of step t,
    so ``trace[t] - trace[t+1] >= descent_margins[t]``.
    """
    _check_sigma(sigma)
    x = _as_points(points)
    rng = np.random.default_rng(config.seed)
    margins: list = []

    def update(labels, centers, D, flags, extras):
        new = update_robust(x, labels, centers, sigma, config.empty_cluster_policy, flags)
        margins.append(robust_descent_margin(x, labels, centers, new, sigma))
        return new, None

    rep = _run(x, config, init_centers, sq_distances, update,
               lambda c: criterion_c2(x, c, sigma),
               lambda: _seed_rows(x, config.k, None, rng, config.init))
    rep.extras["descent_margins"] = margins
    rep.extras["c2"] = rep.criterion
    rep.extras["r2"] = criterion_r2(x, rep.centers, sigma)
    rep.extras["sigma"] = sigma
    return rep


# ---------------------------------------------------------- information

def assign_info(data, centers, family) -> Labeling:
    """Lowest-index argmin of div(q_j, p_i); all-infinite rows get label 0."""
    p = family.prepare(data)
    q = family.prepare(centers) if not isinstance(centers, np.ndarray) else np.atleast_2d(centers)
    return Labeling(_argmin_labels(family.divergences(p, q)), q.shape[0])


def update_info(data, labels, k: Optional[int], family,
                policy: str = "farthest_point_reseed", previous=None,
                flags: Optional[list] = None):
    """Per-cluster centroids of the family and their log normalizers.

    Returns ``(centers, log_Z)``. A cluster whose members share no support
    (``log_Z = -inf``) is handled like an empty one and flagged.
    """
    p = family.prepare(data)
    lab = _labels_of(labels)
    if k is None:
        k = labels.k if isinstance(labels, Labeling) else int(lab.max()) + 1
    flags = flags if flags is not None else []
    centers, log_z = [], np.zeros(k)
    for j in range(k):
        members = p[lab == j]
        if members.shape[0] == 0:
            centers.append(None)
            log_z[j] = np.nan
            continue
        cj, lz = family.centroid(members)
        if cj is None:
            if "disjoint_support_cluster" not in flags:
                flags.append("disjoint_support_cluster")
        centers.append(cj)
        log_z[j] = lz
    return _fill_empty(centers, p, family.divergences, previous, policy, flags), log_z


def criterion_info(data, centers, family) -> float:
    """(1/n) sum_i min_j div(q_j, p_i); ``inf`` if some datum is unreachable."""
    p = family.prepare(data)
    q = centers if isinstance(centers, np.ndarray) else family.prepare(centers)
    return float(np.mean(family.divergences(p, np.atleast_2d(q)).min(axis=1)))


def labeling_criterion_info(log_z: np.ndarray, counts: np.ndarray) -> float:
    """sum_j (n_j / n) log(1/Z_j) over nonempty clusters."""
    counts = np.asarray(counts, dtype=float)
    used = counts > 0
    if np.any(np.asarray(log_z)[used] == -np.inf):
        return math.inf
    return float(np.sum(counts[used] / counts.sum() * -np.asarray(log_z)[used]))


def lloyd_info(data, config: LloydConfig, family, init_centers=None) -> RunReport:
    p = family.prepare(data)
    rng = np.random.default_rng(config.seed)

    def update(labels, centers, D, flags, extras):
        return update_info(p, labels, config.k, family, config.empty_cluster_policy,
                           centers, flags)

    rep = _run(p, config, init_centers, family.divergences, update,
               lambda c: criterion_info(p, c, family),
               lambda: _seed_rows(p, config.k, family, rng, config.init))
    rep.extras["family"] = family.kind
    return rep


def l2_membership_check(data, labels, nu: ReferenceMeasure) -> list:
    """Per nonempty cluster, ``(int q*^2 dnu, Z^-2 P(l=j)^-1 mean_i int p_i^2 dnu)``.

    The first never exceeds the second (Jensen plus Fubini).
    """
    fam = FiniteHistogram(nu)
    p = fam.prepare(data)
    lab = _labels_of(labels)
    n = p.shape[0]
    second_moments = np.exp(2.0 * p) @ nu.weights
    out = []
    for j in range(int(lab.max()) + 1):
        members = p[lab == j]
        if members.shape[0] == 0:
            continue
        log_q, log_z = fam.centroid(members)
        if log_q is None:
            continue
        lhs = float(np.exp(2.0 * log_q) @ nu.weights)
        frac = members.shape[0] / n
        rhs = float(math.exp(-2.0 * log_z) / frac * second_moments.mean())
        out.append((lhs, rhs))
    return out
