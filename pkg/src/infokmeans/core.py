"""Domain types: reference measures, log-domain densities, point sets, labelings.

Every type here is immutable once built. Arrays are copied on construction and
flagged read-only so instances can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class InvalidInput(ValueError):
    """Raised when user-supplied data violates a documented precondition."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """A probability measure ``nu`` on ``m`` atoms, all with positive mass."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise InvalidInput("reference measure needs a nonempty 1-d weight vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidInput("reference measure weights must be finite and > 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInput(f"reference measure weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, m: int) -> "ReferenceMeasure":
        if m < 1:
            raise InvalidInput("support size must be positive")
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def from_masses(cls, masses) -> "ReferenceMeasure":
        """Normalize arbitrary positive masses into a reference measure."""
        w = np.asarray(masses, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvalidInput("reference masses must be finite and > 0")
        return cls(w / w.sum())

    @property
    def support_size(self) -> int:
        return self.weights.size

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def __eq__(self, other):
        if not isinstance(other, ReferenceMeasure):
            return NotImplemented
        return self.weights.shape == other.weights.shape and bool(
            np.all(self.weights == other.weights))

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True, eq=False)
class Density:
    """Density of a probability measure with respect to ``nu``, in log domain.

    Atoms with zero mass carry ``-inf``; ``support_mask`` marks the others.
    """

    log_values: np.ndarray
    nu: ReferenceMeasure

    def __post_init__(self):
        lv = _frozen(self.log_values)
        if lv.shape != (self.nu.support_size,):
            raise InvalidInput(
                f"density has {lv.shape} log-values for a support of size {self.nu.support_size}")
        if np.any(np.isnan(lv)) or np.any(lv == np.inf):
            raise InvalidInput("log-values must be finite or -inf")
        mass = float(np.sum(np.exp(lv) * self.nu.weights))
        if abs(mass - 1.0) > 1e-9:
            raise InvalidInput(f"density integrates to {mass!r} against nu, not 1")
        object.__setattr__(self, "log_values", lv)

    @property
    def support_mask(self) -> np.ndarray:
        return np.isfinite(self.log_values)

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def probabilities(self) -> np.ndarray:
        """Masses ``p(y) nu(y)`` of the underlying probability measure."""
        return self.values * self.nu.weights


def log_normalize(log_weights: np.ndarray, nu: ReferenceMeasure) -> np.ndarray:
    """Shift log-weights so that ``sum exp(.) * nu == 1``.

    Works row-wise on 2-d input. Rows with no finite entry raise.
    """
    from scipy.special import logsumexp

    lw = np.asarray(log_weights, dtype=float)
    log_z = logsumexp(lw, b=nu.weights, axis=-1, keepdims=True)
    if np.any(~np.isfinite(log_z)):
        raise InvalidInput("weights have zero total mass against nu")
    return lw - log_z


def make_density(weights: Sequence[float], nu: Optional[ReferenceMeasure] = None) -> Density:
    """Build a normalized density from nonnegative (unnormalized) weights.

    The weights are read as an unnormalized density with respect to ``nu``
    (uniform by default); zero weights become ``-inf`` log-values.

    >>> make_density([3, 1]).values
    array([1.5, 0.5])
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidInput("weights must be a nonempty 1-d vector")
    if nu is None:
        nu = ReferenceMeasure.uniform(w.size)
    if w.size != nu.support_size:
        raise InvalidInput("weights and reference measure have different sizes")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInput("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise InvalidInput("all-zero weight vector has no density")
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    return Density(log_normalize(lw, nu), nu)


def stack_densities(densities: Sequence[Density]) -> tuple[np.ndarray, ReferenceMeasure]:
    """Stack densities sharing one reference measure into an ``(n, m)`` log matrix."""
    if len(densities) == 0:
        raise InvalidInput("empty density list")
    nu = densities[0].nu
    for d in densities[1:]:
        if d.nu != nu:
            raise InvalidInput("densities do not share a reference measure")
    return np.vstack([d.log_values for d in densities]), nu


def unstack_densities(log_matrix: np.ndarray, nu: ReferenceMeasure) -> list[Density]:
    return [Density(row, nu) for row in np.asarray(log_matrix)]


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    bound_B: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def validate_pointset(points, claimed_B: Optional[float] = None) -> PointSet:
    """Check a sample and attach a certified norm bound.

    Without a claim the bound is the largest observed norm. A claim is
    accepted when no point exceeds it by more than 1e-9.
    """
    if isinstance(points, PointSet):
        if claimed_B is None:
            claimed_B = points.bound_B
        points = points.points
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InvalidInput("points must form a nonempty (n, d) array")
    bad = np.flatnonzero(~np.all(np.isfinite(x), axis=1))
    if bad.size:
        raise InvalidInput(f"point {bad[0]} has non-finite coordinates")
    norms = np.linalg.norm(x, axis=1)
    if claimed_B is None:
        return PointSet(x, float(norms.max()))
    if claimed_B < 0:
        raise InvalidInput("claimed bound must be nonnegative")
    over = np.flatnonzero(norms > claimed_B + 1e-9)
    if over.size:
        i = int(over[0])
        raise InvalidInput(f"point {i} has norm {norms[i]!r} > claimed bound {claimed_B!r}")
    return PointSet(x, float(claimed_B))


@dataclass(frozen=True, eq=False)
class Labeling:
    """Cluster labels, 0-based: ``labels[i]`` in ``range(k)``."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64, copy=True)
        if self.k < 1:
            raise InvalidInput("k must be >= 1")
        if lab.ndim != 1 or np.any(lab < 0) or np.any(lab >= self.k):
            raise InvalidInput("labels out of range")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


@dataclass(frozen=True, eq=False)
class QuantizerDensity:
    centers: list
    log_normalizers: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.centers) < 1:
            raise InvalidInput("need at least one center")
        stack_densities(self.centers)


@dataclass(frozen=True)
class GaussianLocationParams:
    """Means of the isotropic Gaussian family ``N(c_j, sigma^2 I)``."""

    sigma: float
    means: np.ndarray = field(compare=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInput("sigma must be > 0")
        object.__setattr__(self, "means", _frozen(np.atleast_2d(self.means)))
