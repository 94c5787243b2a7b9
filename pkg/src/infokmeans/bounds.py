"""Closed-form generalization bounds for linear, quadratic, robust and information k-means.

Each bound is returned as a :class:`BoundReport` whose ``total`` is the sum of
its labelled terms. Three deviation modes are supported:

``uniform``
    simultaneous bound on true minus empirical risk, deviation sqrt(log(1/delta)/(2n));
``excess``
    excess risk of an epsilon-minimizer, deviation sqrt(2 log(1/delta)/n);
``expectation``
    bound in expectation, no deviation term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InvalidInput, stack_densities

MODES = ("uniform", "excess", "expectation")
SQRT2P1 = math.sqrt(2.0) + 1.0


@dataclass
class BoundReport:
    kind: str
    terms: dict
    inputs: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        s = 0.0
        for v in self.terms.values():
            s += v
        return s

    def as_dict(self) -> dict:
        return {"kind": self.kind, "total": self.total, "terms": dict(self.terms),
                "inputs": dict(self.inputs)}


def _check_nk(n: int, k: int):
    if k < 2:
        raise InvalidInput("k >= 2 required")
    if n < 2 * k:
        raise InvalidInput("n >= 2k required")


def _check_delta(delta: float, mode: str):
    if mode not in MODES:
        raise InvalidInput(f"mode must be one of {MODES}")
    if not 0 < delta < 1:
        raise InvalidInput("delta must lie in (0, 1)")


def deviation_term(n: int, delta: float, mode: str) -> float:
    if mode == "uniform":
        return math.sqrt(math.log(1.0 / delta) / (2.0 * n))
    if mode == "excess":
        return math.sqrt(2.0 * math.log(1.0 / delta) / n)
    return 0.0


def linear_bound(n: int, k: int, theta_norm: float, w_norm: float, a: float, b: float,
                 delta: float = 0.05, mode: str = "uniform", epsilon: float = 0.0) -> BoundReport:
    """Bound for the criterion ``min_j <theta_j, W>`` with values in ``[a, b]``."""
    _check_nk(n, k)
    _check_delta(delta, mode)
    if theta_norm < 0 or w_norm < 0:
        raise InvalidInput("norms must be nonnegative")
    if a > b:
        raise InvalidInput("a <= b required")
    tw = theta_norm * w_norm
    chaining = (math.log(n / k) / math.log(2.0)) * math.sqrt(8.0 * math.log(k) / n) * tw \
        + 2.0 * math.sqrt(math.log(k) / n) * tw
    variance = math.sqrt(SQRT2P1 * (k * (b - a) ** 2 + 2.0 * math.log(math.e * k) * tw ** 2) / n)
    terms = {"chaining": chaining, "variance": variance,
             "deviation": deviation_term(n, delta, mode) * (b - a)}
    if mode == "expectation":
        terms["epsilon"] = float(epsilon)
    inputs = dict(n=n, k=k, theta_norm=theta_norm, w_norm=w_norm, a=a, b=b, delta=delta,
                  mode=mode)
    return BoundReport("linear", terms, inputs)


def eta(k: int) -> float:
    """6 + sqrt(2 (sqrt2 + 1)(17 + 9 log k) / log k)."""
    lk = math.log(k)
    return 6.0 + math.sqrt(2.0 * SQRT2P1 * (17.0 + 9.0 * lk) / lk)


def quadratic_main_term(n: int, k: int, B: float) -> float:
    return 16.0 * B * B * math.log(n / k) * math.sqrt(k * math.log(k) / n)


def quadratic_unsimplified(n: int, k: int, B: float) -> float:
    """Three-constant form B^2 log(n/k) sqrt(k log k / n)(6 sqrt2/log2 + eta(k)... )."""
    lr = math.log(n / k)
    lk = math.log(k)
    factor = 6.0 * math.sqrt(2.0) / math.log(2.0) + 6.0 / lr \
        + math.sqrt(2.0 * SQRT2P1 * (17.0 + 9.0 * lk) / lk) / lr
    return B * B * lr * math.sqrt(k * lk / n) * factor


def quadratic_bound(n: int, k: int, B: float, delta: float = 0.05, mode: str = "uniform",
                    epsilon: float = 0.0) -> BoundReport:
    """Dimension-free bound for quadratic k-means on the ball of radius B."""
    _check_nk(n, k)
    _check_delta(delta, mode)
    if B < 0:
        raise InvalidInput("B >= 0 required")
    log_inv = math.log(1.0 / delta)
    if mode == "uniform":
        dev = 2.0 * B * B * math.sqrt(2.0 * log_inv / n)
    elif mode == "excess":
        dev = 4.0 * B * B * math.sqrt(2.0 * log_inv / n)
    else:
        dev = 0.0
    terms = {"main": quadratic_main_term(n, k, B), "deviation": dev}
    if mode == "expectation":
        terms["epsilon"] = float(epsilon)
    inputs = dict(n=n, k=k, B=B, delta=delta, mode=mode,
                  unsimplified_main=quadratic_unsimplified(n, k, B), eta=eta(k))
    return BoundReport("quadratic", terms, inputs)


def _kernel_bracket_terms(n: int, k: int, delta: float, mode: str) -> dict:
    lk = math.log(k)
    chaining = (math.log(n / k) / math.log(2.0)) * math.sqrt(8.0 * k * lk / n) \
        + 2.0 * math.sqrt(k * lk / n)
    variance = math.sqrt(SQRT2P1 * k * (3.0 + 2.0 * lk) / n)
    return {"chaining": chaining, "variance": variance,
            "deviation": deviation_term(n, delta, mode)}


def robust_bound(n: int, k: int, sigma: float, delta: float = 0.05, mode: str = "uniform",
                 epsilon: float = 0.0) -> BoundReport:
    """Bound for the robust criterion R2, scaled by 2 sigma^2."""
    _check_nk(n, k)
    _check_delta(delta, mode)
    if not sigma > 0:
        raise InvalidInput("sigma > 0 required")
    scale = 2.0 * sigma * sigma
    terms = {name: scale * v for name, v in _kernel_bracket_terms(n, k, delta, mode).items()}
    if mode == "expectation":
        terms["epsilon"] = float(epsilon)
    return BoundReport("robust", terms, dict(n=n, k=k, sigma=sigma, delta=delta, mode=mode))


def info_bound(n: int, k: int, B: float, C: float, delta: float = 0.05, mode: str = "uniform",
               epsilon: float = 0.0) -> BoundReport:
    """Bound for information k-means, scaled by BC + 2 log B (B >= 1 required)."""
    _check_nk(n, k)
    _check_delta(delta, mode)
    if not B >= 1:
        raise InvalidInput("B >= 1 required (factor BC + 2 log B)")
    if not C >= 0:
        raise InvalidInput("C >= 0 required")
    scale = B * C + 2.0 * math.log(B)
    terms = {name: scale * v for name, v in _kernel_bracket_terms(n, k, delta, mode).items()}
    if mode == "expectation":
        terms["epsilon"] = float(epsilon)
    return BoundReport("info", terms, dict(n=n, k=k, B=B, C=C, delta=delta, mode=mode))


def info_constants_from_data(data, nu=None) -> tuple[float, float, float]:
    """Observable (B, C, R upper) for a family of densities.

    R is bounded by ``max_i K(1, p_i)`` (the uniform density as center),
    ``C = max_i sqrt(int log(p_i)^2 dnu)`` and
    ``B = max_i sqrt(int p_i^2 dnu) * exp(R)``. Any zero atom sends
    everything to ``inf``.
    """
    if isinstance(data, np.ndarray):
        if nu is None:
            raise InvalidInput("nu required with a raw log matrix")
        log_p = np.atleast_2d(data)
    else:
        log_p, nu = stack_densities(list(data))
    if np.any(~np.isfinite(log_p)):
        return math.inf, math.inf, math.inf
    w = nu.weights
    C = float(np.sqrt(np.max(log_p ** 2 @ w)))
    R = max(float(np.max(-log_p @ w)), 0.0)
    B = float(np.sqrt(np.max(np.exp(2.0 * log_p) @ w)) * math.exp(R))
    return B, C, R


def psi(x):
    """Influence function: log(1 + x + x^2/2) for x >= 0, extended as an odd function."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.sign(x) * np.log1p(ax + 0.5 * ax * ax)
    return float(out) if out.ndim == 0 else out


def max_sq_gaussian_bound(k: int, sigma: float) -> float:
    """2 sigma^2 log(e k), an upper bound on E max_j eps_j^2 for N(0, sigma^2) eps."""
    if k < 1:
        raise InvalidInput("k >= 1 required")
    if not sigma > 0:
        raise InvalidInput("sigma > 0 required")
    return 2.0 * sigma * sigma * (1.0 + math.log(k))


def simple_inequality_slacks() -> tuple[float, float]:
    """Slack of the convex endpoint check behind the 16 B^2 simplification.

    Evaluates ``2 log(b/4) + log(log 2) - (xi - 2 log xi)`` at ``xi = log 2``
    and ``xi = eta(2) / (b - a)`` with ``a = 6 sqrt2 / log 2``, ``b = 16``.
    """
    a = 6.0 * math.sqrt(2.0) / math.log(2.0)
    b = 16.0
    rhs = 2.0 * math.log(b / 4.0) + math.log(math.log(2.0))

    def slack(xi):
        return rhs - (xi - 2.0 * math.log(xi))

    return slack(math.log(2.0)), slack(eta(2) / (b - a))
