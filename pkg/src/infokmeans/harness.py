"""Synthetic data, Monte-Carlo risk estimates and the property suites.

Every suite is a deterministic function of a master seed; each emits one
verdict dict per case, suitable for JSON-lines output.
"""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import bounds as bnd
from .core import InvalidInput, PointSet, ReferenceMeasure, log_normalize, validate_pointset
from .divergence import (FiniteJoint, bayes_identity_check, gibbs_minimizer, gibbs_objective,
                         kl_chain_check, kl_matrix)
from .quantize import (FiniteHistogram, GaussianLocation, LloydConfig, criterion_c2,
                       criterion_r2, empirical_risk_quadratic, l2_membership_check, lloyd_info,
                       lloyd_quadratic, lloyd_robust, sq_distances)

GENERATORS = ("uniform_ball", "truncated_gaussian_mixture", "dirichlet_histograms",
              "bag_of_words")

SUITES = ("gibbs", "chain_rule", "bayes", "pythagoras", "descent", "gaussian_equivalence",
          "psi", "maximal_mc", "simple_endpoints", "l2_membership", "ordering_r2_c2_r")

THREADS_ENV = "INFOKMEANS_THREADS"


@dataclass(frozen=True)
class SynthSpec:
    generator: str
    n: int
    seed: int = 0
    B: float = 1.0
    d: int = 2
    components: int = 3
    spread: float = 0.05
    m: int = 10
    alpha: float = 1.0
    topic_count: int = 3
    doc_length: int = 200
    smoothing: float = 0.5

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InvalidInput(f"generator must be one of {GENERATORS}")
        if self.n < 1:
            raise InvalidInput("n must be >= 1")
        positive = dict(B=self.B, d=self.d, components=self.components, spread=self.spread,
                        m=self.m, alpha=self.alpha, topic_count=self.topic_count,
                        doc_length=self.doc_length)
        for name, v in positive.items():
            if not v > 0:
                raise InvalidInput(f"{name} must be > 0")
        if self.smoothing < 0:
            raise InvalidInput("smoothing must be >= 0")

    @property
    def is_histogram(self) -> bool:
        return self.generator in ("dirichlet_histograms", "bag_of_words")


def _uniform_ball(rng, n, d, B):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = B * rng.random(n) ** (1.0 / d)
    x = g * r[:, None]
    norms = np.linalg.norm(x, axis=1)
    over = norms > B
    x[over] *= (B / norms[over])[:, None]
    return x


def _mixture_means(spec: SynthSpec) -> np.ndarray:
    # component layout depends on the seed only, so holdout samples share it
    rng = np.random.default_rng([spec.seed, 0x6D6978])
    return _uniform_ball(rng, spec.components, spec.d, spec.B / 2.0)


def generate(spec: SynthSpec, rng: Optional[np.random.Generator] = None):
    """Draw a sample. Point generators give a PointSet with bound B; histogram
    generators give an ``(n, m)`` log-density matrix against the uniform measure."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.generator == "uniform_ball":
        return validate_pointset(_uniform_ball(rng, spec.n, spec.d, spec.B), spec.B)
    if spec.generator == "truncated_gaussian_mixture":
        means = _mixture_means(spec)
        out = np.empty((0, spec.d))
        while out.shape[0] < spec.n:
            comp = rng.integers(spec.components, size=spec.n)
            draw = means[comp] + spec.spread * spec.B * rng.standard_normal((spec.n, spec.d))
            keep = np.linalg.norm(draw, axis=1) <= spec.B
            out = np.vstack([out, draw[keep]])
        return validate_pointset(out[:spec.n], spec.B)
    nu = ReferenceMeasure.uniform(spec.m)
    if spec.generator == "dirichlet_histograms":
        w = rng.dirichlet(np.full(spec.m, spec.alpha), size=spec.n)
        bad = np.any(w <= 0, axis=1)
        while bad.any():
            w[bad] = rng.dirichlet(np.full(spec.m, spec.alpha), size=int(bad.sum()))
            bad = np.any(w <= 0, axis=1)
    else:
        topics = np.random.default_rng([spec.seed, 0x746F70]).dirichlet(
            np.full(spec.m, 0.1), size=spec.topic_count)
        which = rng.integers(spec.topic_count, size=spec.n)
        w = np.vstack([rng.multinomial(spec.doc_length, topics[t]) for t in which]).astype(float)
        w += spec.smoothing
    with np.errstate(divide="ignore"):
        return log_normalize(np.log(w), nu)


def histogram_family(spec: SynthSpec) -> FiniteHistogram:
    return FiniteHistogram(ReferenceMeasure.uniform(spec.m))


# ------------------------------------------------------------- risk

@dataclass
class FittedModel:
    kind: str  # quadratic | robust | info
    centers: np.ndarray
    sigma: Optional[float] = None
    family: object = None


def per_point_loss(model: FittedModel, data) -> np.ndarray:
    if model.kind == "info":
        p = model.family.prepare(data)
        return model.family.divergences(p, model.centers).min(axis=1)
    x = data.points if isinstance(data, PointSet) else np.asarray(data)
    d = sq_distances(x, model.centers).min(axis=1)
    if model.kind == "robust":
        s = 2.0 * model.sigma ** 2
        return s * -np.expm1(-d / s)
    return d


def holdout_risk(model: FittedModel, spec: SynthSpec, holdout_n: int) -> tuple[float, float]:
    """Mean loss of ``model`` on a sample of size ``holdout_n`` drawn with ``spec.seed``,
    with its standard error. Robust models report the R2 loss."""
    sample = generate(replace(spec, n=holdout_n))
    loss = per_point_loss(model, sample)
    se = float(loss.std(ddof=1) / math.sqrt(loss.size)) if loss.size > 1 else 0.0
    return float(loss.mean()), se


@dataclass
class TrialReport:
    empirical_risk: float
    holdout_risk: float
    holdout_se: float
    bound_value: float
    satisfied: bool
    vacuous: bool
    metadata: dict = field(default_factory=dict)


def fit_best(kind: str, data, config: LloydConfig, restarts: int, sigma=None, family=None):
    best = None
    for r in range(restarts):
        cfg = replace(config, seed=config.seed * 1000003 + r)
        if kind == "quadratic":
            rep = lloyd_quadratic(data, cfg)
        elif kind == "robust":
            rep = lloyd_robust(data, cfg, sigma)
        else:
            rep = lloyd_info(data, cfg, family)
        if best is None or rep.criterion < best.criterion:
            best = rep
    return best


def bound_vs_risk_trial(spec: SynthSpec, config: LloydConfig, bound_kind: str = "quadratic",
                        delta: float = 0.05, mode: str = "uniform", restarts: int = 3,
                        holdout_n: int = 100_000, sigma: float = 1.0,
                        reference_n: int = 20_000) -> TrialReport:
    """Fit a best-of-restarts minimizer and compare its holdout risk with the bound.

    ``uniform``: holdout <= empirical + bound. ``excess``: holdout excess over a
    best-of-restarts reference fitted on a large independent sample stays below
    the excess bound (the reference is a proxy for the population minimizer).
    """
    data = generate(spec)
    fam = histogram_family(spec) if spec.is_histogram else None
    rep = fit_best(bound_kind, data, config, restarts, sigma, fam)
    model = FittedModel(bound_kind, rep.centers, sigma, fam)
    emp = float(per_point_loss(model, data).mean())
    hold_spec = replace(spec, seed=spec.seed + 7_777_777)
    k = config.k
    if bound_kind == "quadratic":
        br = bnd.quadratic_bound(spec.n, k, spec.B, delta, mode)
        trivial = 4.0 * spec.B ** 2
    elif bound_kind == "robust":
        br = bnd.robust_bound(spec.n, k, sigma, delta, mode)
        trivial = 2.0 * sigma ** 2
    else:
        B, C, _ = bnd.info_constants_from_data(data, fam.nu)
        br = bnd.info_bound(spec.n, k, max(B, 1.0), C, delta, mode)
        trivial = max(B, 1.0) * C + 2.0 * math.log(max(B, 1.0))
    bound = br.total
    hold, se = holdout_risk(model, hold_spec, holdout_n)
    meta = dict(n=spec.n, k=k, seed=spec.seed, mode=mode, bound_kind=bound_kind,
                iterations=rep.iterations, converged=rep.converged)
    if mode == "excess":
        ref_spec = replace(spec, n=reference_n, seed=spec.seed + 3_333_333)
        ref_data = generate(ref_spec)
        ref = fit_best(bound_kind, ref_data, replace(config, seed=config.seed + 1), restarts,
                       sigma, fam)
        ref_model = FittedModel(bound_kind, ref.centers, sigma, fam)
        ref_hold, _ = holdout_risk(ref_model, hold_spec, holdout_n)
        excess = hold - min(ref_hold, hold)
        satisfied = excess <= bound
        meta.update(reference_holdout=ref_hold, excess=excess, reference_is_proxy=True)
    else:
        satisfied = hold <= emp + bound
    return TrialReport(emp, hold, se, bound, bool(satisfied), bool(bound >= trivial), meta)


# ------------------------------------------------------------ suites

def digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=float)).tobytes())
    return h.hexdigest()[:16]


def _case(suite, case_id, inputs_digest, measured, ok) -> dict:
    return {"suite": suite, "case": case_id, "inputs_digest": inputs_digest,
            "measured": measured, "pass": bool(ok)}


def _rng(seed: int, suite: str) -> np.random.Generator:
    return np.random.default_rng([seed, SUITES.index(suite)])


def _random_prob(rng, size, zero_frac=0.0):
    p = rng.dirichlet(np.ones(size))
    if zero_frac:
        p[rng.random(size) < zero_frac] = 0.0
        if p.sum() == 0:
            p[rng.integers(size)] = 1.0
        p /= p.sum()
    return p


def suite_gibbs(seed: int, count: int = 1000, tests: int = 100) -> list:
    rng = _rng(seed, "gibbs")
    out = []
    for c in range(count):
        size = int(rng.integers(1, 17))
        pi = _random_prob(rng, size)
        h = rng.normal(scale=3.0, size=size)
        rho, value = gibbs_minimizer(pi, h)
        gap = abs(gibbs_objective(rho, pi, h) - value)
        worst = math.inf
        for _ in range(tests):
            r = _random_prob(rng, size, zero_frac=0.2)
            worst = min(worst, gibbs_objective(r, pi, h) - value)
        out.append(_case("gibbs", c, digest(pi, h), {"identity_gap": gap, "min_excess": worst},
                         gap <= 1e-10 and worst >= -1e-12))
    return out


def _random_joint(rng, zero_frac=0.0):
    mx, my = rng.integers(1, 9, size=2)
    t = rng.dirichlet(np.ones(mx * my)).reshape(mx, my)
    if zero_frac:
        t[rng.random(t.shape) < zero_frac] = 0.0
        t /= t.sum()
    return t


def suite_chain_rule(seed: int, count: int = 1000) -> list:
    rng = _rng(seed, "chain_rule")
    out = []
    for c in range(count):
        q = _random_joint(rng)
        p = rng.dirichlet(np.ones(q.size)).reshape(q.shape)
        lhs, rhs = kl_chain_check(FiniteJoint(q), FiniteJoint(p))
        gap = abs(lhs - rhs)
        out.append(_case("chain_rule", c, digest(q, p), {"lhs": lhs, "rhs": rhs, "gap": gap},
                         gap <= 1e-10))
    return out


def suite_bayes(seed: int, count: int = 1000) -> list:
    rng = _rng(seed, "bayes")
    out = []
    for c in range(count):
        p = _random_joint(rng)
        gap = bayes_identity_check(FiniteJoint(p))
        out.append(_case("bayes", c, digest(p), {"gap": gap}, gap <= 1e-10))
    return out


def pythagoras_sides(log_p, labels, log_q, nu):
    """Both sides of P(K(q_l, p)) = P(K(q*_l, p)) + P(K(q_l, q*_l))."""
    fam = FiniteHistogram(nu)
    k = log_q.shape[0]
    star = np.array(log_q, copy=True)
    for j in range(k):
        members = log_p[labels == j]
        if members.shape[0]:
            star[j] = fam.centroid(members)[0]
    lhs = float(np.mean(kl_matrix(log_q, log_p, nu)[np.arange(labels.size), labels]))
    first = float(np.mean(kl_matrix(star, log_p, nu)[np.arange(labels.size), labels]))
    cross = np.array([kl_matrix(log_q[j:j + 1], star[j:j + 1], nu)[0, 0] for j in range(k)])
    second = float(np.mean(cross[labels]))
    return lhs, first + second


def suite_pythagoras(seed: int, count: int = 500) -> list:
    rng = _rng(seed, "pythagoras")
    out = []
    for c in range(count):
        m = int(rng.integers(2, 13))
        n = int(rng.integers(2, 21))
        k = int(rng.integers(1, min(n, 4) + 1))
        nu = ReferenceMeasure.from_masses(rng.uniform(0.2, 1.0, m))
        log_p = log_normalize(np.log(rng.dirichlet(np.ones(m), n)), nu)
        labels = rng.integers(k, size=n)
        log_q = log_normalize(np.log(rng.dirichlet(np.ones(m), k)), nu)
        lhs, rhs = pythagoras_sides(log_p, labels, log_q, nu)
        gap = abs(lhs - rhs)
        out.append(_case("pythagoras", c, digest(log_p, labels, log_q),
                         {"lhs": lhs, "rhs": rhs, "gap": gap}, gap <= 1e-8))
    return out


def trace_increase(trace) -> float:
    t = np.asarray(trace)
    if t.size < 2:
        return 0.0
    diff = t[1:] - t[:-1]
    diff = np.where(np.isnan(diff), 0.0, diff)
    return float(diff.max())


def _descent_case(engine: str, data, fam, seed: int, c: int) -> dict:
    cfg = LloydConfig(k=3, seed=seed * 7919 + c, init="random_points")
    if engine == "quadratic":
        rep = lloyd_quadratic(data, cfg)
        extra = {}
        ok_extra = True
    elif engine == "robust":
        rep = lloyd_robust(data, cfg, sigma=0.3)
        t = np.asarray(rep.criterion_trace)
        margins = np.asarray(rep.extras["descent_margins"])
        strengthened = float(np.max(t[1:] - (t[:-1] - margins[:t.size - 1]))) if t.size > 1 else 0.0
        # R2 is an increasing function of C2 and must descend as well
        r2 = 2 * 0.3 ** 2 * -np.expm1(-t / (2 * 0.3 ** 2))
        extra = {"strengthened_violation": strengthened, "r2_increase": trace_increase(r2)}
        ok_extra = strengthened <= 1e-8 and extra["r2_increase"] <= 1e-10
    else:
        rep = lloyd_info(data, cfg, fam)
        extra = {}
        ok_extra = True
    inc = trace_increase(rep.criterion_trace)
    measured = {"max_increase": inc, "iterations": rep.iterations,
                "final": rep.criterion, **extra}
    return _case("descent", f"{engine}:{c}", digest(cfg.seed), measured,
                 inc <= 1e-10 and ok_extra)


def _threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, threads)


def suite_descent(seed: int, inits: int = 100, n: int = 200,
                  threads: Optional[int] = None) -> list:
    rng = _rng(seed, "descent")
    pts = generate(SynthSpec("truncated_gaussian_mixture", n, int(rng.integers(2**31)),
                             components=4, spread=0.15))
    hspec = SynthSpec("dirichlet_histograms", n, int(rng.integers(2**31)), m=10, alpha=0.7)
    hist = generate(hspec)
    fam = histogram_family(hspec)
    jobs = [(e, c) for e in ("quadratic", "robust", "info") for c in range(inits)]

    def run(job):
        e, c = job
        return _descent_case(e, hist if e == "info" else pts, fam, seed, c)

    with ThreadPoolExecutor(_threads(threads)) as ex:
        return list(ex.map(run, jobs))


def suite_gaussian_equivalence(seed: int, count: int = 50, n: int = 300, d: int = 3) -> list:
    rng = _rng(seed, "gaussian_equivalence")
    out = []
    ks, sigmas = (2, 3, 5), (0.5, 1.0, 2.0)
    for c in range(count):
        k, sigma = ks[c % 3], sigmas[(c // 3) % 3]
        centers = rng.normal(scale=3.0, size=(k, d))
        x = centers[rng.integers(k, size=n)] + rng.normal(size=(n, d))
        cfg = LloydConfig(k=k, seed=int(rng.integers(2**31)))
        quad = lloyd_quadratic(x, cfg)
        info = lloyd_info(x, cfg, GaussianLocation(sigma))
        same = bool(np.array_equal(quad.labels, info.labels))
        ratio = quad.criterion / info.criterion if info.criterion > 0 else 2 * sigma ** 2
        rel = abs(ratio - 2 * sigma ** 2) / (2 * sigma ** 2)
        out.append(_case("gaussian_equivalence", c, digest(x),
                         {"k": k, "sigma": sigma, "labels_identical": same, "ratio": ratio,
                          "relative_error": rel}, same and rel <= 1e-9))
    return out


def suite_psi(seed: int = 0) -> list:
    x = np.round(np.arange(-10000, 10001) * 1e-3, 12)
    v = bnd.psi(x)
    remainder = np.abs(x - v) - x ** 2 / (4.0 * (1.0 + math.sqrt(2.0)))
    domination = v - np.log1p(x + x ** 2 / 2.0)
    r_bad = int(np.sum(remainder > 0))
    d_bad = int(np.sum(domination > 0))
    return [
        _case("psi", "remainder", digest(x), {"violations": r_bad,
                                              "max_excess": float(remainder.max())}, r_bad == 0),
        _case("psi", "domination", digest(x), {"violations": d_bad,
                                               "max_excess": float(domination.max())}, d_bad == 0),
    ]


def max_sq_mc(k: int, sigma: float, draws: int, rng, chunk: int = 100_000) -> float:
    total = 0.0
    left = draws
    while left:
        m = min(chunk, left)
        e = rng.standard_normal((m, k)) * sigma
        total += float(np.sum(np.max(e * e, axis=1)))
        left -= m
    return total / draws


def suite_maximal_mc(seed: int, draws: int = 1_000_000) -> list:
    rng = _rng(seed, "maximal_mc")
    out = []
    for k in (2, 4, 16):
        for sigma in (0.5, 1.0, 2.0):
            est = max_sq_mc(k, sigma, draws, rng)
            bound = bnd.max_sq_gaussian_bound(k, sigma)
            out.append(_case("maximal_mc", f"k={k},sigma={sigma}", digest(k, sigma, draws),
                             {"mean_max_sq": est, "bound": bound, "floor": sigma ** 2},
                             sigma ** 2 <= est <= bound))
    return out


def suite_simple_endpoints(seed: int = 0) -> list:
    left, right = bnd.simple_inequality_slacks()
    return [_case("simple_endpoints", "endpoints", digest(0.9, 0.6),
                  {"slack_left": left, "slack_right": right}, left >= 0.9 and right >= 0.6)]


def suite_l2_membership(seed: int, count: int = 200) -> list:
    rng = _rng(seed, "l2_membership")
    out = []
    for c in range(count):
        m = int(rng.integers(2, 13))
        n = int(rng.integers(1, 31))
        k = int(rng.integers(1, min(n, 5) + 1))
        nu = ReferenceMeasure.from_masses(rng.uniform(0.2, 1.0, m))
        log_p = log_normalize(np.log(rng.dirichlet(np.full(m, 0.5), n)), nu)
        labels = rng.integers(k, size=n)
        pairs = l2_membership_check(log_p, labels, nu)
        worst = max(l - r for l, r in pairs)
        out.append(_case("l2_membership", c, digest(log_p, labels),
                         {"clusters": len(pairs), "max_lhs_minus_rhs": worst}, worst <= 1e-9))
    return out


def suite_ordering(seed: int, count: int = 100) -> list:
    rng = _rng(seed, "ordering_r2_c2_r")
    out = []
    for c in range(count):
        n = int(rng.integers(1, 200))
        d = int(rng.integers(1, 5))
        k = int(rng.integers(1, 6))
        sigma = float(rng.choice([0.1, 0.5, 1.0, 3.0]))
        x = rng.standard_normal((n, d)) * rng.uniform(0.1, 5)
        centers = rng.standard_normal((k, d))
        r2 = criterion_r2(x, centers, sigma)
        c2 = criterion_c2(x, centers, sigma)
        r = empirical_risk_quadratic(x, centers)
        slack = min(c2 - r2, r - c2)
        out.append(_case("ordering_r2_c2_r", c, digest(x, centers, sigma),
                         {"r2": r2, "c2": c2, "r": r, "min_slack": slack}, slack >= -1e-12))
    return out


_SUITE_FUNCS = {
    "gibbs": suite_gibbs, "chain_rule": suite_chain_rule, "bayes": suite_bayes,
    "pythagoras": suite_pythagoras, "descent": suite_descent,
    "gaussian_equivalence": suite_gaussian_equivalence, "psi": suite_psi,
    "maximal_mc": suite_maximal_mc, "simple_endpoints": suite_simple_endpoints,
    "l2_membership": suite_l2_membership, "ordering_r2_c2_r": suite_ordering,
}


def run_suite(name: str, seed: int = 42, threads: Optional[int] = None) -> tuple[bool, list]:
    """Run one named property battery; returns ``(all_passed, cases)``."""
    if name not in _SUITE_FUNCS:
        raise InvalidInput(f"unknown suite {name!r}; choose from {SUITES}")
    if name == "descent":
        cases = suite_descent(seed, threads=threads)
    else:
        cases = _SUITE_FUNCS[name](seed)
    return all(c["pass"] for c in cases), cases
