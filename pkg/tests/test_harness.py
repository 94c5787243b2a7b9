import json
import math
from dataclasses import replace

import numpy as np
import pytest

from infokmeans.core import InvalidInput, PointSet
from infokmeans.harness import (SUITES, FittedModel, SynthSpec, _mixture_means,
                                bound_vs_risk_trial, generate, histogram_family, holdout_risk,
                                max_sq_mc, per_point_loss, pythagoras_sides, run_suite,
                                trace_increase)
from infokmeans.quantize import LloydConfig


def test_uniform_ball_respects_radius():
    ps = generate(SynthSpec("uniform_ball", 1000, seed=1, B=1.0, d=2))
    assert isinstance(ps, PointSet)
    assert np.linalg.norm(ps.points, axis=1).max() <= 1.0


def test_uniform_ball_fills_the_disc():
    x = generate(SynthSpec("uniform_ball", 50_000, seed=2, B=2.0, d=2)).points
    r = np.linalg.norm(x, axis=1)
    # for a uniform disc of radius B, P(|x| <= B/2) = 1/4
    assert np.mean(r <= 1.0) == pytest.approx(0.25, abs=0.01)


def test_mixture_respects_radius():
    x = generate(SynthSpec("truncated_gaussian_mixture", 2000, seed=3, B=1.5, d=3,
                           spread=0.5)).points
    assert x.shape == (2000, 3)
    assert np.linalg.norm(x, axis=1).max() <= 1.5


def test_dirichlet_histograms_are_densities():
    p = generate(SynthSpec("dirichlet_histograms", 50, seed=4, m=10, alpha=1.0))
    assert p.shape == (50, 10)
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(np.exp(p).mean(axis=1), 1.0, atol=1e-12)


def test_bag_of_words_full_support():
    p = generate(SynthSpec("bag_of_words", 30, seed=5, m=20, topic_count=4, doc_length=50))
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(np.exp(p).mean(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("gen", ["uniform_ball", "truncated_gaussian_mixture",
                                 "dirichlet_histograms", "bag_of_words"])
def test_generate_deterministic(gen):
    a, b = generate(SynthSpec(gen, 40, seed=6)), generate(SynthSpec(gen, 40, seed=6))
    a = a.points if isinstance(a, PointSet) else a
    b = b.points if isinstance(b, PointSet) else b
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kwargs", [dict(generator="nope"), dict(n=0), dict(B=-1.0),
                                    dict(alpha=0.0), dict(smoothing=-1.0)])
def test_synth_spec_rejects(kwargs):
    base = dict(generator="uniform_ball", n=10)
    base.update(kwargs)
    with pytest.raises(InvalidInput):
        SynthSpec(**base)


def test_holdout_same_seed_equals_empirical():
    spec = SynthSpec("uniform_ball", 500, seed=7)
    x = generate(spec)
    model = FittedModel("quadratic", np.array([[0.1, 0.0], [-0.3, 0.2]]))
    mean, se = holdout_risk(model, spec, spec.n)
    assert mean == pytest.approx(per_point_loss(model, x).mean(), abs=1e-15)
    assert se > 0


def test_holdout_degenerate_sample_is_zero():
    model = FittedModel("quadratic", np.array([[0.0, 0.0], [5.0, 5.0]]))
    assert per_point_loss(model, np.zeros((10, 2))).max() == 0.0
    robust = FittedModel("robust", np.array([[1.0, 1.0]]), sigma=0.5)
    assert per_point_loss(robust, np.ones((4, 2))).max() == 0.0


def test_holdout_separated_mixture_matches_within_variance():
    spec = SynthSpec("truncated_gaussian_mixture", 10, seed=11, B=1.0, d=2, components=2,
                     spread=0.02)
    means = _mixture_means(spec)
    assert np.linalg.norm(means[0] - means[1]) > 0.2
    mean, se = holdout_risk(FittedModel("quadratic", means), spec, 100_000)
    # within-component second moment: d * (spread * B)^2
    assert mean == pytest.approx(2 * 0.02 ** 2, rel=0.02)
    assert se < 0.01 * mean


def test_info_per_point_loss():
    spec = SynthSpec("dirichlet_histograms", 20, seed=8, m=5)
    p = generate(spec)
    fam = histogram_family(spec)
    loss = per_point_loss(FittedModel("info", p[:3], family=fam), p)
    assert np.all(loss[:3] == 0.0) and np.all(loss >= 0)


def test_trial_uniform_small():
    spec = SynthSpec("uniform_ball", 1000, seed=9)
    rep = bound_vs_risk_trial(spec, LloydConfig(k=2, seed=9), holdout_n=20_000, restarts=2)
    assert rep.satisfied
    assert rep.holdout_risk <= rep.empirical_risk + rep.bound_value
    assert all(math.isfinite(v) for v in (rep.empirical_risk, rep.holdout_risk, rep.bound_value))


def test_trial_smallest_n_is_vacuous():
    spec = SynthSpec("uniform_ball", 4, seed=10)
    rep = bound_vs_risk_trial(spec, LloydConfig(k=2), holdout_n=10_000, restarts=1)
    assert rep.vacuous and rep.satisfied


def test_trial_robust_huge_sigma_trivially_satisfied():
    spec = SynthSpec("uniform_ball", 400, seed=12)
    rep = bound_vs_risk_trial(spec, LloydConfig(k=2), "robust", sigma=100.0,
                              holdout_n=10_000, restarts=1)
    assert rep.satisfied and rep.bound_value > 2 * 100.0 ** 2 * 0.1


def test_trial_excess_mode_records_proxy():
    spec = SynthSpec("uniform_ball", 500, seed=13)
    rep = bound_vs_risk_trial(spec, LloydConfig(k=2), mode="excess", holdout_n=10_000,
                              restarts=1, reference_n=2000)
    assert rep.metadata["reference_is_proxy"] and rep.satisfied


def test_trial_info_histograms():
    spec = SynthSpec("dirichlet_histograms", 200, seed=14, m=6, alpha=2.0)
    rep = bound_vs_risk_trial(spec, LloydConfig(k=2), "info", holdout_n=5000, restarts=1)
    assert math.isfinite(rep.bound_value) and rep.satisfied


def test_trace_increase():
    assert trace_increase([3.0, 2.0, 2.0]) == 0.0
    assert trace_increase([3.0, 3.5, 1.0]) == 0.5
    assert trace_increase([1.0]) == 0.0


def test_pythagoras_sides_equal():
    rng = np.random.default_rng(15)
    spec = SynthSpec("dirichlet_histograms", 12, seed=15, m=4)
    p = generate(spec)
    q = generate(replace(spec, n=3, seed=16))
    lhs, rhs = pythagoras_sides(p, rng.integers(3, size=12), q, histogram_family(spec).nu)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_max_sq_mc_single_coordinate():
    est = max_sq_mc(1, 1.0, 200_000, np.random.default_rng(0), chunk=30_000)
    assert est == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("name", [s for s in SUITES if s not in ("gibbs", "maximal_mc", "descent")])
def test_suites_pass_and_are_deterministic(name):
    ok, cases = run_suite(name, seed=42)
    assert ok
    again = run_suite(name, seed=42)[1]
    assert json.dumps(cases, sort_keys=True) == json.dumps(again, sort_keys=True)
    for c in cases:
        assert set(c) == {"suite", "case", "inputs_digest", "measured", "pass"}
        assert len(c["inputs_digest"]) == 16


def test_unknown_suite():
    with pytest.raises(InvalidInput):
        run_suite("nosuch")


def test_descent_threads_do_not_change_verdicts():
    from infokmeans.harness import suite_descent
    a = suite_descent(3, inits=5, threads=1)
    b = suite_descent(3, inits=5, threads=4)
    assert a == b and all(c["pass"] for c in a)
