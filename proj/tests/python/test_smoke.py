import json
import math

import numpy as np
import pytest

import ccrobust as cc


def test_sample_size_at_optimal_lambda():
    lam = cc.optimal_lambda(0.9, 0.05)
    assert lam == pytest.approx(0.24496552958641038, abs=1e-12)
    assert cc.sample_size(0.9, 0.05, 0.05, lam) == 4918
    spec = cc.CalibrationSpec(0.9, 0.05, 0.05)
    assert spec.n_min == 4918
    assert spec.alpha_n == pytest.approx(0.9 + lam * 0.05)
    below, above = cc.chernoff_violation_bounds(spec.n_min, 0.9, 0.05, spec.alpha_n)
    assert below <= 0.025 and above <= 0.025


def test_quantile_matches_sorting():
    rng = np.random.default_rng(3)
    values = rng.normal(size=57).tolist()
    for gamma in (0.1, 0.5, 0.9, 0.99):
        k = math.ceil(57 * gamma)
        assert cc.empirical_quantile(values, gamma) == sorted(values)[k - 1]
    with pytest.raises(cc.EmptySampleError):
        cc.empirical_quantile([], 0.5)
    with pytest.raises(cc.DomainError):
        cc.empirical_quantile(values, 1.0)


def test_set_membership_and_worst_case():
    centers = np.array([[0.0, 0.0], [3.0, 0.0]])
    s = cc.UncertaintySet(centers, 1.0, "l2")
    assert len(s) == 2 and s.dimension == 2
    assert s.contains(np.array([3.5, 0.5]))
    assert not s.contains(np.array([1.5, 0.0]))
    assert cc.shape_value(centers, np.array([1.5, 0.0])) == pytest.approx(1.5)
    # max over the balls of x.c + r * |x|_2
    assert s.worst_case_linear(np.array([1.0, 0.0])) == pytest.approx(4.0)
    again = cc.UncertaintySet.from_json(s.to_json())
    assert np.array_equal(again.centers, centers) and again.radius == 1.0
    with pytest.raises(cc.DomainError):
        cc.UncertaintySet(centers, -1.0)


def test_calibrate_and_cover():
    mix = cc.bundled_mixture("b")
    spec = cc.CalibrationSpec(0.9, 0.05, 0.05)
    centers = cc.sample(mix, 10, seed=11, stream=0)
    training = cc.sample(mix, spec.n_min, seed=11, stream=1)
    assert training.shape == (4918, 2)
    s, warning = cc.calibrate_radius(centers, training, spec)
    assert warning is None and s.radius > 0
    cov = cc.estimate_coverage(s, mix, 50000, seed=11, stream=2)
    assert 0.85 <= cov <= 1.0
    with pytest.raises(cc.UndersampledError):
        cc.calibrate_radius(centers, training[:100], spec)
    _, warning = cc.calibrate_radius(centers, training[:100], spec, strict=False)
    assert warning


def test_small_consistency_run():
    spec = cc.CalibrationSpec(0.9, 0.05, 0.05)
    r = cc.run_consistency_experiment(cc.bundled_mixture("a"), spec, m=5, trials=4,
                                      coverage_samples=2000, seed=2)
    assert len(r["coverage"]) == 4
    assert r["p05"] <= r["p50"] <= r["p95"]
    assert r["training_size"] == 4918


def test_solve_bundled_program():
    report = cc.solve()
    assert report["status"] == "optimal"
    assert report["objective"] == pytest.approx(2 / (1 + 0.1 * math.sqrt(2)), abs=1e-6)
    nominal = cc.solve(cc.bundled_example(0.0))
    assert nominal["objective"] == pytest.approx(2.0)


def test_cli_in_process():
    code, out, err = cc.cli(["samplesize", "--alpha", "0.9", "--eps", "0.05", "--delta", "0.05"])
    assert code == 0, err
    assert json.loads(out)["n_min"] == 4918
    assert cc.cli(["samplesize", "--delta", "2"])[0] == 2
