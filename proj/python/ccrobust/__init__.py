"""Calibrated union-of-balls uncertainty sets, robust LPs and Monte-Carlo studies."""

import json as _json

from ._ccrobust import (
    CalibrationSpec,
    DimensionError,
    DomainError,
    EmptySampleError,
    GaussianMixture,
    ModelError,
    UncertaintySet,
    UndersampledError,
    UnsupportedError,
    __version__,
    bundled_mixture,
    calibrate_radius,
    calibrate_radius_at_level,
    chernoff_violation_bounds,
    cli,
    dual_norm_eval,
    empirical_quantile,
    estimate_coverage,
    exact_violation_probs,
    norm_eval,
    optimal_lambda,
    order_statistic_rank,
    run_consistency_experiment,
    sample,
    sample_size,
    sample_size_constant,
    shape_value,
    true_ball_mass,
)
from ._ccrobust import _bundled_example_json, _solve_json


def bundled_example(radius=0.1):
    """The two-variable robust program as a dict: max x1 + x2 over x >= 0
    subject to one robust row over an L2 ball at (0.5, 0.5)."""
    return _json.loads(_bundled_example_json(radius))


def solve(model=None):
    """Solve a robust linear program given as a dict (or the bundled example).

    Returns the solver report as a dict with keys status, x, objective, ...
    """
    if model is None:
        model = bundled_example()
    return _json.loads(_solve_json(_json.dumps(model)))


__all__ = [name for name in dir() if not name.startswith("_")]
