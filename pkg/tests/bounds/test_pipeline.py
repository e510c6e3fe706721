from dataclasses import replace

import numpy as np
import pytest

from cfdist.bounds.estimators import BoundKind, PerPointNuisance
from cfdist.bounds.pipeline import (
    bounds_from_rows,
    cross_fit_per_point,
    estimate_bounds,
    threshold_grid,
    threshold_pairs,
)
from cfdist.config.config import RunConfig
from cfdist.config.constants import OutOfRange
from cfdist.data.dataset import Dataset
from cfdist.sim.dgp import BoundsDgpSpec, BoundsVariant, SimulatedData, generate
from cfdist.sim.oracle import OracleQuery, OracleTarget, oracle_per_point, oracle_truth


def test_threshold_pairs(bounds_data: Dataset, run_config: RunConfig):
    pairs = threshold_pairs(bounds_data.y, run_config)
    assert len(pairs) == 9
    assert len(threshold_grid(pairs)) == 3

    explicit = replace(run_config, thresholds=((0.0, 1.0),))
    assert threshold_pairs(bounds_data.y, explicit) == ((0.0, 1.0),)


def test_cross_fit_covers_every_row(bounds_data: Dataset, run_config: RunConfig):
    pairs = ((0.0, 0.5),)
    per_point = cross_fit_per_point(bounds_data, pairs, replace(run_config, bounds_folds=3), seed=1)
    rows = per_point[(0.0, 0.5)]
    assert rows.n == bounds_data.n
    assert np.all(np.isfinite(rows.theta0)) and np.all(np.isfinite(rows.theta1))
    assert np.all((rows.pi1 >= run_config.clip_eps) & (rows.pi1 <= 1 - run_config.clip_eps))


def test_cross_fit_needs_binary_treatment(iv_continuous_sim: SimulatedData, run_config: RunConfig):
    with pytest.raises(OutOfRange):
        cross_fit_per_point(iv_continuous_sim.dataset, ((0.0, 0.0),), run_config, seed=0)


def test_estimate_bounds_runs_every_estimator(bounds_data: Dataset, run_config: RunConfig):
    cfg = replace(run_config, threshold_quantiles=(0.5,), bounds_folds=3)
    result = estimate_bounds(bounds_data, cfg)
    assert len(result.pairs) == 1
    assert {e.kind for e in result.estimates} == set(BoundKind)
    (plugin_lower,), (plugin_upper,) = result.select(BoundKind.PLUGIN_L), result.select(BoundKind.PLUGIN_U)
    assert plugin_lower.value <= plugin_upper.value
    assert result.margins[result.pairs[0]].n == bounds_data.n


def test_estimator_selection(run_config: RunConfig):
    cfg = replace(run_config, estimators=("dr_smooth",))
    spec = BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=500, seed=3)
    rows = oracle_per_point(spec, generate(spec), 0.5, 0.0)
    assert [e.kind for e in bounds_from_rows(rows, cfg)] == [BoundKind.DR_SMOOTH_U]


def test_same_seed_same_estimates(bounds_data: Dataset, run_config: RunConfig):
    cfg = replace(run_config, thresholds=((0.5, 0.0),), bounds_folds=3)
    first = estimate_bounds(bounds_data, cfg, seed=5)
    second = estimate_bounds(bounds_data, cfg, seed=5)
    assert [e.raw for e in first.estimates] == [e.raw for e in second.estimates]


def test_oracle_nuisances_recover_truth(run_config: RunConfig):
    spec = BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=20_000, seed=21)
    sim = generate(spec)
    y1, y0 = 1.0, 0.8
    rows = oracle_per_point(spec, sim, y1, y0)
    estimates = {e.kind: e for e in bounds_from_rows(rows, run_config)}

    for kind, target in [
        (BoundKind.DR_SMOOTH_U, OracleTarget.SMOOTH_UPPER),
        (BoundKind.DR_SMOOTH_L, OracleTarget.SMOOTH_LOWER),
        (BoundKind.DR_DIRECT_U, OracleTarget.UPPER),
    ]:
        truth = oracle_truth(spec, OracleQuery(target=target, y1=y1, y0=y0, t=run_config.smoothing_t), 200_000, seed=99)
        est = estimates[kind]
        assert abs(est.raw - truth.value) < 4 * est.se + 3 * truth.mc_se + 0.005


def test_dr_upper_is_robust_to_a_wrong_propensity(run_config: RunConfig):
    spec = BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=20_000, seed=22)
    sim = generate(spec)
    exact = oracle_per_point(spec, sim, 1.0, 0.8)
    wrong_pi = PerPointNuisance(
        theta0=exact.theta0,
        theta1=exact.theta1,
        pi1=np.full(exact.n, 0.5),
        a=exact.a,
        below0=exact.below0,
        below1=exact.below1,
        y1=exact.y1,
        y0=exact.y0,
    )
    cfg = replace(run_config, estimators=("dr_smooth",))
    (est,) = bounds_from_rows(wrong_pi, cfg)
    truth = oracle_truth(spec, OracleQuery(target=OracleTarget.SMOOTH_UPPER, y1=1.0, y0=0.8, t=cfg.smoothing_t), 200_000, seed=99)
    assert abs(est.raw - truth.value) < 4 * est.se + 3 * truth.mc_se + 0.005
