import math

import numpy as np
import pytest
from scipy.stats import norm

from cfdist.config.constants import ConfigError, UnsupportedTarget
from cfdist.sim.dgp import (
    BoundsDgpSpec,
    BoundsVariant,
    IvDgpSpec,
    IvOutcome,
    IvTreatment,
    generate,
)
from cfdist.sim.oracle import (
    OracleMethod,
    OracleQuery,
    OracleTarget,
    analytic_marginal_cdf,
    dose_response,
    oracle_per_point,
    oracle_propensity,
    oracle_truth,
)

N_MC = 100_000


def test_same_seed_same_data():
    spec = BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=100, seed=5)
    first, second = generate(spec), generate(spec)
    np.testing.assert_array_equal(first.dataset.y, second.dataset.y)
    np.testing.assert_array_equal(first.side.to_numpy(), second.side.to_numpy())
    other = generate(BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=100, seed=6))
    assert not np.array_equal(first.dataset.y, other.dataset.y)


def test_linear_design_has_unit_effect():
    sim = generate(BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=500, seed=1))
    np.testing.assert_allclose(sim.side["y1"] - sim.side["y0"], 1.0)
    observed = np.where(sim.dataset.a == 1, sim.side["y1"], sim.side["y0"])
    np.testing.assert_array_equal(sim.dataset.y, observed)
    assert sim.dataset.is_binary
    assert sim.dataset.d == 2


def test_iv_design_columns():
    sim = generate(IvDgpSpec(outcome=IvOutcome.NONLINEAR, treatment=IvTreatment.CONTINUOUS, n=300, seed=2))
    data = sim.dataset
    assert data.has_instrument and data.d == 0
    assert not data.is_binary
    assert np.all(np.abs(data.s) <= 2.0)
    assert list(sim.side.columns) == ["z_c", "z_s"]


def test_tiny_designs_are_rejected():
    with pytest.raises(ConfigError):
        BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=1, seed=0)


def test_analytic_marginal_cdf_at_center():
    spec = BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=2, seed=0)
    assert analytic_marginal_cdf(spec, 1, 1.0) == pytest.approx(0.5)
    assert analytic_marginal_cdf(spec, 0, 1.5) == pytest.approx(norm.cdf(1.0))
    assert analytic_marginal_cdf(BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=2, seed=0), 1, 0.0) is None


def test_marginal_cdf_monte_carlo_agrees_with_draws():
    spec = BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=200_000, seed=3)
    sim = generate(spec)
    truth = oracle_truth(spec, OracleQuery(target=OracleTarget.MARGINAL_CDF, y0=1.0, arm=0), N_MC, seed=4)
    assert truth.method == OracleMethod.MONTE_CARLO
    empirical = float(np.mean(sim.side["y0"] <= 1.0))
    assert abs(truth.value - empirical) < 5 * truth.mc_se + 0.005


def test_bound_truths_are_ordered():
    spec = BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=2, seed=0)
    values = {
        target: oracle_truth(spec, OracleQuery(target=target, y1=1.0, y0=1.0, t=50.0), N_MC, seed=7).value
        for target in (
            OracleTarget.LOWER,
            OracleTarget.UPPER,
            OracleTarget.MARGINAL_LOWER,
            OracleTarget.MARGINAL_UPPER,
            OracleTarget.SMOOTH_UPPER,
            OracleTarget.SMOOTH_LOWER,
        )
    }
    assert values[OracleTarget.MARGINAL_LOWER] <= values[OracleTarget.LOWER] <= values[OracleTarget.UPPER] <= values[OracleTarget.MARGINAL_UPPER]
    assert values[OracleTarget.SMOOTH_UPPER] <= values[OracleTarget.UPPER]
    assert values[OracleTarget.SMOOTH_LOWER] >= values[OracleTarget.LOWER]


def test_width_reduction_is_marginal_minus_conditional():
    spec = BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=2, seed=0)
    query = dict(y1=1.0, y0=0.5, t=50.0)
    get = lambda target: oracle_truth(spec, OracleQuery(target=target, **query), N_MC, seed=8).value
    expected = (get(OracleTarget.MARGINAL_UPPER) - get(OracleTarget.MARGINAL_LOWER)) - (get(OracleTarget.UPPER) - get(OracleTarget.LOWER))
    assert get(OracleTarget.WIDTH_REDUCTION) == pytest.approx(expected, abs=1e-9)
    assert expected > 0


def test_ate_and_dose_truths():
    linear = IvDgpSpec(outcome=IvOutcome.LINEAR, treatment=IvTreatment.CONTINUOUS, n=2, seed=0)
    assert oracle_truth(linear, OracleQuery(target=OracleTarget.ATE), 1, seed=0).value == 2.0
    assert oracle_truth(linear, OracleQuery(target=OracleTarget.DOSE_CURVE, dose=0.5), 1, seed=0).value == pytest.approx(2.0)

    nonlinear = IvDgpSpec(outcome=IvOutcome.NONLINEAR, treatment=IvTreatment.CONTINUOUS, n=2, seed=0)
    assert dose_response(nonlinear, 1.0) - dose_response(nonlinear, 0.0) == pytest.approx(0.3 + 0.2 * (math.sin(2.5) - math.sin(0.5)))

    bounds = BoundsDgpSpec(variant=BoundsVariant.NONLINEAR, n=2, seed=0)
    assert oracle_truth(bounds, OracleQuery(target=OracleTarget.ATE), 1, seed=0).value == pytest.approx(math.exp(-2) + 0.5)


def test_dose_response_matches_simulation():
    spec = IvDgpSpec(outcome=IvOutcome.NONLINEAR, treatment=IvTreatment.CONTINUOUS, n=200_000, seed=9)
    sim = generate(spec)
    simulated = float(np.mean(spec.outcome_mean(0.7, sim.side["z_c"].to_numpy())))
    assert simulated == pytest.approx(dose_response(spec, 0.7), abs=0.01)


def test_unsupported_targets():
    continuous = IvDgpSpec(outcome=IvOutcome.LINEAR, treatment=IvTreatment.CONTINUOUS, n=2, seed=0)
    with pytest.raises(UnsupportedTarget):
        oracle_truth(continuous, OracleQuery(target=OracleTarget.UPPER), 100, seed=0)
    with pytest.raises(UnsupportedTarget):
        oracle_truth(BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=2, seed=0), OracleQuery(target=OracleTarget.DOSE_CURVE), 100, seed=0)
    with pytest.raises(UnsupportedTarget):
        oracle_propensity(continuous, np.zeros((3, 1)))


def test_oracle_propensity_matches_simulation():
    spec = IvDgpSpec(outcome=IvOutcome.LINEAR, treatment=IvTreatment.BINARY, n=200_000, seed=10)
    sim = generate(spec)
    z_c = sim.side[["z_c"]].to_numpy()
    pi = oracle_propensity(spec, z_c)
    assert np.all((pi > 0) & (pi < 1))
    assert float(np.mean(pi)) == pytest.approx(float(np.mean(sim.dataset.a)), abs=0.01)


def test_oracle_per_point():
    spec = BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=50, seed=11)
    sim = generate(spec)
    rows = oracle_per_point(spec, sim, 1.0, 0.0)
    assert rows.n == 50
    np.testing.assert_array_equal(rows.below1, (sim.dataset.y <= 1.0).astype(float))
    assert np.all((rows.theta1 > 0) & (rows.theta1 < 1))
