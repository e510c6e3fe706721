import numpy as np
import pytest

from cfdist.bounds.estimators import (
    Z_CRIT,
    BoundEstimate,
    BoundKind,
    PerPointNuisance,
    dr_direct_upper,
    dr_smooth_lower,
    dr_smooth_upper,
    margin_profile,
    marginal_bounds,
    plugin_bounds,
    width_reduction,
)
from cfdist.bounds.fh import logsumexp_min
from cfdist.config.constants import EmptyEvaluationSet, LengthMismatch, OutOfRange


def _rows(theta1, theta0, pi1, a, below1, below0) -> PerPointNuisance:
    return PerPointNuisance(
        theta0=np.asarray(theta0, dtype=float),
        theta1=np.asarray(theta1, dtype=float),
        pi1=np.asarray(pi1, dtype=float),
        a=np.asarray(a, dtype=float),
        below0=np.asarray(below0, dtype=float),
        below1=np.asarray(below1, dtype=float),
        y1=0.5,
        y0=0.25,
    )


@pytest.fixture
def rows() -> PerPointNuisance:
    return _rows(
        theta1=[0.6, 0.3, 0.8, 0.5],
        theta0=[0.4, 0.5, 0.7, 0.5],
        pi1=[0.5, 0.25, 0.8, 0.5],
        a=[1, 0, 1, 0],
        below1=[1, 0, 0, 1],
        below0=[0, 1, 1, 0],
    )


def test_residuals(rows: PerPointNuisance):
    np.testing.assert_allclose(rows.residual(1), [(1 - 0.6) / 0.5, 0.0, (0 - 0.8) / 0.8, 0.0])
    np.testing.assert_allclose(rows.residual(0), [0.0, (1 - 0.5) / 0.75, 0.0, (0 - 0.5) / 0.5])


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        _rows([0.5], [0.5, 0.5], [0.5], [1], [1], [0])


def test_from_scores_se():
    scores = np.array([0.1, 0.4, 0.2, 0.7])
    est = BoundEstimate.from_scores(scores, BoundKind.DR_DIRECT_U)
    expected_se = np.sqrt(np.mean((scores - scores.mean()) ** 2) / 4)
    assert est.value == pytest.approx(0.35)
    assert est.se == pytest.approx(expected_se)
    assert est.ci_lo == pytest.approx(0.35 - Z_CRIT * expected_se)
    assert est.ci_hi == pytest.approx(0.35 + Z_CRIT * expected_se)


def test_truncation_keeps_raw():
    est = BoundEstimate.from_value(1.3, 0.1, BoundKind.DR_SMOOTH_U, 10, 50.0, 0.0, 0.0)
    assert est.value == 1.0
    assert est.raw == 1.3
    assert est.ci_hi == 1.0
    assert est.to_record()["kind"] == "dr_smooth_u"


def test_plugin_bounds(rows: PerPointNuisance):
    lower, upper = plugin_bounds(rows)
    assert lower.value == pytest.approx(np.mean([0.0, 0.0, 0.5, 0.0]))
    assert upper.value == pytest.approx(np.mean([0.4, 0.3, 0.7, 0.5]))
    assert lower.kind == BoundKind.PLUGIN_L and upper.kind == BoundKind.PLUGIN_U


def test_dr_direct_ties_go_to_arm_zero(rows: PerPointNuisance):
    # row 3 ties; the arm-0 residual -1.0 is used
    expected = [0.4 + 0.0, 0.3 + 0.0, 0.7 + 0.0, 0.5 - 1.0]
    est = dr_direct_upper(rows)
    assert est.raw == pytest.approx(np.mean(expected))


def test_dr_estimates_equal_plugin_when_residuals_vanish(rng: np.random.Generator):
    n = 200
    theta1, theta0 = rng.random(n), rng.random(n)
    rows = _rows(theta1, theta0, np.full(n, 0.5), np.zeros(n), theta1, theta0)
    # all rows control with below0 = θ0: both residuals vanish
    plug_lower, plug_upper = plugin_bounds(rows)
    assert dr_direct_upper(rows).raw == pytest.approx(plug_upper.raw)
    assert dr_smooth_upper(rows, 50.0).raw == pytest.approx(float(np.mean(logsumexp_min(theta0, theta1, 50.0))))
    assert dr_smooth_upper(rows, 1e4).raw == pytest.approx(plug_upper.raw, abs=1e-3)
    assert dr_smooth_lower(rows, 1e4).raw == pytest.approx(plug_lower.raw, abs=1e-3)


def test_smooth_upper_saturates_to_direct_upper(rng: np.random.Generator):
    n = 1000
    theta0 = rng.uniform(0.35, 0.65, n)
    gap = rng.uniform(1e-4, 0.3, n) * rng.choice([-1.0, 1.0], n)
    a = (rng.random(n) < 0.5).astype(float)
    rows = _rows(
        theta1=theta0 + gap,
        theta0=theta0,
        pi1=rng.uniform(0.2, 0.8, n),
        a=a,
        below1=(rng.random(n) < 0.5).astype(float),
        below0=(rng.random(n) < 0.5).astype(float),
    )
    assert np.count_nonzero(rows.residual(1)) > 100 and np.count_nonzero(rows.residual(0)) > 100

    direct = dr_direct_upper(rows)
    assert dr_smooth_upper(rows, 1e6).raw == pytest.approx(direct.raw, abs=1e-6)
    assert dr_smooth_upper(rows, 1e6).se == pytest.approx(direct.se, abs=1e-6)
    # at moderate t the residual weights are still blended
    assert abs(dr_smooth_upper(rows, 5.0).raw - direct.raw) > 1e-4


def test_smooth_requires_positive_t(rows: PerPointNuisance):
    with pytest.raises(OutOfRange):
        dr_smooth_upper(rows, 0.0)
    with pytest.raises(OutOfRange):
        dr_smooth_lower(rows, -1.0)


def test_empty_evaluation_set():
    empty = _rows([], [], [], [], [], [])
    with pytest.raises(EmptyEvaluationSet):
        plugin_bounds(empty)
    with pytest.raises(EmptyEvaluationSet):
        dr_direct_upper(empty)


def test_marginal_bounds_branches():
    n = 100
    high = _rows(np.full(n, 0.8), np.full(n, 0.7), np.full(n, 0.5), np.zeros(n), np.full(n, 0.8), np.full(n, 0.7))
    lower, upper = marginal_bounds(high)
    assert lower.raw == pytest.approx(0.5)
    assert upper.raw == pytest.approx(0.7)

    low = _rows(np.full(n, 0.2), np.full(n, 0.3), np.full(n, 0.5), np.zeros(n), np.full(n, 0.2), np.full(n, 0.3))
    lower, upper = marginal_bounds(low)
    assert lower.raw == 0.0 and lower.se == 0.0
    assert upper.raw == pytest.approx(0.2)


def test_conditional_bounds_are_tighter_than_marginal(rng: np.random.Generator):
    n = 500
    theta1, theta0 = rng.random(n), rng.random(n)
    rows = _rows(theta1, theta0, np.full(n, 0.5), np.zeros(n), theta1, theta0)
    m_lower, m_upper = marginal_bounds(rows)
    p_lower, p_upper = plugin_bounds(rows)
    assert m_lower.raw <= p_lower.raw + 1e-12
    assert p_upper.raw <= m_upper.raw + 1e-12
    assert width_reduction((m_lower.raw, m_upper.raw), (p_lower.raw, p_upper.raw)) >= 0


def test_margin_profile():
    rows = _rows([0.5, 0.5, 0.5, 0.5], [0.5, 0.51, 0.6, 0.9], [0.5] * 4, [0] * 4, [0] * 4, [0] * 4)
    profile = margin_profile(rows, [0.0, 0.05, 0.2, 0.5], eps=0.01)
    assert profile.curve == pytest.approx((0.25, 0.5, 0.75, 1.0))
    assert profile.flip_fraction == pytest.approx(0.5)
    with pytest.raises(OutOfRange):
        margin_profile(rows, [0.2, 0.1])


def test_width_reduction():
    assert width_reduction((0.1, 0.9), (0.3, 0.6)) == pytest.approx(0.5)
    assert width_reduction((0.3, 0.6), (0.1, 0.9)) == pytest.approx(-0.5)
