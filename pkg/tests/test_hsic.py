import numpy as np
import pytest

from cfdist.config.constants import LengthMismatch, OutOfRange
from cfdist.hsic import (
    KernelSpec,
    center,
    default_kernel,
    hsic_grad_x,
    hsic_stat,
    median_bandwidth,
    permutation_test,
)


def _double_sum_hsic(xs: np.ndarray, ys: np.ndarray, sx: float, sy: float) -> float:
    """(1/n²) Σ_ij K̃_ij L̃_ij written out with explicit centering matrices."""
    n = len(xs)
    k = np.exp(-((xs[:, None] - xs[None, :]) ** 2) / (2 * sx**2))
    l = np.exp(-((ys[:, None] - ys[None, :]) ** 2) / (2 * sy**2))
    h = np.eye(n) - np.ones((n, n)) / n
    return float(np.trace(k @ h @ l @ h)) / n**2


def test_matches_double_sum(rng: np.random.Generator):
    xs, ys = rng.normal(size=40), rng.normal(size=40)
    got = hsic_stat(xs, ys, KernelSpec(0.8), KernelSpec(1.3))
    assert got == pytest.approx(_double_sum_hsic(xs, ys, 0.8, 1.3), rel=1e-10)


def test_center_zeroes_row_and_column_means(rng: np.random.Generator):
    gram = KernelSpec(1.0).gram(rng.normal(size=(15, 2)))
    centered = center(gram)
    np.testing.assert_allclose(centered.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(centered.mean(axis=1), 0.0, atol=1e-12)


def test_median_bandwidth():
    assert median_bandwidth(np.array([0.0, 1.0, 3.0])) == pytest.approx(2.0)
    assert default_kernel(np.ones(5)).sigma == 1.0


def test_constant_input_gives_zero():
    xs = np.linspace(0, 1, 20)
    assert hsic_stat(xs, np.full(20, 3.0)) == pytest.approx(0.0, abs=1e-15)


def test_dependence_is_detected(rng: np.random.Generator):
    xs = rng.normal(size=150)
    dependent = permutation_test(xs, xs**2 + 0.1 * rng.normal(size=150), n_perm=99, seed=1)
    independent = permutation_test(xs, rng.normal(size=150), n_perm=99, seed=1)
    assert dependent.p_value == pytest.approx(0.01)
    assert independent.p_value > 0.01
    assert dependent.statistic > independent.statistic


def test_permutation_test_is_seeded(rng: np.random.Generator):
    xs, ys = rng.normal(size=60), rng.normal(size=60)
    assert permutation_test(xs, ys, seed=4) == permutation_test(xs, ys, seed=4)


def test_constant_ys_has_p_value_one():
    result = permutation_test(np.linspace(0, 1, 30), np.zeros(30), n_perm=99)
    assert result.p_value == 1.0


def test_input_errors(rng: np.random.Generator):
    with pytest.raises(LengthMismatch):
        hsic_stat(rng.normal(size=5), rng.normal(size=6))
    with pytest.raises(OutOfRange):
        hsic_stat(np.zeros(1), np.zeros(1))
    with pytest.raises(OutOfRange):
        permutation_test(rng.normal(size=10), rng.normal(size=10), n_perm=50)
    with pytest.raises(OutOfRange):
        KernelSpec(0.0)


def test_gradient_matches_finite_differences(rng: np.random.Generator):
    z, s = rng.normal(size=(12, 2)), rng.normal(size=12)
    spec_z, spec_s = KernelSpec(1.1), KernelSpec(0.9)
    stat, grad = hsic_grad_x(z, s, spec_z, spec_s)
    assert stat == pytest.approx(hsic_stat(z, s, spec_z, spec_s))

    h = 1e-6
    numeric = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        up, down = z.copy(), z.copy()
        up[idx] += h
        down[idx] -= h
        numeric[idx] = (hsic_stat(up, s, spec_z, spec_s) - hsic_stat(down, s, spec_z, spec_s)) / (2 * h)
    np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-10)


@pytest.mark.slow
def test_permutation_test_size_under_independence():
    seeds = 1000
    rejections = 0
    for seed in range(seeds):
        data_rng = np.random.default_rng(seed)
        xs, ys = data_rng.normal(size=30), data_rng.standard_t(df=5, size=30)
        p_value = permutation_test(xs, ys, n_perm=199, seed=seed).p_value
        assert p_value is not None
        rejections += p_value <= 0.05
    assert abs(rejections / seeds - 0.05) <= 0.02
