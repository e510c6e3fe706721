"""Hilbert-Schmidt independence criterion with RBF kernels."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .config.constants import MEDIAN_HEURISTIC_MAX_POINTS, AllPointsIdentical, LengthMismatch, OutOfRange
from .data.folds import mix_seed

_SUBSAMPLE_SEED = 0


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel k(x, x') = exp(-|x - x'|² / (2σ²))."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise OutOfRange(f"Kernel bandwidth must be positive, got {self.sigma}")

    def gram(self, points: np.ndarray) -> np.ndarray:
        pts = as_points(points)
        return np.exp(-cdist(pts, pts, "sqeuclidean") / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class HsicResult:
    statistic: float
    p_value: Optional[float] = None
    n_perm: int = 0


def as_points(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr.reshape(len(arr), -1)


def median_bandwidth(points: np.ndarray) -> float:
    pts = as_points(points)
    if len(pts) < 2:
        raise OutOfRange("Median heuristic needs at least 2 points")
    if len(pts) > MEDIAN_HEURISTIC_MAX_POINTS:
        keep = np.random.default_rng(_SUBSAMPLE_SEED).choice(len(pts), MEDIAN_HEURISTIC_MAX_POINTS, replace=False)
        pts = pts[np.sort(keep)]
    dists = pdist(pts)
    positive = dists[dists > 0]
    if len(positive) == 0:
        raise AllPointsIdentical("All points are identical, median bandwidth undefined")
    sigma = float(np.median(dists))
    return sigma if sigma > 0 else float(np.median(positive))


def default_kernel(points: np.ndarray) -> KernelSpec:
    """Median-heuristic kernel; identical points get σ=1 since centering zeroes them anyway."""
    try:
        return KernelSpec(median_bandwidth(points))
    except AllPointsIdentical:
        return KernelSpec(1.0)


def center(gram: np.ndarray) -> np.ndarray:
    """H K H via row, column and grand means."""
    return gram - gram.mean(axis=0, keepdims=True) - gram.mean(axis=1, keepdims=True) + gram.mean()


def _grams(xs, ys, spec_x: Optional[KernelSpec], spec_y: Optional[KernelSpec]) -> Tuple[np.ndarray, np.ndarray]:
    xs, ys = as_points(xs), as_points(ys)
    if len(xs) != len(ys):
        raise LengthMismatch(f"HSIC inputs differ in length: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise OutOfRange("HSIC needs at least 2 points")
    spec_x = spec_x or default_kernel(xs)
    spec_y = spec_y or default_kernel(ys)
    return center(spec_x.gram(xs)), center(spec_y.gram(ys))


def hsic_stat(xs: np.ndarray, ys: np.ndarray, spec_x: Optional[KernelSpec] = None, spec_y: Optional[KernelSpec] = None) -> float:
    """Biased V-statistic (1/n²) tr(K H L H)."""
    kc, lc = _grams(xs, ys, spec_x, spec_y)
    return float(np.sum(kc * lc)) / len(kc) ** 2


def permutation_test(
    xs: np.ndarray,
    ys: np.ndarray,
    spec_x: Optional[KernelSpec] = None,
    spec_y: Optional[KernelSpec] = None,
    n_perm: int = 199,
    seed: int = 0,
) -> HsicResult:
    if n_perm < 99:
        raise OutOfRange(f"Permutation test needs n_perm >= 99, got {n_perm}")
    kc, lc = _grams(xs, ys, spec_x, spec_y)
    n = len(kc)
    observed = float(np.sum(kc * lc)) / n**2

    exceed = 0
    for i in range(n_perm):
        perm = np.random.default_rng(mix_seed(seed, i)).permutation(n)
        permuted = float(np.sum(kc * lc[np.ix_(perm, perm)])) / n**2
        # relative slack so exact ties (e.g. constant ys) count as exceedances
        if permuted >= observed - 1e-12 * max(1.0, abs(observed)):
            exceed += 1
    return HsicResult(statistic=observed, p_value=(1 + exceed) / (1 + n_perm), n_perm=n_perm)


def hsic_grad_x(z: np.ndarray, s: np.ndarray, spec_z: KernelSpec, spec_s: KernelSpec) -> Tuple[float, np.ndarray]:
    """HSIC(z, s) and its gradient wrt z with both bandwidths held fixed."""
    z = as_points(z)
    n = len(z)
    k = spec_z.gram(z)
    lc = center(spec_s.gram(s))
    m = lc * k / n**2
    stat = float(np.sum(m))
    grad = -(2.0 / spec_z.sigma**2) * (m.sum(axis=1, keepdims=True) * z - m @ z)
    return stat, grad
