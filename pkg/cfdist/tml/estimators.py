"""Per-row scores for the mean, ATE and dose-response estimators."""

from typing import Tuple

import numpy as np
from scipy.stats import norm

from ..config.constants import KERNEL_SUPPORT_BANDWIDTHS, EmptyEvaluationSet, ZeroKernelMass


def summarize(scores: np.ndarray) -> Tuple[float, float]:
    """Mean and se = sqrt(Pn[(φ - mean)²] / n)."""
    n = len(scores)
    if n == 0:
        raise EmptyEvaluationSet("No evaluation rows")
    value = float(np.mean(scores))
    return value, float(np.sqrt(np.mean((scores - value) ** 2) / n))


def or_scores(m_a: np.ndarray) -> np.ndarray:
    return np.asarray(m_a, dtype=np.float64)


def ipw_scores(treated: np.ndarray, y: np.ndarray, pi_a: np.ndarray) -> np.ndarray:
    return treated * y / pi_a


def dr_scores(m_a: np.ndarray, treated: np.ndarray, y: np.ndarray, pi_a: np.ndarray) -> np.ndarray:
    return m_a + treated / pi_a * (y - m_a)


def gaussian_kernel(u: np.ndarray, h: float) -> np.ndarray:
    return norm.pdf(u / h) / h


def kernel_weights(a_obs: np.ndarray, dose: float, h: float) -> np.ndarray:
    """K_h(A_i - a), failing when no observation lies within the kernel support."""
    if not np.any(np.abs(a_obs - dose) <= KERNEL_SUPPORT_BANDWIDTHS * h):
        raise ZeroKernelMass(f"No observed dose within {KERNEL_SUPPORT_BANDWIDTHS:g} bandwidths of {dose:g}")
    return gaussian_kernel(a_obs - dose, h)


def gps_ipw_estimate(k: np.ndarray, y: np.ndarray, r_obs: np.ndarray) -> Tuple[float, float]:
    """Normalized ratio estimator with a linearized se."""
    w = k / r_obs
    total = float(np.sum(w))
    if total <= 0:
        raise ZeroKernelMass("Kernel weights sum to zero")
    value = float(np.sum(w * y)) / total
    psi = w * (y - value) / np.mean(w)
    return value, float(np.sqrt(np.mean(psi**2) / len(y)))


def dr_density_scores(m_grid: np.ndarray, m_obs: np.ndarray, y: np.ndarray, r_grid: np.ndarray, r_obs: np.ndarray, clip_eps: float) -> np.ndarray:
    ratio = np.minimum(r_grid / r_obs, 1.0 / clip_eps)
    return m_grid + ratio * (y - m_obs)


def dr_kernel_scores(m_grid: np.ndarray, m_obs: np.ndarray, y: np.ndarray, k: np.ndarray) -> np.ndarray:
    w = k / np.sum(k)
    return m_grid + len(y) * w * (y - m_obs)
