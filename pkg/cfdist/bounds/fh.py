"""Pointwise Frechet-Hoeffding limits and their smooth surrogates."""

from typing import Tuple, Union

import numpy as np
from scipy.special import expit

from ..config.constants import OutOfRange

ArrayLike = Union[float, np.ndarray]


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def fh_pointwise(u1: ArrayLike, u0: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    u1_arr, u0_arr = np.asarray(u1, dtype=np.float64), np.asarray(u0, dtype=np.float64)
    if np.any((u1_arr < 0) | (u1_arr > 1) | (u0_arr < 0) | (u0_arr > 1)) or np.any(np.isnan(u1_arr) | np.isnan(u0_arr)):
        raise OutOfRange("Marginal probabilities must lie in [0, 1]")
    lower = np.maximum(u1_arr + u0_arr - 1.0, 0.0)
    upper = np.minimum(u1_arr, u0_arr)
    return _scalar_or_array(lower), _scalar_or_array(upper)


def logsumexp_min(u: ArrayLike, v: ArrayLike, t: float) -> ArrayLike:
    """g_t(u, v) = -(1/t) log(exp(-tu) + exp(-tv)), with exp(-t min(u, v)) factored out."""
    u_arr, v_arr = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    return _scalar_or_array(np.minimum(u_arr, v_arr) - np.log1p(np.exp(-t * np.abs(u_arr - v_arr))) / t)


def smooth_min_weights(theta0: np.ndarray, theta1: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Softmax weights (w0, w1) of exp(-t θ_a); w1 = expit(t (θ0 - θ1))."""
    w1 = expit(t * (np.asarray(theta0) - np.asarray(theta1)))
    return 1.0 - w1, w1


def softplus_max(theta0: ArrayLike, theta1: ArrayLike, t: float) -> ArrayLike:
    """Smooth max(θ0 + θ1 - 1, 0) = (1/t) log(1 + exp(t S))."""
    s = np.asarray(theta0, dtype=np.float64) + np.asarray(theta1, dtype=np.float64) - 1.0
    return _scalar_or_array(np.logaddexp(0.0, t * s) / t)


def softplus_weight(theta0: ArrayLike, theta1: ArrayLike, t: float) -> ArrayLike:
    s = np.asarray(theta0, dtype=np.float64) + np.asarray(theta1, dtype=np.float64) - 1.0
    return _scalar_or_array(expit(t * s))
