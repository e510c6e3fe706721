"""Ground truth for the simulation designs: analytic where closed-form, Monte Carlo otherwise."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import expit
from scipy.stats import norm

from ..bounds.estimators import PerPointNuisance
from ..bounds.fh import logsumexp_min, softplus_max
from ..config.constants import UnsupportedTarget
from .dgp import (
    BOUNDS_TREATMENT_NOISE_SD,
    INSTRUMENT_HALF_WIDTH,
    IV_TREATMENT_NOISE_SD,
    BoundsDgpSpec,
    BoundsVariant,
    DgpSpec,
    IvDgpSpec,
    IvOutcome,
    IvTreatment,
    SimulatedData,
    confounders_of,
)

_HERMITE_NODES, _HERMITE_WEIGHTS = hermegauss(40)
_HERMITE_WEIGHTS = _HERMITE_WEIGHTS / math.sqrt(2 * math.pi)
_LEGENDRE_NODES, _LEGENDRE_WEIGHTS = leggauss(64)


class OracleTarget(str, Enum):
    MARGINAL_CDF = "marginal_cdf"
    LOWER = "lower"
    UPPER = "upper"
    MARGINAL_LOWER = "marginal_lower"
    MARGINAL_UPPER = "marginal_upper"
    SMOOTH_UPPER = "smooth_upper"
    SMOOTH_LOWER = "smooth_lower"
    WIDTH_REDUCTION = "width_reduction"
    MARGIN_CURVE = "margin_curve"
    ATE = "ate"
    DOSE_CURVE = "dose_curve"


class OracleMethod(str, Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class OracleQuery:
    target: OracleTarget
    y1: float = 0.0
    y0: float = 0.0
    arm: int = 1
    dose: float = 0.0
    t: float = 50.0

    @property
    def label(self) -> str:
        return self.target.value


@dataclass(frozen=True)
class OracleTruth:
    target: str
    value: float
    mc_se: float
    method: OracleMethod
    n_mc: int = 0


def _analytic(query: OracleQuery, value: float) -> OracleTruth:
    return OracleTruth(target=query.label, value=float(value), mc_se=0.0, method=OracleMethod.ANALYTIC)


def _monte_carlo(query: OracleQuery, draws: np.ndarray) -> OracleTruth:
    n = len(draws)
    return OracleTruth(
        target=query.label,
        value=float(np.mean(draws)),
        mc_se=float(np.std(draws, ddof=1) / math.sqrt(n)),
        method=OracleMethod.MONTE_CARLO,
        n_mc=n,
    )


def conditional_cdf(spec: DgpSpec, arm: int, y: float, w: np.ndarray) -> np.ndarray:
    """θ_a(w) = P(Y(a) <= y | confounders w)."""
    return norm.cdf((y - spec.outcome_mean(arm, w)) / spec.noise_sd)


def oracle_propensity(spec: DgpSpec, w: np.ndarray) -> np.ndarray:
    """P(A=1 | confounders) by quadrature over the treatment noise (and the instrument)."""
    if isinstance(spec, BoundsDgpSpec):
        index = spec.treatment_index(w)
        return expit(index[:, None] + BOUNDS_TREATMENT_NOISE_SD * _HERMITE_NODES[None, :]) @ _HERMITE_WEIGHTS
    if spec.treatment != IvTreatment.BINARY:
        raise UnsupportedTarget("Propensity is only defined for binary treatments")
    z_c = np.asarray(w, dtype=np.float64).reshape(-1)
    s = INSTRUMENT_HALF_WIDTH * _LEGENDRE_NODES
    s_weights = _LEGENDRE_WEIGHTS / 2.0
    first = spec.first_stage(s[None, :], z_c[:, None])
    probs = expit(first[:, :, None] + IV_TREATMENT_NOISE_SD * _HERMITE_NODES[None, None, :])
    return np.einsum("isk,s,k->i", probs, s_weights, _HERMITE_WEIGHTS)


def analytic_marginal_cdf(spec: DgpSpec, arm: int, y: float) -> Optional[float]:
    """Closed-form F_{Y(a)}(y) for the linear-Gaussian designs."""
    if isinstance(spec, BoundsDgpSpec) and spec.variant == BoundsVariant.LINEAR:
        # X1 + 0.5 X2 + ε_Y ~ N(a, 1 + 0.25 + 1)
        return float(norm.cdf((y - arm) / math.sqrt(2.25)))
    if isinstance(spec, IvDgpSpec) and spec.outcome == IvOutcome.LINEAR:
        return float(norm.cdf((y - 1.0 - 2.0 * arm) / math.sqrt(9.0 + spec.noise_sd**2)))
    return None


def _theta_draws(spec: DgpSpec, query: OracleQuery, n_mc: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    w = spec.draw_confounders(np.random.default_rng(seed), n_mc)
    return conditional_cdf(spec, 1, query.y1, w), conditional_cdf(spec, 0, query.y0, w)


def _marginal_pair(spec: DgpSpec, query: OracleQuery, theta1: np.ndarray, theta0: np.ndarray):
    """Per-draw scores of F1 and F0; analytic margins give constant scores."""
    f1 = analytic_marginal_cdf(spec, 1, query.y1)
    f0 = analytic_marginal_cdf(spec, 0, query.y0)
    s1 = np.full_like(theta1, f1) if f1 is not None else theta1
    s0 = np.full_like(theta0, f0) if f0 is not None else theta0
    return s1, s0, f1 is not None and f0 is not None


def _marginal_bound_scores(s1: np.ndarray, s0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Delta-method scores of max(F1 + F0 - 1, 0) and min(F1, F0)."""
    f1, f0 = s1.mean(), s0.mean()
    lower = s1 + s0 - 1.0 if f1 + f0 - 1.0 > 0 else np.zeros_like(s1)
    upper = s1 if f1 < f0 else s0
    return lower, upper


def _ate(spec: DgpSpec) -> float:
    if isinstance(spec, BoundsDgpSpec):
        # E[cos 2X] = exp(-2), E[sin 2X] = 0 for X ~ N(0, 1)
        return 1.0 if spec.variant == BoundsVariant.LINEAR else math.exp(-2.0) + 0.5
    if spec.outcome == IvOutcome.LINEAR:
        return 2.0
    return 0.3 + 0.2 * (math.sin(2.5) - math.sin(0.5))


def dose_response(spec: IvDgpSpec, dose: float) -> float:
    """E[Y(a)]; E[Z_C] = 0 and E[σ(Z_C)] = 1/2 by symmetry."""
    if spec.outcome == IvOutcome.LINEAR:
        return 1.0 + 2.0 * dose
    return 2.0 + 0.3 * dose + 0.2 * math.sin(2 * dose + 0.5)


def oracle_truth(spec: DgpSpec, query: OracleQuery, n_mc: int, seed: int) -> OracleTruth:
    target = query.target
    if target == OracleTarget.ATE:
        return _analytic(query, _ate(spec))
    if target == OracleTarget.DOSE_CURVE:
        if not isinstance(spec, IvDgpSpec):
            raise UnsupportedTarget("Dose curves are only defined for the IV designs")
        return _analytic(query, dose_response(spec, query.dose))
    if isinstance(spec, IvDgpSpec) and spec.treatment == IvTreatment.CONTINUOUS:
        raise UnsupportedTarget(f"{target.value} needs a binary treatment design")

    if target == OracleTarget.MARGINAL_CDF:
        y = query.y1 if query.arm == 1 else query.y0
        analytic = analytic_marginal_cdf(spec, query.arm, y)
        if analytic is not None:
            return _analytic(query, analytic)
        w = spec.draw_confounders(np.random.default_rng(seed), n_mc)
        return _monte_carlo(query, conditional_cdf(spec, query.arm, y, w))

    theta1, theta0 = _theta_draws(spec, query, n_mc, seed)
    if target == OracleTarget.LOWER:
        return _monte_carlo(query, np.maximum(theta1 + theta0 - 1.0, 0.0))
    elif target == OracleTarget.UPPER:
        return _monte_carlo(query, np.minimum(theta1, theta0))
    elif target == OracleTarget.SMOOTH_UPPER:
        return _monte_carlo(query, logsumexp_min(theta0, theta1, query.t))
    elif target == OracleTarget.SMOOTH_LOWER:
        return _monte_carlo(query, softplus_max(theta0, theta1, query.t))
    elif target == OracleTarget.MARGIN_CURVE:
        return _monte_carlo(query, (np.abs(theta1 - theta0) <= query.t).astype(np.float64))

    s1, s0, analytic = _marginal_pair(spec, query, theta1, theta0)
    lower, upper = _marginal_bound_scores(s1, s0)
    if target in (OracleTarget.MARGINAL_LOWER, OracleTarget.MARGINAL_UPPER):
        scores = lower if target == OracleTarget.MARGINAL_LOWER else upper
        return _analytic(query, scores.mean()) if analytic else _monte_carlo(query, scores)
    elif target == OracleTarget.WIDTH_REDUCTION:
        conditional_width = np.minimum(theta1, theta0) - np.maximum(theta1 + theta0 - 1.0, 0.0)
        return _monte_carlo(query, (upper - lower) - conditional_width)
    raise UnsupportedTarget(f"Unsupported oracle target {target}")


def oracle_per_point(spec: DgpSpec, sim: SimulatedData, y1: float, y0: float) -> PerPointNuisance:
    """Exact θ_a and π for every simulated row at one threshold pair."""
    w = confounders_of(spec, sim)
    data = sim.dataset
    pi1 = oracle_propensity(spec, w)
    return PerPointNuisance(
        theta0=conditional_cdf(spec, 0, y0, w),
        theta1=conditional_cdf(spec, 1, y1, w),
        pi1=pi1,
        a=data.a,
        below0=(data.y <= y0).astype(np.float64),
        below1=(data.y <= y1).astype(np.float64),
        y1=y1,
        y0=y0,
    )
