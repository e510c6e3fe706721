import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from ..config.constants import CI_LEVEL, EmptyEvaluationSet, LengthMismatch, OutOfRange
from .fh import logsumexp_min, smooth_min_weights, softplus_max, softplus_weight

Z_CRIT = float(norm.ppf(0.5 + CI_LEVEL / 2))


class BoundKind(str, Enum):
    MARGINAL_L = "marginal_l"
    MARGINAL_U = "marginal_u"
    PLUGIN_L = "plugin_l"
    PLUGIN_U = "plugin_u"
    DR_DIRECT_U = "dr_direct_u"
    DR_SMOOTH_U = "dr_smooth_u"
    DR_SMOOTH_L = "dr_smooth_l"

    @property
    def is_lower(self) -> bool:
        return self.value.endswith("_l")


@dataclass(frozen=True, eq=False)
class PerPointNuisance:
    """Per evaluation row nuisances at one threshold pair (y1, y0)."""

    theta0: np.ndarray
    theta1: np.ndarray
    pi1: np.ndarray
    a: np.ndarray
    below0: np.ndarray
    below1: np.ndarray
    y1: float = float("nan")
    y0: float = float("nan")

    def __post_init__(self):
        arrays = {name: np.asarray(getattr(self, name), dtype=np.float64).ravel() for name in ("theta0", "theta1", "pi1", "a", "below0", "below1")}
        lengths = {len(v) for v in arrays.values()}
        if len(lengths) != 1:
            raise LengthMismatch(f"Per-row nuisance arrays differ in length: { {k: len(v) for k, v in arrays.items()} }")
        for name, value in arrays.items():
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def pi0(self) -> np.ndarray:
        return 1.0 - self.pi1

    def residual(self, arm: int) -> np.ndarray:
        """1{A=a}/π_a · (1{Y<=y_a} - θ_a)."""
        if arm == 1:
            return (self.a == 1) / self.pi1 * (self.below1 - self.theta1)
        return (self.a == 0) / self.pi0 * (self.below0 - self.theta0)

    def require_rows(self) -> None:
        if self.n == 0:
            raise EmptyEvaluationSet("No evaluation rows")


@dataclass(frozen=True)
class BoundEstimate:
    value: float
    raw: float
    se: float
    ci_lo: float
    ci_hi: float
    kind: BoundKind
    n: int
    t: Optional[float] = None
    y1: float = float("nan")
    y0: float = float("nan")

    @classmethod
    def from_value(cls, raw: float, se: float, kind: BoundKind, n: int, t: Optional[float], y1: float, y0: float) -> "BoundEstimate":
        # report truncated to [0, 1], raw kept for bias studies
        lo, hi = raw - Z_CRIT * se, raw + Z_CRIT * se
        return cls(
            value=float(np.clip(raw, 0.0, 1.0)),
            raw=float(raw),
            se=float(se),
            ci_lo=float(np.clip(lo, 0.0, 1.0)),
            ci_hi=float(np.clip(hi, 0.0, 1.0)),
            kind=kind,
            n=n,
            t=t,
            y1=y1,
            y0=y0,
        )

    @classmethod
    def from_scores(cls, scores: np.ndarray, kind: BoundKind, t: Optional[float] = None, y1: float = float("nan"), y0: float = float("nan")) -> "BoundEstimate":
        """Mean of per-row influence scores; se² = Pn[(φ - Ψ)²] / n."""
        n = len(scores)
        if n == 0:
            raise EmptyEvaluationSet(f"No evaluation rows for {kind.value}")
        raw = float(np.mean(scores))
        se = float(np.sqrt(np.mean((scores - raw) ** 2) / n))
        return cls.from_value(raw, se, kind, n, t, y1, y0)

    def to_record(self) -> Dict[str, Any]:
        return {
            "y1": self.y1,
            "y0": self.y0,
            "kind": self.kind.value,
            "value": self.value,
            "raw": self.raw,
            "se": self.se,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "t": self.t,
        }


def plugin_bounds(rows: PerPointNuisance) -> Tuple[BoundEstimate, BoundEstimate]:
    """Means of the pointwise FH limits of θ̂. The se is the naive SD/√n."""
    rows.require_rows()
    lower = np.maximum(rows.theta1 + rows.theta0 - 1.0, 0.0)
    upper = np.minimum(rows.theta1, rows.theta0)
    n = rows.n
    sd = lambda v: float(np.std(v, ddof=1)) if n > 1 else 0.0
    return (
        BoundEstimate.from_value(float(lower.mean()), sd(lower) / np.sqrt(n), BoundKind.PLUGIN_L, n, None, rows.y1, rows.y0),
        BoundEstimate.from_value(float(upper.mean()), sd(upper) / np.sqrt(n), BoundKind.PLUGIN_U, n, None, rows.y1, rows.y0),
    )


def dr_direct_scores(rows: PerPointNuisance) -> np.ndarray:
    # selector d(x) = argmin_a θ_a(x), ties go to a=0
    pick1 = rows.theta1 < rows.theta0
    return np.where(pick1, rows.theta1 + rows.residual(1), rows.theta0 + rows.residual(0))


def dr_direct_upper(rows: PerPointNuisance) -> BoundEstimate:
    rows.require_rows()
    return BoundEstimate.from_scores(dr_direct_scores(rows), BoundKind.DR_DIRECT_U, None, rows.y1, rows.y0)


def _check_t(t: float) -> None:
    if not t > 0:
        raise OutOfRange(f"Smoothing parameter t must be positive, got {t}")


def dr_smooth_upper_scores(rows: PerPointNuisance, t: float) -> np.ndarray:
    w0, w1 = smooth_min_weights(rows.theta0, rows.theta1, t)
    return w0 * rows.residual(0) + w1 * rows.residual(1) + logsumexp_min(rows.theta0, rows.theta1, t)


def dr_smooth_upper(rows: PerPointNuisance, t: float) -> BoundEstimate:
    _check_t(t)
    rows.require_rows()
    return BoundEstimate.from_scores(dr_smooth_upper_scores(rows, t), BoundKind.DR_SMOOTH_U, t, rows.y1, rows.y0)


def dr_smooth_lower_scores(rows: PerPointNuisance, t: float) -> np.ndarray:
    w = softplus_weight(rows.theta0, rows.theta1, t)
    return w * (rows.residual(0) + rows.residual(1)) + softplus_max(rows.theta0, rows.theta1, t)


def dr_smooth_lower(rows: PerPointNuisance, t: float) -> BoundEstimate:
    _check_t(t)
    rows.require_rows()
    return BoundEstimate.from_scores(dr_smooth_lower_scores(rows, t), BoundKind.DR_SMOOTH_L, t, rows.y1, rows.y0)


def marginal_cdf_scores(rows: PerPointNuisance, arm: int) -> np.ndarray:
    """Doubly robust scores of F_{Y(a)}(y_a)."""
    theta = rows.theta1 if arm == 1 else rows.theta0
    return theta + rows.residual(arm)


def marginal_bounds(rows: PerPointNuisance) -> Tuple[BoundEstimate, BoundEstimate]:
    """Marginal FH bounds from doubly robust marginal CDFs, se by the delta method on the active branch."""
    rows.require_rows()
    phi1, phi0 = marginal_cdf_scores(rows, 1), marginal_cdf_scores(rows, 0)
    f1, f0 = float(phi1.mean()), float(phi0.mean())

    upper_scores = phi1 if f1 < f0 else phi0
    if f1 + f0 - 1.0 > 0.0:
        lower = BoundEstimate.from_scores(phi1 + phi0 - 1.0, BoundKind.MARGINAL_L, None, rows.y1, rows.y0)
    else:
        lower = BoundEstimate.from_value(0.0, 0.0, BoundKind.MARGINAL_L, rows.n, None, rows.y1, rows.y0)
    return lower, BoundEstimate.from_scores(upper_scores, BoundKind.MARGINAL_U, None, rows.y1, rows.y0)


@dataclass(frozen=True)
class MarginProfile:
    """Empirical P(|θ1 - θ0| <= t) over a grid, plus the share of rows whose selector flips under ±eps."""

    t_grid: Tuple[float, ...]
    curve: Tuple[float, ...]
    flip_fraction: float
    eps: float
    n: int = field(default=0)


def margin_profile(rows: PerPointNuisance, t_grid: Sequence[float], eps: float = 0.01) -> MarginProfile:
    rows.require_rows()
    grid = np.asarray(t_grid, dtype=np.float64)
    if np.any(np.diff(grid) < 0):
        raise OutOfRange("t_grid must be sorted")
    gap = np.abs(rows.theta1 - rows.theta0)
    curve = (gap[None, :] <= grid[:, None]).mean(axis=1)
    flip = float(np.mean(gap <= 2 * eps))
    return MarginProfile(t_grid=tuple(grid.tolist()), curve=tuple(curve.tolist()), flip_fraction=flip, eps=eps, n=rows.n)


def width_reduction(marginal: Tuple[float, float], conditional: Tuple[float, float]) -> float:
    (lm, um), (lc, uc) = marginal, conditional
    reduction = (um - lm) - (uc - lc)
    if reduction < 0:
        logging.debug(f"Negative width reduction {reduction:.4g}: conditional bounds wider than marginal")
    return float(reduction)
