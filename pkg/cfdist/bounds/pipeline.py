import logging
from dataclasses import dataclass
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config.config import RunConfig
from ..config.constants import DR_DIRECT, DR_SMOOTH, DR_SMOOTH_LOWER, MARGINAL, PLUGIN, ArmMissing, OutOfRange
from ..data.dataset import Dataset
from ..data.folds import FoldMode, make_folds
from ..nuisance.bundle import fit_bounds_nuisances
from .estimators import (
    BoundEstimate,
    MarginProfile,
    PerPointNuisance,
    dr_direct_upper,
    dr_smooth_lower,
    dr_smooth_upper,
    margin_profile,
    marginal_bounds,
    plugin_bounds,
)

ThresholdPair = Tuple[float, float]
PerPointFn = Callable[[ThresholdPair], PerPointNuisance]


@dataclass(frozen=True)
class BoundsResult:
    estimates: Tuple[BoundEstimate, ...]
    margins: Dict[ThresholdPair, MarginProfile]
    pairs: Tuple[ThresholdPair, ...]

    def select(self, kind) -> List[BoundEstimate]:
        return [e for e in self.estimates if e.kind == kind]


def threshold_pairs(y: np.ndarray, cfg: RunConfig) -> Tuple[ThresholdPair, ...]:
    """Explicit (y1, y0) pairs from config, otherwise the outcome-quantile product grid."""
    if cfg.thresholds is not None:
        return tuple((float(a), float(b)) for a, b in cfg.thresholds)
    qs = np.quantile(y, cfg.threshold_quantiles)
    return tuple((float(y1), float(y0)) for y1, y0 in product(qs, qs))


def threshold_grid(pairs: Sequence[ThresholdPair]) -> np.ndarray:
    return np.unique(np.asarray([v for pair in pairs for v in pair], dtype=np.float64))


def cross_fit_per_point(data: Dataset, pairs: Sequence[ThresholdPair], cfg: RunConfig, seed: int) -> Dict[ThresholdPair, PerPointNuisance]:
    """Out-of-fold θ̂_0, θ̂_1, π̂_1 for every row, gathered per threshold pair."""
    if not data.is_binary:
        raise OutOfRange("Bounds need a binary treatment")
    for arm in (0, 1):
        if not (data.a == arm).any():
            raise ArmMissing(f"No rows with A={arm}")

    grid = threshold_grid(pairs)
    plan = make_folds(data.n, cfg.bounds_folds, FoldMode.DOUBLE, seed)
    theta0 = np.empty((data.n, len(grid)))
    theta1 = np.empty((data.n, len(grid)))
    pi1 = np.empty(data.n)

    for rotation in plan.rotations:
        bundle = fit_bounds_nuisances(data.subset(rotation.nuisance), grid, cfg)
        assert bundle.cdf is not None and bundle.propensity is not None
        x_eval = data.x[rotation.evaluation]
        theta0[rotation.evaluation] = bundle.cdf.predict(x_eval, 0)
        theta1[rotation.evaluation] = bundle.cdf.predict(x_eval, 1)
        pi1[rotation.evaluation] = bundle.propensity.predict(x_eval)
        logging.debug(f"Bounds fold {rotation.index}: fitted on {len(rotation.nuisance)} rows, evaluated {len(rotation.evaluation)}")

    out = {}
    for y1, y0 in pairs:
        i1, i0 = int(np.searchsorted(grid, y1)), int(np.searchsorted(grid, y0))
        out[(y1, y0)] = PerPointNuisance(
            theta0=theta0[:, i0],
            theta1=theta1[:, i1],
            pi1=pi1,
            a=data.a,
            below0=(data.y <= y0).astype(np.float64),
            below1=(data.y <= y1).astype(np.float64),
            y1=y1,
            y0=y0,
        )
    return out


def bounds_from_rows(rows: PerPointNuisance, cfg: RunConfig, estimators: Optional[Sequence[str]] = None) -> List[BoundEstimate]:
    wanted = set(cfg.estimators if estimators is None else estimators)
    out: List[BoundEstimate] = []
    if MARGINAL in wanted:
        out.extend(marginal_bounds(rows))
    if PLUGIN in wanted:
        out.extend(plugin_bounds(rows))
    if DR_DIRECT in wanted:
        out.append(dr_direct_upper(rows))
    if DR_SMOOTH in wanted:
        out.append(dr_smooth_upper(rows, cfg.smoothing_t))
    if DR_SMOOTH_LOWER in wanted:
        out.append(dr_smooth_lower(rows, cfg.smoothing_t))
    return out


def estimate_bounds(
    data: Dataset,
    cfg: RunConfig,
    seed: Optional[int] = None,
    pairs: Optional[Sequence[ThresholdPair]] = None,
    per_point: Optional[PerPointFn] = None,
    margin_grid: Sequence[float] = (0.01, 0.05, 0.1, 0.2),
) -> BoundsResult:
    """Cross-fitted conditional and marginal bounds over a (y1, y0) grid.

    `per_point` replaces the learned nuisances, e.g. with oracle ones.
    """
    pairs = tuple(pairs) if pairs is not None else threshold_pairs(data.y, cfg)
    seed = cfg.seed if seed is None else seed
    if per_point is None:
        fitted = cross_fit_per_point(data, pairs, cfg, seed)
        per_point = fitted.__getitem__

    estimates: List[BoundEstimate] = []
    margins = {}
    for pair in pairs:
        rows = per_point(pair)
        estimates.extend(bounds_from_rows(rows, cfg))
        margins[pair] = margin_profile(rows, margin_grid)
    logging.info(f"Estimated bounds at {len(pairs)} threshold pairs on {data.n} rows")
    return BoundsResult(estimates=tuple(estimates), margins=margins, pairs=pairs)
