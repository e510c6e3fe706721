import logging
from typing import Optional, Sequence

import numpy as np

from ..bounds.estimators import PerPointNuisance
from ..bounds.pipeline import BoundsResult, ThresholdPair, estimate_bounds, threshold_grid, threshold_pairs
from ..config.config import RunConfig
from ..config.constants import ArmMissing, OutOfRange
from ..data.dataset import Dataset
from ..nuisance.bundle import fit_bounds_nuisances
from .rotations import representation_passes


def run_tml_bounds(
    data: Dataset,
    cfg: RunConfig,
    seed: int,
    representation: Optional[np.ndarray] = None,
    pairs: Optional[Sequence[ThresholdPair]] = None,
) -> BoundsResult:
    """Conditional bounds with θ̂ and π̂ fitted on a learned latent score.

    Each rotation trains the representation, fits nuisances on its nuisance
    folds and fills the per-row nuisances of its evaluation folds. The bound
    estimators then run on all rows at once.
    """
    if not data.is_binary:
        raise OutOfRange("Bounds need a binary treatment")
    for arm in (0, 1):
        if not (data.a == arm).any():
            raise ArmMissing(f"No rows with A={arm}")

    pairs = tuple(pairs) if pairs is not None else threshold_pairs(data.y, cfg)
    grid = threshold_grid(pairs)
    theta0 = np.full((data.n, len(grid)), np.nan)
    theta1 = np.full((data.n, len(grid)), np.nan)
    pi1 = np.full(data.n, np.nan)

    for fit in representation_passes(data, cfg, seed, representation):
        rot = fit.rotation
        zdata = fit.covariates(data)
        bundle = fit_bounds_nuisances(zdata.subset(rot.nuisance), grid, cfg)
        assert bundle.cdf is not None and bundle.propensity is not None
        z_eval = zdata.x[rot.evaluation]
        theta0[rot.evaluation] = bundle.cdf.predict(z_eval, 0)
        theta1[rot.evaluation] = bundle.cdf.predict(z_eval, 1)
        pi1[rot.evaluation] = bundle.propensity.predict(z_eval)

    def per_point(pair: ThresholdPair) -> PerPointNuisance:
        y1, y0 = pair
        return PerPointNuisance(
            theta0=theta0[:, int(np.searchsorted(grid, y0))],
            theta1=theta1[:, int(np.searchsorted(grid, y1))],
            pi1=pi1,
            a=data.a,
            below0=(data.y <= y0).astype(np.float64),
            below1=(data.y <= y1).astype(np.float64),
            y1=y1,
            y0=y0,
        )

    logging.info(f"Bounds on learned representation: {len(pairs)} threshold pairs, {data.n} rows")
    return estimate_bounds(data, cfg, seed=seed, pairs=pairs, per_point=per_point)
