from dataclasses import dataclass
from typing import Optional, Sequence

from ..config.config import RunConfig
from ..data.dataset import Dataset
from .cdf import ConditionalCdfModel, fit_conditional_cdf
from .gps import GpsModel, fit_gps
from .outcome import OutcomeMeanModel, fit_outcome_mean
from .propensity import PropensityModel, fit_propensity


@dataclass(frozen=True, eq=False)
class NuisanceBundle:
    """Nuisance models fitted on one cross-fitting fold."""

    cdf: Optional[ConditionalCdfModel] = None
    propensity: Optional[PropensityModel] = None
    outcome: Optional[OutcomeMeanModel] = None
    gps: Optional[GpsModel] = None


def fit_bounds_nuisances(train: Dataset, grid: Sequence[float], cfg: RunConfig) -> NuisanceBundle:
    return NuisanceBundle(cdf=fit_conditional_cdf(train, grid, cfg), propensity=fit_propensity(train, cfg))


def fit_mean_nuisances(train: Dataset, cfg: RunConfig) -> NuisanceBundle:
    if train.is_binary:
        return NuisanceBundle(outcome=fit_outcome_mean(train, cfg), propensity=fit_propensity(train, cfg))
    return NuisanceBundle(outcome=fit_outcome_mean(train, cfg), gps=fit_gps(train, cfg))
