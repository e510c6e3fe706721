import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.stats import norm

from ..config.config import RunConfig
from ..config.constants import GPS_FLOOR_MAX_POINTS, SILVERMAN_FACTOR, OutOfRange, ZeroVariance
from ..data.dataset import Dataset
from .features import FeatureMap, fit_feature_map
from .outcome import LinearFit, fit_ridge

_CHUNK = 512


def silverman_bandwidth(sd: float, n: int) -> float:
    return SILVERMAN_FACTOR * sd * n ** (-1.0 / 5.0)


@dataclass(frozen=True, eq=False)
class GpsModel:
    """Generalized propensity density r(a | z) from a KDE on dose residuals."""

    features: FeatureMap
    dose_mean: LinearFit
    residuals: np.ndarray
    bandwidth: float
    floor: float

    def mean_dose(self, z: np.ndarray) -> np.ndarray:
        return self.dose_mean.predict(self.features.transform(z))

    def density(self, a: Union[float, np.ndarray], z: np.ndarray, trim: bool = True) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        e = np.broadcast_to(np.asarray(a, dtype=np.float64), (len(z),)) - self.mean_dose(z)
        out = np.empty(len(e))
        for start in range(0, len(e), _CHUNK):
            block = e[start : start + _CHUNK, None] - self.residuals[None, :]
            out[start : start + _CHUNK] = norm.pdf(block / self.bandwidth).mean(axis=1) / self.bandwidth
        return np.maximum(out, self.floor) if trim else out


def eval_gps(model: GpsModel, a: Union[float, np.ndarray], z: np.ndarray) -> np.ndarray:
    return model.density(a, z)


def fit_gps(train: Dataset, cfg: RunConfig) -> GpsModel:
    if train.is_binary:
        raise OutOfRange("GPS needs a continuous treatment")
    sd = float(np.std(train.a, ddof=1))
    if sd == 0.0:
        raise ZeroVariance("Dose has zero variance, GPS bandwidth undefined")

    features = fit_feature_map(train.x, cfg.feature_degree)
    dose_mean = fit_ridge(features.transform(train.x), train.a, cfg.ridge_penalty)
    residuals = train.a - dose_mean.predict(features.transform(train.x))
    h = silverman_bandwidth(sd, train.n)

    model = GpsModel(features=features, dose_mean=dose_mean, residuals=residuals, bandwidth=h, floor=0.0)
    if cfg.gps_trim_quantile == 0.0:
        return model

    rows = np.unique(np.linspace(0, train.n - 1, min(train.n, GPS_FLOOR_MAX_POINTS)).astype(np.int64))
    in_sample = model.density(train.a[rows], train.x[rows], trim=False)
    floor = float(np.quantile(in_sample, cfg.gps_trim_quantile))
    # the floor must stay strictly positive so ratios stay finite
    floor = max(floor, math.ulp(1.0))
    return GpsModel(features=features, dose_mean=dose_mean, residuals=residuals, bandwidth=h, floor=floor)
