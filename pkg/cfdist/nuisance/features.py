from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.preprocessing import PolynomialFeatures, StandardScaler


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Standardize-then-polynomial expansion, fitted on one training fold.

    Degree 0 (or no input columns) yields an empty feature matrix, which the
    learners treat as intercept-only.
    """

    degree: int
    scaler: Optional[StandardScaler]
    poly: Optional[PolynomialFeatures]

    @property
    def n_outputs(self) -> int:
        return 0 if self.poly is None else int(self.poly.n_output_features_)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        x = x.reshape(len(x), -1)
        if self.poly is None or self.scaler is None:
            return np.zeros((len(x), 0))
        return self.poly.transform(self.scaler.transform(x))


def fit_feature_map(x: np.ndarray, degree: int) -> FeatureMap:
    x = np.asarray(x, dtype=np.float64)
    x = x.reshape(len(x), -1)
    if degree == 0 or x.shape[1] == 0:
        return FeatureMap(degree=degree, scaler=None, poly=None)
    scaler = StandardScaler().fit(x)
    poly = PolynomialFeatures(degree=degree, include_bias=False).fit(scaler.transform(x))
    return FeatureMap(degree=degree, scaler=scaler, poly=poly)
