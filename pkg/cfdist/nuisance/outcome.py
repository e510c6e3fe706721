from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from sklearn.linear_model import Ridge

from ..config.config import RunConfig
from ..config.constants import ArmMissing, DegenerateDesign
from ..data.dataset import Dataset, TreatmentKind
from .features import FeatureMap, fit_feature_map


@dataclass(frozen=True, eq=False)
class LinearFit:
    coef: np.ndarray
    intercept: float

    def predict(self, design: np.ndarray) -> np.ndarray:
        return design @ self.coef + self.intercept if design.shape[1] else np.full(len(design), self.intercept)


@dataclass(frozen=True, eq=False)
class OutcomeMeanModel:
    """m(a, x) = E[Y | A=a, X=x].

    Binary treatments get one ridge fit per arm. Continuous doses get one joint
    fit on [φ(x), a, a², a·φ(x)] with the dose standardized on the training fold.
    """

    kind: TreatmentKind
    features: FeatureMap
    arms: Optional[Tuple[LinearFit, LinearFit]] = None
    joint: Optional[LinearFit] = None
    dose_center: float = 0.0
    dose_scale: float = 1.0

    def predict_arm(self, x: np.ndarray, arm: int) -> np.ndarray:
        if self.arms is None:
            return self.predict(x, float(arm))
        return self.arms[arm].predict(self.features.transform(x))

    def predict(self, x: np.ndarray, a: Union[float, np.ndarray]) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        a_arr = np.broadcast_to(np.asarray(a, dtype=np.float64), (len(x),))
        if self.arms is not None:
            phi = self.features.transform(x)
            return np.where(a_arr == 1.0, self.arms[1].predict(phi), self.arms[0].predict(phi))
        assert self.joint is not None
        return self.joint.predict(dose_design(self.features.transform(x), (a_arr - self.dose_center) / self.dose_scale))


def dose_design(phi: np.ndarray, a_std: np.ndarray) -> np.ndarray:
    a_col = a_std.reshape(-1, 1)
    return np.hstack([phi, a_col, a_col**2, a_col * phi])


def fit_ridge(design: np.ndarray, y: np.ndarray, penalty: float) -> LinearFit:
    if len(y) <= design.shape[1]:
        raise DegenerateDesign(f"Outcome regression needs more rows ({len(y)}) than features ({design.shape[1]})")
    if design.shape[1] == 0:
        return LinearFit(coef=np.zeros(0), intercept=float(y.mean()))
    fit = Ridge(alpha=penalty * len(y)).fit(design, y)
    return LinearFit(coef=np.asarray(fit.coef_, dtype=np.float64).copy(), intercept=float(fit.intercept_))


def fit_outcome_mean(train: Dataset, cfg: RunConfig) -> OutcomeMeanModel:
    features = fit_feature_map(train.x, cfg.feature_degree)
    phi = features.transform(train.x)

    if train.is_binary:
        arms = []
        for arm in (0, 1):
            mask = train.a == arm
            if not mask.any():
                raise ArmMissing(f"No training rows with A={arm}")
            arms.append(fit_ridge(phi[mask], train.y[mask], cfg.ridge_penalty))
        return OutcomeMeanModel(kind=TreatmentKind.BINARY, features=features, arms=(arms[0], arms[1]))

    center = float(train.a.mean())
    scale = float(train.a.std()) or 1.0
    design = dose_design(phi, (train.a - center) / scale)
    return OutcomeMeanModel(
        kind=TreatmentKind.CONTINUOUS,
        features=features,
        joint=fit_ridge(design, train.y, cfg.ridge_penalty),
        dose_center=center,
        dose_scale=scale,
    )
