import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from ..config.config import RunConfig
from ..config.constants import ArmMissing, NoConvergence, OutOfRange
from ..data.dataset import Dataset
from .features import FeatureMap, fit_feature_map


@dataclass(frozen=True, eq=False)
class PropensityModel:
    features: FeatureMap
    coef: np.ndarray
    intercept: float
    clip_eps: float
    converged: bool

    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        phi = self.features.transform(x)
        logits = phi @ self.coef + self.intercept
        return expit(logits)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Clipped P(A=1 | x)."""
        return np.clip(self.predict_raw(x), self.clip_eps, 1.0 - self.clip_eps)

    def predict_arm(self, x: np.ndarray, arm: int) -> np.ndarray:
        pi1 = self.predict(x)
        return pi1 if arm == 1 else 1.0 - pi1


def fit_propensity(train: Dataset, cfg: RunConfig) -> PropensityModel:
    if not train.is_binary:
        raise OutOfRange("Propensity model needs a binary treatment")
    for arm in (0, 1):
        if not (train.a == arm).any():
            raise ArmMissing(f"No training rows with A={arm}")

    features = fit_feature_map(train.x, cfg.feature_degree)
    phi = features.transform(train.x)
    labels = train.a.astype(np.int64)

    if phi.shape[1] == 0:
        mean = labels.mean()
        return PropensityModel(
            features=features, coef=np.zeros(0), intercept=float(np.log(mean / (1 - mean))), clip_eps=cfg.clip_eps, converged=True
        )

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        fit = LogisticRegression(C=cfg.logistic_c, tol=cfg.logistic_tol, max_iter=cfg.logistic_max_iter).fit(phi, labels)
    converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
    if not converged:
        warnings.warn(NoConvergence(f"Propensity fit hit max_iter={cfg.logistic_max_iter}, keeping last iterate"))

    return PropensityModel(features=features, coef=fit.coef_[0].copy(), intercept=float(fit.intercept_[0]), clip_eps=cfg.clip_eps, converged=converged)
