import logging
import warnings
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy.special import expit
from sklearn.exceptions import ConvergenceWarning
from sklearn.isotonic import isotonic_regression
from sklearn.linear_model import LogisticRegression

from ..config.config import RunConfig
from ..config.constants import ArmMissing, DegenerateDesign, NoConvergence, OutOfRange
from ..data.dataset import Dataset
from .features import FeatureMap, fit_feature_map


@dataclass(frozen=True, eq=False)
class ArmCdf:
    """Logistic fits of 1{Y <= y_g} for one arm, one row per grid threshold.

    Thresholds whose training labels are constant keep a fixed probability in
    `constant` (NaN marks a fitted threshold).
    """

    coef: np.ndarray  # (G, p)
    intercept: np.ndarray  # (G,)
    constant: np.ndarray  # (G,)
    converged: bool


@dataclass(frozen=True, eq=False)
class ConditionalCdfModel:
    grid: np.ndarray
    features: FeatureMap
    arms: Tuple[ArmCdf, ArmCdf]

    @property
    def converged(self) -> bool:
        return all(arm.converged for arm in self.arms)

    def predict(self, x: np.ndarray, arm: int) -> np.ndarray:
        """(n, G) matrix of θ̂_arm(x) at every grid threshold, monotone along the grid."""
        model = self.arms[arm]
        phi = self.features.transform(x)
        probs = expit(phi @ model.coef.T + model.intercept) if phi.shape[1] else np.tile(expit(model.intercept), (len(phi), 1))
        fixed = ~np.isnan(model.constant)
        probs[:, fixed] = model.constant[fixed]
        return monotone_rows(np.clip(probs, 0.0, 1.0))

    def grid_index(self, y: float) -> int:
        idx = int(np.searchsorted(self.grid, y))
        if idx >= len(self.grid) or self.grid[idx] != y:
            raise OutOfRange(f"Threshold {y} is not on the fitted grid")
        return idx

    def predict_at(self, x: np.ndarray, arm: int, y: float) -> np.ndarray:
        return self.predict(x, arm)[:, self.grid_index(y)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.tolist(),
            "degree": self.features.degree,
            "arms": [{"coef": a.coef.tolist(), "intercept": a.intercept.tolist(), "converged": a.converged} for a in self.arms],
        }


def monotone_rows(probs: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators along the threshold axis, only on rows that need it."""
    if probs.shape[1] < 2:
        return probs
    bad = np.flatnonzero((np.diff(probs, axis=1) < 0).any(axis=1))
    for i in bad:
        probs[i] = isotonic_regression(probs[i], y_min=0.0, y_max=1.0, increasing=True)
    return probs


def _fit_arm(phi: np.ndarray, y: np.ndarray, grid: np.ndarray, cfg: RunConfig) -> ArmCdf:
    p = phi.shape[1]
    coef = np.zeros((len(grid), p))
    intercept = np.zeros(len(grid))
    constant = np.full(len(grid), np.nan)
    converged = True

    for g, threshold in enumerate(grid):
        labels = (y <= threshold).astype(np.int64)
        mean = labels.mean()
        if mean in (0.0, 1.0):
            constant[g] = mean
        elif p == 0:
            # intercept-only logistic MLE is the empirical proportion
            constant[g] = mean
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ConvergenceWarning)
                fit = LogisticRegression(C=cfg.logistic_c, tol=cfg.logistic_tol, max_iter=cfg.logistic_max_iter).fit(phi, labels)
            if any(issubclass(w.category, ConvergenceWarning) for w in caught):
                converged = False
            coef[g] = fit.coef_[0]
            intercept[g] = fit.intercept_[0]

    return ArmCdf(coef=coef, intercept=intercept, constant=constant, converged=converged)


def fit_conditional_cdf(train: Dataset, grid: Sequence[float], cfg: RunConfig) -> ConditionalCdfModel:
    grid_arr = np.asarray(grid, dtype=np.float64)
    if grid_arr.ndim != 1 or len(grid_arr) == 0 or np.any(np.diff(grid_arr) <= 0):
        raise OutOfRange("Threshold grid must be nonempty and strictly increasing")

    features = fit_feature_map(train.x, cfg.feature_degree)
    phi_all = features.transform(train.x)
    if phi_all.shape[1] and not np.any(phi_all):
        raise DegenerateDesign("Conditional CDF feature matrix has rank 0")

    arms = []
    for arm in (0, 1):
        mask = train.a == arm
        if not mask.any():
            raise ArmMissing(f"No training rows with A={arm}")
        arms.append(_fit_arm(phi_all[mask], train.y[mask], grid_arr, cfg))

    model = ConditionalCdfModel(grid=grid_arr, features=features, arms=(arms[0], arms[1]))
    if not model.converged:
        warnings.warn(NoConvergence(f"Conditional CDF logistic fits hit max_iter={cfg.logistic_max_iter}"))
    logging.debug(f"Fitted conditional CDF on {train.n} rows over {len(grid_arr)} thresholds")
    return model
