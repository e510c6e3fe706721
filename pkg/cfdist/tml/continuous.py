import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config.config import RunConfig
from ..config.constants import DR_DENSITY, DR_KERNEL, GPS_IPW, OR, OutOfRange
from ..data.dataset import Dataset
from ..nuisance.bundle import fit_mean_nuisances
from ..nuisance.gps import silverman_bandwidth
from .estimators import dr_density_scores, dr_kernel_scores, gps_ipw_estimate, kernel_weights, or_scores, summarize
from .rotations import representation_passes
from .types import DoseGrid, Target, TmlEstimate, TmlRun, pool_rotations

GPS_ESTIMATORS = (GPS_IPW, DR_DENSITY, DR_KERNEL)


def make_dose_grid(a: np.ndarray, cfg: RunConfig) -> DoseGrid:
    """Configured doses, or equally spaced points between the configured dose quantiles."""
    h = silverman_bandwidth(float(np.std(a, ddof=1)), len(a))
    if cfg.dose_grid is not None:
        doses = np.asarray(cfg.dose_grid, dtype=np.float64)
    else:
        lo, hi = np.quantile(a, cfg.dose_quantile_range)
        doses = np.linspace(lo, hi, cfg.dose_grid_points)
    if doses.min() < a.min() - h or doses.max() > a.max() + h:
        raise OutOfRange(f"Dose grid [{doses.min():g}, {doses.max():g}] leaves the observed range widened by one bandwidth")
    return DoseGrid(doses=tuple(doses.tolist()), bandwidth=h)


def _dose_estimates(
    estimator: str, dose: float, h: float, m_grid: np.ndarray, m_obs: np.ndarray, y: np.ndarray, a: np.ndarray, r_grid, r_obs, clip_eps: float
) -> Tuple[float, float]:
    if estimator == OR:
        return summarize(or_scores(m_grid))
    k = kernel_weights(a, dose, h)
    if estimator == GPS_IPW:
        return gps_ipw_estimate(k, y, r_obs)
    elif estimator == DR_DENSITY:
        return summarize(dr_density_scores(m_grid, m_obs, y, r_grid, r_obs, clip_eps))
    return summarize(dr_kernel_scores(m_grid, m_obs, y, k))


def run_tml_continuous(
    data: Dataset, cfg: RunConfig, seed: int, grid: Optional[DoseGrid] = None, representation: Optional[np.ndarray] = None
) -> TmlRun:
    """OR, GPS-IPW, DR-density and DR-kernel dose-response curves by triple cross-fitting.

    Data whose doses are all 0/1 keep per-arm outcome models and skip the
    GPS-based estimators.
    """
    grid = grid or make_dose_grid(data.a, cfg)
    doses = np.asarray(grid.doses)
    estimators = [e for e in (OR,) + GPS_ESTIMATORS if cfg.wants(e)]
    if data.is_binary and any(e in GPS_ESTIMATORS for e in estimators):
        logging.warning("Doses are all 0/1, skipping GPS-based dose estimators")
        estimators = [e for e in estimators if e not in GPS_ESTIMATORS]

    per_rotation: Dict[str, List[Tuple[np.ndarray, np.ndarray]]] = defaultdict(list)
    latent: Optional[np.ndarray] = None
    logs = []

    for fit in representation_passes(data, cfg, seed, representation):
        rot = fit.rotation
        zdata = fit.covariates(data)
        bundle = fit_mean_nuisances(zdata.subset(rot.nuisance), cfg)
        assert bundle.outcome is not None

        ev = zdata.subset(rot.evaluation)
        if latent is None:
            latent = np.full((data.n, ev.x.shape[1]), np.nan)
        latent[rot.evaluation] = ev.x
        if fit.log is not None:
            logs.append(fit.log)

        m_obs = bundle.outcome.predict(ev.x, ev.a)
        r_obs = bundle.gps.density(ev.a, ev.x) if bundle.gps is not None else None
        curves = {e: (np.empty(len(doses)), np.empty(len(doses))) for e in estimators}
        for j, dose in enumerate(doses):
            m_grid = bundle.outcome.predict(ev.x, dose)
            r_grid = bundle.gps.density(dose, ev.x) if bundle.gps is not None else None
            for estimator in estimators:
                value, se = _dose_estimates(estimator, dose, grid.bandwidth, m_grid, m_obs, ev.y, ev.a, r_grid, r_obs, cfg.clip_eps)
                curves[estimator][0][j], curves[estimator][1][j] = value, se
        for estimator, curve in curves.items():
            per_rotation[estimator].append(curve)
        logging.debug(f"Rotation {rot.index}: dose curves on {len(rot.evaluation)} rows over {len(doses)} doses")

    estimates = []
    for estimator in estimators:
        curves = per_rotation[estimator]
        values, ses = pool_rotations([v for v, _ in curves], [s for _, s in curves])
        estimates.append(
            TmlEstimate(
                target=Target.dose_curve(), estimator=estimator, values=values, ses=ses, per_rotation=tuple(v for v, _ in curves), doses=doses
            )
        )
    return TmlRun(estimates=tuple(estimates), latent=latent, logs=tuple(logs))


def continuous_ate(run: TmlRun, a: float = 1.0, a_ref: float = 0.0) -> List[TmlEstimate]:
    """E[Y(a)] - E[Y(a_ref)] from dose curves that contain both doses.

    The se treats the two curve points as independent.
    """
    out = []
    for e in run.estimates:
        if e.doses is None:
            continue
        hit = {d: np.flatnonzero(np.isclose(e.doses, d)) for d in (a, a_ref)}
        if any(len(idx) == 0 for idx in hit.values()):
            continue
        i, j = hit[a][0], hit[a_ref][0]
        out.append(
            TmlEstimate(
                target=Target.ate(a, a_ref),
                estimator=e.estimator,
                values=[e.values[i] - e.values[j]],
                ses=[np.hypot(e.ses[i], e.ses[j])],
                per_rotation=tuple(np.array([r[i] - r[j]]) for r in e.per_rotation),
                split=e.split,
            )
        )
    return out


@dataclass(frozen=True, eq=False)
class CounterfactualPairs:
    a_low: float
    a_high: float
    low: np.ndarray
    high: np.ndarray


def counterfactual_pairs(
    data: Dataset, cfg: RunConfig, a_low: float, a_high: float, seed: int, representation: Optional[np.ndarray] = None
) -> CounterfactualPairs:
    """Per row (m̂(a_low, ẑ), m̂(a_high, ẑ)) from the outcome model of the rotation that evaluated the row."""
    low, high = np.full(data.n, np.nan), np.full(data.n, np.nan)
    for fit in representation_passes(data, cfg, seed, representation):
        rot = fit.rotation
        zdata = fit.covariates(data)
        outcome = fit_mean_nuisances(zdata.subset(rot.nuisance), cfg).outcome
        assert outcome is not None
        z_eval = zdata.x[rot.evaluation]
        low[rot.evaluation] = outcome.predict(z_eval, a_low)
        high[rot.evaluation] = outcome.predict(z_eval, a_high)
    return CounterfactualPairs(a_low=a_low, a_high=a_high, low=low, high=high)
