import logging
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config.config import RunConfig
from ..config.constants import DR, IPW, MIN_TML_ROWS, OR, ArmMissing, OutOfRange
from ..data.dataset import Dataset
from ..nuisance.bundle import fit_mean_nuisances
from .estimators import dr_scores, ipw_scores, or_scores, summarize
from .rotations import representation_passes
from .types import Target, TmlEstimate, TmlRun, pool_rotations


def _row_scores(estimator: str, m_a: np.ndarray, treated: np.ndarray, y: np.ndarray, pi_a: np.ndarray) -> np.ndarray:
    if estimator == OR:
        return or_scores(m_a)
    elif estimator == IPW:
        return ipw_scores(treated, y, pi_a)
    return dr_scores(m_a, treated, y, pi_a)


def run_tml_binary(data: Dataset, cfg: RunConfig, seed: int, representation: Optional[np.ndarray] = None) -> TmlRun:
    """OR, IPW and DR estimates of E[Y(0)], E[Y(1)] and the ATE by triple cross-fitting."""
    if not data.is_binary:
        raise OutOfRange("Binary TML needs a binary treatment")
    for arm in (0, 1):
        if not (data.a == arm).any():
            raise ArmMissing(f"No rows with A={arm}")
    if representation is None and data.n < MIN_TML_ROWS:
        raise OutOfRange(f"Binary TML needs at least {MIN_TML_ROWS} rows, got {data.n}")

    estimators = [e for e in (OR, IPW, DR) if cfg.wants(e)]
    targets = [Target.mean(0), Target.mean(1), Target.ate(1, 0)]
    per_rotation: Dict[Tuple[Target, str], List[Tuple[float, float]]] = defaultdict(list)
    latent: Optional[np.ndarray] = None
    logs = []

    for fit in representation_passes(data, cfg, seed, representation):
        rot = fit.rotation
        zdata = fit.covariates(data)
        bundle = fit_mean_nuisances(zdata.subset(rot.nuisance), cfg)
        assert bundle.outcome is not None and bundle.propensity is not None

        ev = zdata.subset(rot.evaluation)
        if latent is None:
            latent = np.full((data.n, ev.x.shape[1]), np.nan)
        latent[rot.evaluation] = ev.x
        if fit.log is not None:
            logs.append(fit.log)

        m = {arm: bundle.outcome.predict_arm(ev.x, arm) for arm in (0, 1)}
        pi = {arm: bundle.propensity.predict_arm(ev.x, arm) for arm in (0, 1)}
        for estimator in estimators:
            scores = {arm: _row_scores(estimator, m[arm], (ev.a == arm).astype(np.float64), ev.y, pi[arm]) for arm in (0, 1)}
            per_rotation[(targets[0], estimator)].append(summarize(scores[0]))
            per_rotation[(targets[1], estimator)].append(summarize(scores[1]))
            per_rotation[(targets[2], estimator)].append(summarize(scores[1] - scores[0]))
        logging.debug(f"Rotation {rot.index}: evaluated {len(rot.evaluation)} rows")

    estimates = []
    for target in targets:
        for estimator in estimators:
            pairs = per_rotation[(target, estimator)]
            values, ses = pool_rotations([np.array([v]) for v, _ in pairs], [np.array([s]) for _, s in pairs])
            estimates.append(
                TmlEstimate(target=target, estimator=estimator, values=values, ses=ses, per_rotation=tuple(np.array([v]) for v, _ in pairs))
            )
    return TmlRun(estimates=tuple(estimates), latent=latent, logs=tuple(logs))
