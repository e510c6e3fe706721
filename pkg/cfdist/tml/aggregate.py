import logging
from collections import OrderedDict
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..config.config import RunConfig
from ..config.constants import MixedTargets
from ..data.dataset import Dataset
from ..data.folds import mix_seed
from .types import Target, TmlEstimate, TmlRun

Runner = Callable[[Dataset, RunConfig, int], TmlRun]


def aggregate_splits(estimates: Sequence[TmlEstimate]) -> TmlEstimate:
    """Median over split seeds; variance = median of se_b² + (value_b - point)²."""
    if not estimates:
        raise MixedTargets("No split estimates to aggregate")
    first = estimates[0]
    for e in estimates[1:]:
        if e.key != first.key or len(e.values) != len(first.values):
            raise MixedTargets(f"Cannot aggregate {e.target.label}/{e.estimator} with {first.target.label}/{first.estimator}")
    if len(estimates) == 1:
        return first

    values = np.stack([e.values for e in estimates])
    ses = np.stack([e.ses for e in estimates])
    point = np.median(values, axis=0)
    variance = np.median(ses**2 + (values - point) ** 2, axis=0)
    return TmlEstimate(target=first.target, estimator=first.estimator, values=point, ses=np.sqrt(variance), doses=first.doses)


def run_with_splits(data: Dataset, cfg: RunConfig, runner: Runner, seed: int) -> List[TmlEstimate]:
    grouped: Dict[Tuple[Target, str], List[TmlEstimate]] = OrderedDict()
    for b in range(cfg.splits):
        run = runner(data, cfg, mix_seed(seed, b))
        for e in run.estimates:
            grouped.setdefault(e.key, []).append(
                TmlEstimate(target=e.target, estimator=e.estimator, values=e.values, ses=e.ses, per_rotation=e.per_rotation, doses=e.doses, split=b)
            )
    logging.info(f"Aggregating {len(grouped)} estimates over {cfg.splits} splits")
    return [aggregate_splits(group) for group in grouped.values()]
