import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from ..config.config import RunConfig
from ..data.dataset import Dataset
from ..data.folds import FoldMode, Rotation, make_folds, mix_seed
from ..ivvae.model import encode
from ..ivvae.train import TrainLog, train


@dataclass(frozen=True, eq=False)
class RotationFit:
    """One triple cross-fitting pass: the rotation and the latent score of every row."""

    rotation: Rotation
    z: np.ndarray
    log: Optional[TrainLog]

    def covariates(self, data: Dataset) -> Dataset:
        return data.with_covariates(self.z)


def representation_passes(data: Dataset, cfg: RunConfig, seed: int, representation: Optional[np.ndarray] = None) -> Iterator[RotationFit]:
    """Trains the IV-VAE on each rotation's representation folds and encodes all rows.

    A fixed `representation` (e.g. the true confounder) skips training.
    """
    if representation is None:
        data.require_instrument()
    plan = make_folds(data.n, cfg.k_folds, FoldMode.TRIPLE, seed)
    logging.info(f"Triple cross-fitting {data.n} rows over {cfg.k_folds} folds, seed {seed}")
    for rotation in plan.rotations:
        if representation is not None:
            yield RotationFit(rotation=rotation, z=np.asarray(representation, dtype=np.float64).reshape(data.n, -1), log=None)
            continue
        model, log = train(data.subset(rotation.representation), cfg.vae, mix_seed(seed, rotation.index))
        yield RotationFit(rotation=rotation, z=encode(model, data), log=log)
