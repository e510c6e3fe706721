import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..config.config import VaeConfig
from ..config.constants import MEDIAN_HEURISTIC_MAX_POINTS, IoFailure, NonFiniteLoss, OutOfRange
from ..data.dataset import Dataset
from ..hsic import hsic_stat
from ..neural.adam import adam_step, init_adam
from ..neural.mlp import assert_finite
from ..utils.utils import logged_exec_time
from .model import IvVaeModel, Standardization, encode, init_ivvae, loss_and_grads


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    recon: float
    kl: float
    hsic: float


@dataclass(frozen=True)
class TrainLog:
    epochs: Tuple[EpochRecord, ...] = field(default=())
    final_hsic: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.epochs], columns=["epoch", "loss", "recon", "kl", "hsic"])

    def to_csv(self, path: Union[str, Path]) -> None:
        try:
            self.to_frame().to_csv(path, index=False, float_format="%.17g")
        except OSError as e:
            raise IoFailure(f"Could not write training log to {path}: {e}") from e


def _evenly_spaced(n: int, limit: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, min(n, limit)).astype(np.int64))


@logged_exec_time
def train(data: Dataset, cfg: VaeConfig, seed: int) -> Tuple[IvVaeModel, TrainLog]:
    """Minibatch Adam on the standardized (A, Y, S) columns of `data`."""
    s = data.require_instrument()
    if data.n < cfg.min_train_rows:
        raise OutOfRange(f"IV-VAE training needs at least {cfg.min_train_rows} rows, got {data.n}")

    rng = np.random.default_rng(seed)
    standardization = Standardization.fit(data.a, data.y, s)
    batch_all = standardization.apply(data.a, data.y, s)
    model = init_ivvae(cfg.latent_dim, cfg.hidden, rng, cfg.logvar_clamp).with_standardization(standardization)
    state = init_adam(model.params, lr=cfg.lr)
    n_batches = max(1, math.ceil(data.n / cfg.batch_size))

    records: List[EpochRecord] = []
    for epoch in range(cfg.epochs):
        sums = np.zeros(4)
        for idx in np.array_split(rng.permutation(data.n), n_batches):
            batch = batch_all.take(idx)
            eps = rng.standard_normal((batch.n, cfg.latent_dim))
            parts, grads = loss_and_grads(model, batch, cfg.beta, cfg.lam, eps)
            if not np.isfinite(parts.total):
                raise NonFiniteLoss(f"IV-VAE loss became non-finite at epoch {epoch}")
            params, state = adam_step(model.params, grads, state)
            assert_finite(params, f"Adam step {state.step}")
            model = model.with_params(params)
            sums += len(idx) * np.array([parts.total, parts.recon, parts.kl, parts.hsic])

        loss, recon, kl, hsic = (sums / data.n).tolist()
        records.append(EpochRecord(epoch=epoch, loss=loss, recon=recon, kl=kl, hsic=hsic))
        logging.debug(f"IV-VAE epoch {epoch}: loss={loss:.4f} recon={recon:.4f} kl={kl:.4f} hsic={hsic:.5f}")

    rows = _evenly_spaced(data.n, MEDIAN_HEURISTIC_MAX_POINTS)
    final_hsic = hsic_stat(encode(model, data.subset(rows)), s[rows])
    logging.info(f"Trained IV-VAE on {data.n} rows for {cfg.epochs} epochs, final HSIC(z, S)={final_hsic:.5f}")
    return model, TrainLog(epochs=tuple(records), final_hsic=final_hsic)
