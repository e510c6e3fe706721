import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..config.config import VaeConfig
from ..config.constants import ShapeMismatch
from ..data.dataset import Dataset
from ..hsic import KernelSpec, default_kernel, hsic_grad_x
from ..neural.mlp import Mlp, backward, flatten, forward, init_mlp, unflatten

LOG_2PI = float(np.log(2 * np.pi))

Params = Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class Standardization:
    mean: Tuple[float, float, float]
    scale: Tuple[float, float, float]

    @classmethod
    def fit(cls, a: np.ndarray, y: np.ndarray, s: np.ndarray) -> "Standardization":
        cols = np.column_stack([a, y, s])
        scale = cols.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(mean=tuple(cols.mean(axis=0).tolist()), scale=tuple(scale.tolist()))

    @classmethod
    def identity(cls) -> "Standardization":
        return cls(mean=(0.0, 0.0, 0.0), scale=(1.0, 1.0, 1.0))

    def apply(self, a: np.ndarray, y: np.ndarray, s: np.ndarray) -> "Batch":
        m, sc = self.mean, self.scale
        return Batch(a=(np.asarray(a) - m[0]) / sc[0], y=(np.asarray(y) - m[1]) / sc[1], s=(np.asarray(s) - m[2]) / sc[2])


@dataclass(frozen=True, eq=False)
class Batch:
    """Standardized (A, Y, S) columns."""

    a: np.ndarray
    y: np.ndarray
    s: np.ndarray

    @property
    def n(self) -> int:
        return len(self.a)

    def take(self, idx: np.ndarray) -> "Batch":
        return Batch(a=self.a[idx], y=self.y[idx], s=self.s[idx])


@dataclass(frozen=True, eq=False)
class IvVaeModel:
    encoder: Mlp
    decoder_a: Mlp
    decoder_y: Mlp
    logvar_a: np.ndarray
    logvar_y: np.ndarray
    latent_dim: int
    standardization: Standardization = field(default_factory=Standardization.identity)
    logvar_clamp: float = VaeConfig.logvar_clamp

    @property
    def params(self) -> Params:
        return self.encoder.params + self.decoder_a.params + self.decoder_y.params + (self.logvar_a, self.logvar_y)

    def with_params(self, params: Params) -> "IvVaeModel":
        ne, na = len(self.encoder.params), len(self.decoder_a.params)
        nd = na + len(self.decoder_y.params)
        return IvVaeModel(
            encoder=self.encoder.with_params(params[:ne]),
            decoder_a=self.decoder_a.with_params(params[ne : ne + na]),
            decoder_y=self.decoder_y.with_params(params[ne + na : ne + nd]),
            logvar_a=params[ne + nd],
            logvar_y=params[ne + nd + 1],
            latent_dim=self.latent_dim,
            standardization=self.standardization,
            logvar_clamp=self.logvar_clamp,
        )

    def with_standardization(self, standardization: Standardization) -> "IvVaeModel":
        return IvVaeModel(
            encoder=self.encoder,
            decoder_a=self.decoder_a,
            decoder_y=self.decoder_y,
            logvar_a=self.logvar_a,
            logvar_y=self.logvar_y,
            latent_dim=self.latent_dim,
            standardization=standardization,
            logvar_clamp=self.logvar_clamp,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "architecture": {
                    "latent_dim": self.latent_dim,
                    "logvar_clamp": self.logvar_clamp,
                    "encoder": list(self.encoder.sizes),
                    "decoder_a": list(self.decoder_a.sizes),
                    "decoder_y": list(self.decoder_y.sizes),
                    "shapes": [list(p.shape) for p in self.params],
                },
                "params": flatten(self.params).tolist(),
                "standardization": {"mean": list(self.standardization.mean), "scale": list(self.standardization.scale)},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "IvVaeModel":
        payload = json.loads(text)
        arch = payload["architecture"]
        params = unflatten(np.asarray(payload["params"], dtype=np.float64), [tuple(s) for s in arch["shapes"]])
        ne, na = 2 * (len(arch["encoder"]) - 1), 2 * (len(arch["decoder_a"]) - 1)
        nd = na + 2 * (len(arch["decoder_y"]) - 1)
        std = payload["standardization"]
        return cls(
            encoder=Mlp(sizes=tuple(arch["encoder"]), params=params[:ne]),
            decoder_a=Mlp(sizes=tuple(arch["decoder_a"]), params=params[ne : ne + na]),
            decoder_y=Mlp(sizes=tuple(arch["decoder_y"]), params=params[ne + na : ne + nd]),
            logvar_a=params[ne + nd],
            logvar_y=params[ne + nd + 1],
            latent_dim=int(arch["latent_dim"]),
            standardization=Standardization(mean=tuple(std["mean"]), scale=tuple(std["scale"])),
            logvar_clamp=float(arch["logvar_clamp"]),
        )


def init_ivvae(latent_dim: int, hidden: int, rng: np.random.Generator, logvar_clamp: float = VaeConfig.logvar_clamp) -> IvVaeModel:
    return IvVaeModel(
        encoder=init_mlp((3, hidden, hidden, 2 * latent_dim), rng),
        decoder_a=init_mlp((1 + latent_dim, hidden, hidden, 1), rng),
        decoder_y=init_mlp((1 + latent_dim, hidden, hidden, 1), rng),
        logvar_a=np.zeros(1),
        logvar_y=np.zeros(1),
        latent_dim=latent_dim,
        logvar_clamp=logvar_clamp,
    )


@dataclass(frozen=True)
class LossComponents:
    total: float
    nll_a: float
    nll_y: float
    kl: float
    hsic: float

    @property
    def recon(self) -> float:
        return self.nll_a + self.nll_y


def _clamp(raw: np.ndarray, c: float) -> Tuple[np.ndarray, np.ndarray]:
    """Clamped values and the mask where the gradient passes through."""
    return np.clip(raw, -c, c), ((raw > -c) & (raw < c)).astype(np.float64)


def encoder_moments(model: IvVaeModel, batch: Batch) -> Tuple[np.ndarray, np.ndarray]:
    out, _ = forward(model.encoder, np.column_stack([batch.a, batch.y, batch.s]))
    mu, lv = out[:, : model.latent_dim], out[:, model.latent_dim :]
    return mu, np.clip(lv, -model.logvar_clamp, model.logvar_clamp)


def reparameterize(mu: np.ndarray, logvar: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """z = mu + exp(logvar / 2) * eps."""
    return mu + np.exp(0.5 * logvar) * eps


def _gaussian_nll(target: np.ndarray, mean: np.ndarray, logvar: float) -> Tuple[float, np.ndarray, float]:
    """Row-mean NLL and its gradients wrt the mean column and the log-variance."""
    n = len(target)
    resid = target - mean
    inv_var = np.exp(-logvar)
    nll = 0.5 * float(np.mean(LOG_2PI + logvar + resid**2 * inv_var))
    d_mean = -(resid * inv_var / n).reshape(-1, 1)
    d_logvar = 0.5 * float(np.mean(1.0 - resid**2 * inv_var))
    return nll, d_mean, d_logvar


def loss_and_grads(
    model: IvVaeModel,
    batch: Batch,
    beta: float,
    lam: float,
    eps: np.ndarray,
    bandwidths: Optional[Tuple[KernelSpec, KernelSpec]] = None,
) -> Tuple[LossComponents, Params]:
    """Reduced-form IV-VAE objective and its gradients wrt `model.params`.

    HSIC bandwidths default to the median heuristic on this batch and are held
    constant in the gradient.
    """
    n, dim = batch.n, model.latent_dim
    eps = np.asarray(eps, dtype=np.float64).reshape(n, -1)
    if eps.shape != (n, dim):
        raise ShapeMismatch(f"Noise draws must have shape {(n, dim)}, got {eps.shape}")
    c = model.logvar_clamp

    enc_out, enc_cache = forward(model.encoder, np.column_stack([batch.a, batch.y, batch.s]))
    mu = enc_out[:, :dim]
    lv, lv_mask = _clamp(enc_out[:, dim:], c)
    sd = np.exp(0.5 * lv)
    z = reparameterize(mu, lv, eps)

    lva, lva_mask = _clamp(model.logvar_a, c)
    lvy, lvy_mask = _clamp(model.logvar_y, c)

    mu_a, cache_a = forward(model.decoder_a, np.column_stack([batch.s, z]))
    mu_y, cache_y = forward(model.decoder_y, np.column_stack([batch.a, z]))
    nll_a, d_mu_a, d_lva = _gaussian_nll(batch.a, mu_a[:, 0], float(lva[0]))
    nll_y, d_mu_y, d_lvy = _gaussian_nll(batch.y, mu_y[:, 0], float(lvy[0]))

    kl = 0.5 * float(np.sum(mu**2 + np.exp(lv) - 1.0 - lv)) / n

    if lam > 0:
        spec_z, spec_s = bandwidths if bandwidths is not None else (default_kernel(z), default_kernel(batch.s))
        hsic, d_z_hsic = hsic_grad_x(z, batch.s, spec_z, spec_s)
    else:
        hsic, d_z_hsic = 0.0, np.zeros_like(z)

    total = nll_a + nll_y + beta * kl + lam * hsic

    grads_a, d_in_a = backward(model.decoder_a, cache_a, d_mu_a)
    grads_y, d_in_y = backward(model.decoder_y, cache_y, d_mu_y)
    d_z = d_in_a[:, 1:] + d_in_y[:, 1:] + lam * d_z_hsic

    # reparameterization z = mu + exp(lv / 2) * eps, plus the closed-form KL
    d_mu = d_z + beta * mu / n
    d_lv = (d_z * 0.5 * sd * eps + beta * 0.5 * (np.exp(lv) - 1.0) / n) * lv_mask
    grads_enc, _ = backward(model.encoder, enc_cache, np.hstack([d_mu, d_lv]))

    grads = grads_enc + grads_a + grads_y + (np.array([d_lva]) * lva_mask, np.array([d_lvy]) * lvy_mask)
    return LossComponents(total=total, nll_a=nll_a, nll_y=nll_y, kl=kl, hsic=hsic), grads


def encode(model: IvVaeModel, data: Dataset) -> np.ndarray:
    """Posterior means of the latent score, shape (n, latent_dim)."""
    s = data.require_instrument()
    mu, _ = encoder_moments(model, model.standardization.apply(data.a, data.y, s))
    return mu
