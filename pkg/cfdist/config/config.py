import json
from dataclasses import asdict, dataclass, field, fields
from importlib.resources import open_text
from typing import Any, Dict, Optional, Tuple

import yaml
from toolz import keyfilter, merge

from .constants import ALL_ESTIMATORS, ConfigError
from .paths import APP_NAME

with open_text(APP_NAME, "defaults.yml") as f:
    DEFAULTS_CONFIG = yaml.safe_load(f)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


_VAE_DEFAULTS = DEFAULTS_CONFIG["vae"]


@dataclass(frozen=True)
class VaeConfig:
    """IV-VAE hyperparameters. Field defaults come from the `vae` section of defaults.yml."""

    latent_dim: int = int(_VAE_DEFAULTS["latent_dim"])
    hidden: int = int(_VAE_DEFAULTS["hidden"])
    beta: float = float(_VAE_DEFAULTS["beta"])
    lam: float = float(_VAE_DEFAULTS["lam"])
    lr: float = float(_VAE_DEFAULTS["lr"])
    batch_size: int = int(_VAE_DEFAULTS["batch_size"])
    epochs: int = int(_VAE_DEFAULTS["epochs"])
    logvar_clamp: float = float(_VAE_DEFAULTS["logvar_clamp"])
    min_train_rows: int = int(_VAE_DEFAULTS["min_train_rows"])

    def __post_init__(self):
        _require(self.latent_dim >= 1, f"latent_dim must be >= 1, got {self.latent_dim}")
        _require(self.hidden >= 1, f"hidden must be >= 1, got {self.hidden}")
        _require(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        _require(self.lam >= 0, f"lam must be >= 0, got {self.lam}")
        _require(self.lr > 0, f"lr must be > 0, got {self.lr}")
        _require(self.batch_size >= 2, f"batch_size must be >= 2, got {self.batch_size}")
        _require(self.epochs >= 0, f"epochs must be >= 0, got {self.epochs}")
        _require(self.logvar_clamp > 0, f"logvar_clamp must be > 0, got {self.logvar_clamp}")
        _require(self.min_train_rows >= 2, f"min_train_rows must be >= 2, got {self.min_train_rows}")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    k_folds: int
    bounds_folds: int
    smoothing_t: float
    clip_eps: float
    thresholds: Optional[Tuple[Tuple[float, float], ...]]
    threshold_quantiles: Tuple[float, ...]
    dose_grid: Optional[Tuple[float, ...]]
    dose_grid_points: int
    dose_quantile_range: Tuple[float, float]
    replications: int
    tml_replications: int
    splits: int
    estimators: Tuple[str, ...]
    feature_degree: int
    ridge_penalty: float
    logistic_c: float
    logistic_tol: float
    logistic_max_iter: int
    gps_trim_quantile: float
    n_mc: int
    vae: VaeConfig = field(default_factory=VaeConfig)

    def __post_init__(self):
        # normalize list-valued fields coming from yaml/json into tuples
        object.__setattr__(self, "thresholds", None if self.thresholds is None else tuple((float(a), float(b)) for a, b in self.thresholds))
        object.__setattr__(self, "threshold_quantiles", tuple(float(q) for q in self.threshold_quantiles))
        object.__setattr__(self, "dose_grid", None if self.dose_grid is None else tuple(float(d) for d in self.dose_grid))
        object.__setattr__(self, "dose_quantile_range", tuple(float(q) for q in self.dose_quantile_range))
        object.__setattr__(self, "estimators", tuple(str(e).lower() for e in self.estimators))
        if isinstance(self.vae, dict):
            object.__setattr__(self, "vae", VaeConfig(**self.vae))

        _require(0 <= self.seed < 2**64, f"seed must be a 64-bit unsigned integer, got {self.seed}")
        _require(self.k_folds >= 2, f"k_folds must be >= 2, got {self.k_folds}")
        _require(self.bounds_folds >= 2, f"bounds_folds must be >= 2, got {self.bounds_folds}")
        _require(self.smoothing_t > 0, f"smoothing_t must be positive, got {self.smoothing_t}")
        _require(0 < self.clip_eps < 0.5, f"clip_eps must be in (0, 0.5), got {self.clip_eps}")
        _require(all(0 < q < 1 for q in self.threshold_quantiles), "threshold_quantiles must lie in (0, 1)")
        _require(len(self.threshold_quantiles) >= 1, "threshold_quantiles must not be empty")
        _require(self.dose_grid_points >= 2, f"dose_grid_points must be >= 2, got {self.dose_grid_points}")
        lo, hi = self.dose_quantile_range if len(self.dose_quantile_range) == 2 else (1.0, 0.0)
        _require(0 <= lo < hi <= 1, f"dose_quantile_range must satisfy 0 <= lo < hi <= 1, got {self.dose_quantile_range}")
        if self.dose_grid is not None:
            _require(len(self.dose_grid) >= 1, "dose_grid must not be empty")
            _require(all(a < b for a, b in zip(self.dose_grid, self.dose_grid[1:])), "dose_grid must be strictly increasing")
        _require(self.replications >= 1, f"replications must be >= 1, got {self.replications}")
        _require(self.tml_replications >= 1, f"tml_replications must be >= 1, got {self.tml_replications}")
        _require(self.splits >= 1, f"splits must be >= 1, got {self.splits}")
        unknown = set(self.estimators) - set(ALL_ESTIMATORS)
        _require(not unknown, f"Unknown estimators: {sorted(unknown)}. Valid options are: {', '.join(ALL_ESTIMATORS)}")
        _require(self.feature_degree in (0, 1, 2, 3), f"feature_degree must be in 0..3, got {self.feature_degree}")
        _require(self.ridge_penalty >= 0, f"ridge_penalty must be >= 0, got {self.ridge_penalty}")
        _require(self.logistic_c > 0, f"logistic_c must be > 0, got {self.logistic_c}")
        _require(self.logistic_tol > 0, f"logistic_tol must be > 0, got {self.logistic_tol}")
        _require(self.logistic_max_iter >= 1, f"logistic_max_iter must be >= 1, got {self.logistic_max_iter}")
        _require(0 <= self.gps_trim_quantile < 0.5, f"gps_trim_quantile must be in [0, 0.5), got {self.gps_trim_quantile}")
        _require(self.n_mc >= 1, f"n_mc must be >= 1, got {self.n_mc}")

    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "RunConfig":
        """Builds a config from a (possibly larger) parameter dict, e.g. merged CLI params."""
        names = set(cls.field_names())
        return cls(**keyfilter(lambda k: k in names, merge(default_params(), params)))

    def to_dict(self) -> Dict[str, Any]:
        return json.loads(self.to_json())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            params = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"RunConfig is not valid JSON: {e}") from e
        unknown = set(params) - set(cls.field_names())
        if unknown:
            raise ConfigError(f"Unknown RunConfig fields: {sorted(unknown)}")
        return cls.from_params(params)

    def wants(self, estimator: str) -> bool:
        return estimator in self.estimators


def default_params() -> Dict[str, Any]:
    return keyfilter(lambda k: k in set(RunConfig.field_names()), DEFAULTS_CONFIG)


def default_run_config() -> RunConfig:
    return RunConfig(**default_params())
