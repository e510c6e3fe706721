"""Seeded simulation designs with retained potential outcomes or latent confounders."""

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
import pandas as pd
from scipy.special import expit

from ..config.constants import ConfigError
from ..data.dataset import Dataset, infer_treatment_kind


class BoundsVariant(str, Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class IvOutcome(str, Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class IvTreatment(str, Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


# Noise scales
BOUNDS_TREATMENT_NOISE_SD = 0.1
BOUNDS_OUTCOME_NOISE_SD = 1.0
IV_TREATMENT_NOISE_SD = 0.2
# Outcome noise in the IV designs is not pinned down by the design; 0.2 matches the treatment noise
IV_OUTCOME_NOISE_SD = 0.2
INSTRUMENT_HALF_WIDTH = 2.0


def _check_n(n: int) -> None:
    if n < 2:
        raise ConfigError(f"Simulated datasets need n >= 2, got {n}")


@dataclass(frozen=True)
class BoundsDgpSpec:
    """Two Gaussian covariates, logistic treatment with a noisy index, shared outcome noise."""

    variant: BoundsVariant
    n: int
    seed: int

    noise_sd = BOUNDS_OUTCOME_NOISE_SD

    def __post_init__(self):
        _check_n(self.n)

    def draw_confounders(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, 2))

    def treatment_index(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * x[:, 0] - 0.3 * x[:, 1]

    def outcome_mean(self, arm: int, x: np.ndarray) -> np.ndarray:
        """μ_a(x), so that Y(a) = μ_a(X) + ε_Y."""
        x1, x2 = x[:, 0], x[:, 1]
        if self.variant == BoundsVariant.LINEAR:
            return x1 + 0.5 * x2 + (1.0 if arm == 1 else 0.0)
        if arm == 1:
            return np.cos(2 * x1) + x2**2 + 0.5
        return np.sin(2 * x1) + x2**2


@dataclass(frozen=True)
class IvDgpSpec:
    """Uniform instrument, Gaussian latent confounder, nonlinear first stage."""

    outcome: IvOutcome
    treatment: IvTreatment
    n: int
    seed: int

    noise_sd = IV_OUTCOME_NOISE_SD

    def __post_init__(self):
        _check_n(self.n)

    def draw_confounders(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, 1))

    @staticmethod
    def first_stage(s: np.ndarray, z_c: np.ndarray) -> np.ndarray:
        """Z_S without its noise term."""
        return 0.5 * s + 0.1 * np.tanh(s) + 0.3 * expit(2 * s) + 0.2 * z_c

    def outcome_mean(self, a: Union[float, np.ndarray], z_c: np.ndarray) -> np.ndarray:
        """E[Y(a) | Z_C]."""
        z = np.asarray(z_c, dtype=np.float64).reshape(-1)
        if self.outcome == IvOutcome.LINEAR:
            return 1.0 + 2.0 * a + 3.0 * z
        return 1.0 + (0.3 * a + 0.2 * np.sin(2 * a + 0.5)) + (0.3 * z + 2.0 * expit(z)) + 0.2 * a * z


DgpSpec = Union[BoundsDgpSpec, IvDgpSpec]


@dataclass(frozen=True, eq=False)
class SimulatedData:
    dataset: Dataset
    side: pd.DataFrame


def gen_bounds_dgp(spec: BoundsDgpSpec) -> SimulatedData:
    rng = np.random.default_rng(spec.seed)
    x = spec.draw_confounders(rng, spec.n)
    eps_s = rng.normal(0.0, BOUNDS_TREATMENT_NOISE_SD, spec.n)
    a = (rng.random(spec.n) < expit(spec.treatment_index(x) + eps_s)).astype(np.float64)
    eps_y = rng.normal(0.0, BOUNDS_OUTCOME_NOISE_SD, spec.n)
    y0 = spec.outcome_mean(0, x) + eps_y
    if spec.variant == BoundsVariant.LINEAR:
        y1 = y0 + 1.0
    else:
        y1 = spec.outcome_mean(1, x) + eps_y
    y = np.where(a == 1.0, y1, y0)

    dataset = Dataset(y=y, a=a, x=x, s=None, treatment_kind=infer_treatment_kind(a))
    side = pd.DataFrame({"y0": y0, "y1": y1, "x1": x[:, 0], "x2": x[:, 1]})
    return SimulatedData(dataset=dataset, side=side)


def gen_iv_dgp(spec: IvDgpSpec) -> SimulatedData:
    rng = np.random.default_rng(spec.seed)
    s = rng.uniform(-INSTRUMENT_HALF_WIDTH, INSTRUMENT_HALF_WIDTH, spec.n)
    z_c = spec.draw_confounders(rng, spec.n)[:, 0]
    z_s = spec.first_stage(s, z_c) + rng.normal(0.0, IV_TREATMENT_NOISE_SD, spec.n)
    if spec.treatment == IvTreatment.BINARY:
        a = (rng.random(spec.n) < expit(z_s)).astype(np.float64)
    else:
        a = z_s
    y = spec.outcome_mean(a, z_c) + rng.normal(0.0, IV_OUTCOME_NOISE_SD, spec.n)

    dataset = Dataset(y=y, a=a, x=np.zeros((spec.n, 0)), s=s, treatment_kind=infer_treatment_kind(a))
    side = pd.DataFrame({"z_c": z_c, "z_s": z_s})
    return SimulatedData(dataset=dataset, side=side)


def generate(spec: DgpSpec) -> SimulatedData:
    return gen_bounds_dgp(spec) if isinstance(spec, BoundsDgpSpec) else gen_iv_dgp(spec)


def confounders_of(spec: DgpSpec, sim: SimulatedData) -> np.ndarray:
    """The conditioning variables the oracle nuisances are functions of."""
    if isinstance(spec, BoundsDgpSpec):
        return sim.side[["x1", "x2"]].to_numpy()
    return sim.side[["z_c"]].to_numpy()
