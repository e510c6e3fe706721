from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..bounds.estimators import Z_CRIT


class TargetKind(str, Enum):
    POTENTIAL_MEAN = "mean"
    ATE = "ate"
    DOSE_CURVE = "dose"


@dataclass(frozen=True)
class Target:
    kind: TargetKind
    a: Optional[float] = None
    a_ref: Optional[float] = None

    @classmethod
    def mean(cls, a: float) -> "Target":
        return cls(TargetKind.POTENTIAL_MEAN, float(a))

    @classmethod
    def ate(cls, a: float = 1.0, a_ref: float = 0.0) -> "Target":
        return cls(TargetKind.ATE, float(a), float(a_ref))

    @classmethod
    def dose_curve(cls) -> "Target":
        return cls(TargetKind.DOSE_CURVE)

    @property
    def label(self) -> str:
        if self.kind == TargetKind.POTENTIAL_MEAN:
            return f"mean({self.a:g})"
        elif self.kind == TargetKind.ATE:
            return f"ate({self.a:g},{self.a_ref:g})"
        return "dose"


@dataclass(frozen=True, eq=False)
class TmlEstimate:
    """Point values (one per dose for dose curves) with Wald intervals."""

    target: Target
    estimator: str
    values: np.ndarray
    ses: np.ndarray
    per_rotation: Tuple[np.ndarray, ...] = field(default=())
    doses: Optional[np.ndarray] = None
    split: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, dtype=np.float64)))
        object.__setattr__(self, "ses", np.atleast_1d(np.asarray(self.ses, dtype=np.float64)))

    @property
    def value(self) -> float:
        return float(self.values[0])

    @property
    def se(self) -> float:
        return float(self.ses[0])

    @property
    def ci_lo(self) -> np.ndarray:
        return self.values - Z_CRIT * self.ses

    @property
    def ci_hi(self) -> np.ndarray:
        return self.values + Z_CRIT * self.ses

    @property
    def key(self) -> Tuple[Target, str]:
        return self.target, self.estimator

    def to_records(self, rotation: Optional[int] = None) -> List[Dict[str, Any]]:
        doses = self.doses if self.doses is not None else [None] * len(self.values)
        return [
            {
                "split": self.split,
                "rotation": rotation,
                "estimator": self.estimator,
                "target": self.target.label,
                "dose": None if d is None else float(d),
                "value": float(v),
                "se": float(s),
                "ci_lo": float(lo),
                "ci_hi": float(hi),
            }
            for d, v, s, lo, hi in zip(doses, self.values, self.ses, self.ci_lo, self.ci_hi)
        ]


@dataclass(frozen=True)
class DoseGrid:
    doses: Tuple[float, ...]
    bandwidth: float


def pool_rotations(values: List[np.ndarray], ses: List[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Mean over rotations; se = sqrt(sum se_r²) / R."""
    r = len(values)
    return np.mean(values, axis=0), np.sqrt(np.sum(np.square(ses), axis=0)) / r


@dataclass(frozen=True, eq=False)
class TmlRun:
    """Pooled estimates of one split plus the latent score of every evaluation row."""

    estimates: Tuple[TmlEstimate, ...]
    latent: Optional[np.ndarray] = None
    logs: Tuple[Any, ...] = field(default=())

    def get(self, target: Target, estimator: str) -> TmlEstimate:
        for e in self.estimates:
            if e.target == target and e.estimator == estimator:
                return e
        raise KeyError((target.label, estimator))
