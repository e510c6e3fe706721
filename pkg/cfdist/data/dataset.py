import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..config.constants import (
    A_COL,
    S_COL,
    X_PREFIX,
    Y_COL,
    EmptyTable,
    HeterogeneousSchema,
    IoFailure,
    LengthMismatch,
    MissingColumn,
    MissingInstrument,
    NonFiniteValue,
)

X_COL_PATTERN = re.compile(rf"^{X_PREFIX}(\d+)$")


class TreatmentKind(str, Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Observation:
    y: float
    a: float
    x: Tuple[float, ...] = ()
    s: Optional[float] = None


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated, column-typed table of observations.

    Arrays are read-only copies, so a Dataset can be shared between workers.
    """

    y: np.ndarray
    a: np.ndarray
    x: np.ndarray
    s: Optional[np.ndarray]
    treatment_kind: TreatmentKind
    x_names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.y)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(n, -1) if x.size else np.zeros((n, 0))
        if len(self.a) != n or x.shape[0] != n or (self.s is not None and len(self.s) != n):
            raise LengthMismatch(f"Column lengths differ: y={n}, a={len(self.a)}, x={x.shape[0]}, s={None if self.s is None else len(self.s)}")
        object.__setattr__(self, "y", _readonly(self.y))
        object.__setattr__(self, "a", _readonly(self.a))
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "s", None if self.s is None else _readonly(self.s))
        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"{X_PREFIX}{j + 1}" for j in range(x.shape[1])))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def has_instrument(self) -> bool:
        return self.s is not None

    @property
    def is_binary(self) -> bool:
        return self.treatment_kind == TreatmentKind.BINARY

    @property
    def rows(self) -> List[Observation]:
        s = self.s
        return [
            Observation(y=float(self.y[i]), a=float(self.a[i]), x=tuple(float(v) for v in self.x[i]), s=None if s is None else float(s[i]))
            for i in range(self.n)
        ]

    def require_instrument(self) -> np.ndarray:
        if self.s is None:
            raise MissingInstrument("Dataset has no instrument column 's'")
        return self.s

    def subset(self, idx: Union[np.ndarray, Sequence[int]]) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            y=self.y[idx],
            a=self.a[idx],
            x=self.x[idx],
            s=None if self.s is None else self.s[idx],
            treatment_kind=self.treatment_kind,
            x_names=self.x_names,
        )

    def with_covariates(self, z: np.ndarray) -> "Dataset":
        """Replaces the covariate block, e.g. with a learned latent score."""
        z = np.asarray(z, dtype=np.float64).reshape(self.n, -1)
        return Dataset(y=self.y, a=self.a, x=z, s=self.s, treatment_kind=self.treatment_kind, x_names=())

    def to_frame(self) -> pd.DataFrame:
        cols: Dict[str, np.ndarray] = {Y_COL: self.y, A_COL: self.a}
        for j, name in enumerate(self.x_names):
            cols[name] = self.x[:, j]
        if self.s is not None:
            cols[S_COL] = self.s
        return pd.DataFrame(cols)

    @classmethod
    def from_observations(cls, rows: Sequence[Observation]) -> "Dataset":
        return validate_dataset(
            [
                {
                    Y_COL: o.y,
                    A_COL: o.a,
                    **{f"{X_PREFIX}{j + 1}": v for j, v in enumerate(o.x)},
                    **({S_COL: o.s} if o.s is not None else {}),
                }
                for o in rows
            ]
        )


def infer_treatment_kind(a: np.ndarray) -> TreatmentKind:
    # Exact membership: doses that are all 0/1 count as binary
    return TreatmentKind.BINARY if np.all((a == 0.0) | (a == 1.0)) else TreatmentKind.CONTINUOUS


def _to_frame(raw_table: Union[pd.DataFrame, Sequence[Dict[str, Any]]]) -> pd.DataFrame:
    if isinstance(raw_table, pd.DataFrame):
        return raw_table
    rows = list(raw_table)
    if rows:
        key_sets = {frozenset(r.keys()) for r in rows}
        if len(key_sets) > 1:
            raise HeterogeneousSchema(f"Rows do not share one column set: {sorted(sorted(k) for k in key_sets)}")
    return pd.DataFrame(rows)


def validate_dataset(raw_table: Union[pd.DataFrame, Sequence[Dict[str, Any]]]) -> Dataset:
    """Validates a table with columns y, a and optionally x1..xd, s."""
    frame = _to_frame(raw_table)

    if len(frame) < 2:
        raise EmptyTable(f"Dataset needs at least 2 rows, got {len(frame)}")

    for col in (Y_COL, A_COL):
        if col not in frame.columns:
            raise MissingColumn(f"Missing required column '{col}'")

    x_cols = sorted(
        ((int(m.group(1)), c) for c in frame.columns if (m := X_COL_PATTERN.match(str(c)))),
        key=lambda p: p[0],
    )
    if [j for j, _ in x_cols] != list(range(1, len(x_cols) + 1)):
        raise HeterogeneousSchema(f"Covariate columns must be x1..xd without gaps, got {[c for _, c in x_cols]}")

    unknown = set(frame.columns) - {Y_COL, A_COL, S_COL} - {c for _, c in x_cols}
    if unknown:
        logging.warning(f"Ignoring unrecognized columns: {sorted(unknown)}")

    used = [Y_COL, A_COL] + [c for _, c in x_cols] + ([S_COL] if S_COL in frame.columns else [])
    try:
        values = frame[used].apply(pd.to_numeric, errors="raise").to_numpy(dtype=np.float64)
    except (ValueError, TypeError) as e:
        raise NonFiniteValue(f"Non-numeric entry in dataset: {e}") from e

    bad = ~np.isfinite(values)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise NonFiniteValue(f"Non-finite value in column '{used[col]}' at row {row}")

    y, a = values[:, 0], values[:, 1]
    d = len(x_cols)
    x = values[:, 2 : 2 + d]
    s = values[:, 2 + d] if S_COL in frame.columns else None

    return Dataset(y=y, a=a, x=x, s=s, treatment_kind=infer_treatment_kind(a), x_names=tuple(c for _, c in x_cols))


def read_csv(path: Union[str, Path]) -> Dataset:
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IoFailure(f"Could not read dataset from {path}: {e}") from e
    logging.info(f"Read {len(frame)} rows from {path}")
    return validate_dataset(frame)


def write_csv(data: Dataset, path: Union[str, Path]) -> None:
    try:
        data.to_frame().to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise IoFailure(f"Could not write dataset to {path}: {e}") from e
