from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from ..config.constants import BadFoldCount

_MASK64 = (1 << 64) - 1


def mix_seed(parent: int, index: int) -> int:
    """Derives a child seed from (parent, index) with the splitmix64 finalizer.

    Pure integer arithmetic, so replicate r gets the same seed whether it runs
    sequentially or on a worker.
    """
    z = (int(parent) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class FoldMode(str, Enum):
    DOUBLE = "double"
    TRIPLE = "triple"


class FoldRole(str, Enum):
    REPRESENTATION = "representation"
    NUISANCE = "nuisance"
    EVALUATION = "evaluation"


@dataclass(frozen=True)
class Rotation:
    """Row indices playing each role in one pass. Representation is empty in Double mode."""

    index: int
    representation: np.ndarray
    nuisance: np.ndarray
    evaluation: np.ndarray
    fold_roles: Tuple[FoldRole, ...]


@dataclass(frozen=True, eq=False)
class FoldPlan:
    n: int
    k: int
    mode: FoldMode
    seed: int
    index_map: np.ndarray
    rotations: Tuple[Rotation, ...]

    @property
    def folds(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.index_map == f) for f in range(self.k)]

    def role_of_fold(self, rotation: int, fold: int) -> FoldRole:
        return self.rotations[rotation].fold_roles[fold]


def _rows_of(index_map: np.ndarray, folds: List[int]) -> np.ndarray:
    return np.flatnonzero(np.isin(index_map, folds))


def make_folds(n: int, k: int, mode: FoldMode, seed: int) -> FoldPlan:
    if mode == FoldMode.TRIPLE and (k < 3 or k % 3 != 0):
        raise BadFoldCount(f"Triple cross-fitting needs k >= 3 divisible by 3, got k={k}")
    if k < 2:
        raise BadFoldCount(f"Cross-fitting needs k >= 2, got k={k}")
    if n < k:
        raise BadFoldCount(f"Cannot split {n} rows into {k} nonempty folds")

    perm = np.random.default_rng(seed).permutation(n)
    index_map = np.empty(n, dtype=np.int64)
    for fold, rows in enumerate(np.array_split(perm, k)):
        index_map[rows] = fold
    index_map.setflags(write=False)

    rotations = []
    if mode == FoldMode.TRIPLE:
        size = k // 3
        groups = [list(range(g * size, (g + 1) * size)) for g in range(3)]
        for r in range(3):
            rep, nui, ev = groups[r], groups[(r + 1) % 3], groups[(r + 2) % 3]
            roles = [FoldRole.REPRESENTATION] * k
            for f in nui:
                roles[f] = FoldRole.NUISANCE
            for f in ev:
                roles[f] = FoldRole.EVALUATION
            rotations.append(
                Rotation(
                    index=r,
                    representation=_rows_of(index_map, rep),
                    nuisance=_rows_of(index_map, nui),
                    evaluation=_rows_of(index_map, ev),
                    fold_roles=tuple(roles),
                )
            )
    else:
        for j in range(k):
            roles = tuple(FoldRole.EVALUATION if f == j else FoldRole.NUISANCE for f in range(k))
            rotations.append(
                Rotation(
                    index=j,
                    representation=np.empty(0, dtype=np.int64),
                    nuisance=np.flatnonzero(index_map != j),
                    evaluation=np.flatnonzero(index_map == j),
                    fold_roles=roles,
                )
            )

    return FoldPlan(n=n, k=k, mode=mode, seed=seed, index_map=index_map, rotations=tuple(rotations))
