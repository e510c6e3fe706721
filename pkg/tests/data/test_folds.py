import numpy as np
import pytest

from cfdist.config.constants import BadFoldCount
from cfdist.data.folds import FoldMode, FoldRole, make_folds, mix_seed


def test_mix_seed_is_deterministic_and_distinct():
    assert mix_seed(0, 0) == mix_seed(0, 0)
    seeds = {mix_seed(42, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2**64 for s in seeds)
    assert mix_seed(1, 0) != mix_seed(0, 1)


def test_folds_partition_rows():
    plan = make_folds(103, 6, FoldMode.TRIPLE, seed=3)
    sizes = [len(f) for f in plan.folds]
    assert sum(sizes) == 103
    assert max(sizes) - min(sizes) <= 1
    assert np.array_equal(np.sort(np.concatenate(plan.folds)), np.arange(103))


def test_triple_rotations_cycle_roles():
    plan = make_folds(60, 6, FoldMode.TRIPLE, seed=1)
    assert len(plan.rotations) == 3
    for rotation in plan.rotations:
        parts = [rotation.representation, rotation.nuisance, rotation.evaluation]
        assert sum(len(p) for p in parts) == 60
        assert not set(rotation.representation) & set(rotation.nuisance)
        assert not set(rotation.nuisance) & set(rotation.evaluation)
        assert rotation.fold_roles.count(FoldRole.EVALUATION) == 2

    # every fold plays every role exactly once
    for fold in range(6):
        roles = {plan.role_of_fold(r, fold) for r in range(3)}
        assert roles == {FoldRole.REPRESENTATION, FoldRole.NUISANCE, FoldRole.EVALUATION}

    evaluated = np.concatenate([r.evaluation for r in plan.rotations])
    assert np.array_equal(np.sort(evaluated), np.arange(60))


def test_double_rotations():
    plan = make_folds(50, 5, FoldMode.DOUBLE, seed=0)
    assert len(plan.rotations) == 5
    for rotation in plan.rotations:
        assert len(rotation.representation) == 0
        assert len(rotation.nuisance) + len(rotation.evaluation) == 50


def test_same_seed_same_plan():
    a = make_folds(40, 3, FoldMode.TRIPLE, seed=9)
    b = make_folds(40, 3, FoldMode.TRIPLE, seed=9)
    c = make_folds(40, 3, FoldMode.TRIPLE, seed=10)
    assert np.array_equal(a.index_map, b.index_map)
    assert not np.array_equal(a.index_map, c.index_map)


@pytest.mark.parametrize("n,k,mode", [(30, 4, FoldMode.TRIPLE), (30, 1, FoldMode.DOUBLE), (2, 3, FoldMode.TRIPLE)])
def test_bad_fold_counts(n, k, mode):
    with pytest.raises(BadFoldCount):
        make_folds(n, k, mode, seed=0)
