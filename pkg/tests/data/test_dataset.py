from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from cfdist.config.constants import (
    EmptyTable,
    HeterogeneousSchema,
    IoFailure,
    LengthMismatch,
    MissingColumn,
    MissingInstrument,
    NonFiniteValue,
)
from cfdist.data.dataset import (
    Dataset,
    Observation,
    TreatmentKind,
    read_csv,
    validate_dataset,
    write_csv,
)


def test_validate_infers_binary_treatment():
    data = validate_dataset([{"y": 0.5, "a": 1, "x1": 0.1}, {"y": -0.2, "a": 0, "x1": 0.3}])
    assert data.treatment_kind == TreatmentKind.BINARY
    assert data.n == 2
    assert data.d == 1
    assert not data.has_instrument


def test_validate_continuous_with_instrument():
    frame = pd.DataFrame({"y": [1.0, 2.0, 3.0], "a": [0.2, 1.5, -0.3], "s": [0.0, 1.0, -1.0]})
    data = validate_dataset(frame)
    assert data.treatment_kind == TreatmentKind.CONTINUOUS
    assert data.d == 0
    np.testing.assert_array_equal(data.require_instrument(), [0.0, 1.0, -1.0])


def test_covariates_ordered_by_index():
    frame = pd.DataFrame({"x2": [1.0, 2.0], "y": [0.0, 1.0], "a": [0, 1], "x1": [5.0, 6.0], "x10": [7.0, 8.0]})
    with pytest.raises(HeterogeneousSchema):
        validate_dataset(frame)

    frame = frame.drop(columns=["x10"])
    data = validate_dataset(frame)
    assert data.x_names == ("x1", "x2")
    np.testing.assert_array_equal(data.x[:, 0], [5.0, 6.0])


def test_validation_errors():
    with pytest.raises(MissingColumn):
        validate_dataset([{"y": 1.0}, {"y": 2.0}])
    with pytest.raises(EmptyTable):
        validate_dataset([{"y": 1.0, "a": 0}])
    with pytest.raises(NonFiniteValue):
        validate_dataset([{"y": float("nan"), "a": 0}, {"y": 1.0, "a": 1}])
    with pytest.raises(NonFiniteValue):
        validate_dataset(pd.DataFrame({"y": ["a", "b"], "a": [0, 1]}))
    with pytest.raises(HeterogeneousSchema):
        validate_dataset([{"y": 1.0, "a": 0}, {"y": 2.0, "a": 1, "x1": 3.0}])


def test_dataset_is_read_only():
    data = Dataset(y=np.array([1.0, 2.0]), a=np.array([0.0, 1.0]), x=np.zeros((2, 0)), s=None, treatment_kind=TreatmentKind.BINARY)
    with pytest.raises(ValueError):
        data.y[0] = 3.0
    with pytest.raises(MissingInstrument):
        data.require_instrument()


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        Dataset(y=np.zeros(3), a=np.zeros(2), x=np.zeros((3, 1)), s=None, treatment_kind=TreatmentKind.BINARY)


def test_subset_and_covariate_swap(bounds_data: Dataset):
    sub = bounds_data.subset([0, 2, 4])
    assert sub.n == 3
    np.testing.assert_array_equal(sub.y, bounds_data.y[[0, 2, 4]])

    swapped = sub.with_covariates(np.array([1.0, 2.0, 3.0]))
    assert swapped.d == 1
    assert swapped.x_names == ("x1",)


def test_observations_round_trip():
    rows = [Observation(y=1.0, a=1.0, x=(0.5,), s=0.1), Observation(y=0.0, a=0.0, x=(-0.5,), s=-0.1)]
    data = Dataset.from_observations(rows)
    assert data.rows == rows


def test_csv_round_trip(tmp_path: Path, bounds_data: Dataset):
    path = tmp_path / "data.csv"
    write_csv(bounds_data, path)
    restored = read_csv(path)
    np.testing.assert_array_equal(restored.y, bounds_data.y)
    np.testing.assert_array_equal(restored.x, bounds_data.x)
    assert restored.treatment_kind == TreatmentKind.BINARY


def test_read_csv_missing_file(tmp_path: Path):
    with pytest.raises(IoFailure):
        read_csv(tmp_path / "absent.csv")
