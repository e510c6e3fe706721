import json
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from cfdist import __version__
from cfdist.bench.report import AGGREGATES_FILE, MANIFEST_FILE, REPLICATES_FILE, REPORT_FILE
from cfdist.cli.main import app, main
from cfdist.config.constants import EXIT_CONFIG_ERROR, EXIT_DATA_ERROR


def _base_args(tmp_path: Path) -> List[str]:
    return ["--config", str(tmp_path / "absent.yml"), "--log-file-path", str(tmp_path / "cfdist.log")]


def test_version():
    result = CliRunner().invoke(app, ["version"])
    assert result.exit_code == 0
    assert __version__ in result.stdout


def test_oracle_analytic_marginal(tmp_path: Path):
    result = CliRunner().invoke(app, _base_args(tmp_path) + ["oracle", "--target", "marginal_cdf", "--arm", "1", "--y1", "1.0"])
    assert result.exit_code == 0, result.output
    assert "value=0.5\t" in result.stdout
    assert "method=analytic" in result.stdout


def test_oracle_unsupported_target_exit_code(tmp_path: Path):
    result = CliRunner().invoke(
        app, _base_args(tmp_path) + ["oracle", "--target", "upper", "--dgp", "iv", "--treatment", "continuous"], catch_exceptions=True
    )
    assert result.exit_code == EXIT_CONFIG_ERROR


def test_sim_bounds_writes_report(tmp_path: Path):
    out = tmp_path / "run"
    args = _base_args(tmp_path) + [
        "--n",
        "400",
        "--reps",
        "2",
        "--n-mc",
        "5000",
        "--bounds-folds",
        "2",
        "--threshold-quantile",
        "0.5",
        "--out",
        str(out),
        "sim-bounds",
    ]
    result = CliRunner().invoke(app, args)
    assert result.exit_code == 0, result.output

    for name in (AGGREGATES_FILE, REPLICATES_FILE, REPORT_FILE, MANIFEST_FILE):
        assert (out / name).is_file()

    replicates = pd.read_csv(out / REPLICATES_FILE)
    assert sorted(replicates["replicate"].unique()) == [0, 1]
    assert {"plugin", "marginal", "dr_direct", "dr_smooth", "dr_smooth_lower"} <= set(replicates["estimator"])
    assert np.all((replicates["value"] >= 0.0) & (replicates["value"] <= 1.0))

    manifest = json.loads((out / MANIFEST_FILE).read_text())
    assert manifest["spec"]["n"] == 400
    assert len(manifest["seeds"]) == 2
    assert manifest["failures"] == 0
    assert (tmp_path / "cfdist.log").is_file()


def test_sim_iv_ate_bad_fold_count(tmp_path: Path):
    args = _base_args(tmp_path) + ["--n", "600", "--reps", "1", "--k-folds", "4", "--out", str(tmp_path / "run"), "sim-iv-ate"]
    result = CliRunner().invoke(app, args, catch_exceptions=True)
    assert result.exit_code == EXIT_CONFIG_ERROR


def test_fit_csv_missing_column(tmp_path: Path):
    path = tmp_path / "data.csv"
    pd.DataFrame({"y": [0.1, 0.2, 0.3], "x1": [1.0, 2.0, 3.0]}).to_csv(path, index=False)
    result = CliRunner().invoke(app, _base_args(tmp_path) + ["--out", str(tmp_path / "run"), "fit-csv", str(path)], catch_exceptions=True)
    assert result.exit_code == EXIT_DATA_ERROR
    assert "MissingColumn" in result.output


def test_fit_csv_binary_bounds(tmp_path: Path, bounds_sim):
    path = tmp_path / "data.csv"
    bounds_sim.dataset.subset(np.arange(600)).to_frame().to_csv(path, index=False)
    out = tmp_path / "run"
    args = _base_args(tmp_path) + ["--threshold-quantile", "0.5", "--out", str(out), "fit-csv", str(path)]
    result = CliRunner().invoke(app, args)
    assert result.exit_code == 0, result.output

    replicates = pd.read_csv(out / REPLICATES_FILE)
    assert set(replicates["replicate"]) == {0}
    assert replicates["truth"].isna().all()


def test_malformed_config_exits_with_config_code(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    config_path = tmp_path / "bad.yml"
    config_path.write_text("seed: [unclosed\n")
    monkeypatch.setattr("sys.argv", ["cfdist", "--config", str(config_path), "--log-file-path", str(tmp_path / "cfdist.log"), "show-config"])
    with pytest.raises(SystemExit) as excinfo:
        main()
    assert excinfo.value.code == EXIT_CONFIG_ERROR
