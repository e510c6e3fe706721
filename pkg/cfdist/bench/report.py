import json
import logging
import platform
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from ..config.constants import IoFailure
from ..utils.utils import to_jsonable
from .experiment import AGGREGATE_COLUMNS, REPLICATE_COLUMNS, ExperimentReport

AGGREGATES_FILE = "aggregates.csv"
REPLICATES_FILE = "replicates.csv"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"

WIDTH_HISTOGRAM_BINS = 20
_VERSIONED_PACKAGES = ["cfdist", "numpy", "scipy", "pandas", "scikit-learn", "joblib"]


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def boxplot_series(replicates: pd.DataFrame) -> List[Dict[str, Any]]:
    """Five-number summaries per scalar estimand (dose curves excluded)."""
    scalar = replicates[replicates["dose"].isna()]
    out = []
    for (estimator, target, y1, y0), group in scalar.groupby(["estimator", "target", "y1", "y0"], dropna=False, sort=True):
        values = group["value"].to_numpy(dtype=np.float64)
        q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
        out.append(
            {
                "estimator": estimator,
                "target": target,
                "y1": y1,
                "y0": y0,
                "min": q[0],
                "q1": q[1],
                "median": q[2],
                "q3": q[3],
                "max": q[4],
                "truth": group["truth"].iloc[0],
            }
        )
    return out


def dose_curve_series(replicates: pd.DataFrame) -> List[Dict[str, Any]]:
    """Per estimator: mean curve, mean pointwise CI band and the truth over the dose grid."""
    curves = replicates[replicates["dose"].notna()]
    out = []
    for estimator, group in curves.groupby("estimator", sort=True):
        by_dose = group.groupby("dose", sort=True)
        out.append(
            {
                "estimator": estimator,
                "doses": by_dose["value"].mean().index.to_numpy(),
                "mean": by_dose["value"].mean().to_numpy(),
                "ci_lo": by_dose["ci_lo"].mean().to_numpy(),
                "ci_hi": by_dose["ci_hi"].mean().to_numpy(),
                "truth": by_dose["truth"].mean().to_numpy(),
            }
        )
    return out


def width_histogram(width_reductions: List[Dict[str, Any]]) -> Dict[str, Any]:
    values = np.asarray([w["value"] for w in width_reductions], dtype=np.float64)
    if len(values) == 0:
        return {"counts": [], "edges": [], "truths": []}
    counts, edges = np.histogram(values, bins=WIDTH_HISTOGRAM_BINS)
    truths = sorted({(w["y1"], w["y0"], w["truth"]) for w in width_reductions if w["truth"] is not None})
    return {
        "counts": counts,
        "edges": edges,
        "truths": [{"y1": y1, "y0": y0, "value": t} for y1, y0, t in truths],
    }


def report_bundle(report: ExperimentReport) -> Dict[str, Any]:
    return {
        "spec": report.spec,
        "estimators": list(report.estimators),
        "truths": report.truths,
        "aggregates": report.aggregates.to_dict(orient="records"),
        "failures": report.failures,
        "plots": {
            "boxplots": boxplot_series(report.replicates),
            "dose_curves": dose_curve_series(report.replicates),
            "width_reduction": width_histogram(report.width_reductions),
            "latent_scatter": report.latent_scatter,
            "latent_correlation": report.latent,
        },
    }


def _write_json(payload: Dict[str, Any], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, sort_keys=True, indent=2)
        f.write("\n")


def emit_report(report: ExperimentReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Writes the aggregate and per-replicate CSVs, the JSON bundle and the run manifest.

    Everything except manifest.json is a pure function of the ExperimentSpec.
    """
    out = Path(out_dir)
    paths = {name: out / name for name in (AGGREGATES_FILE, REPLICATES_FILE, REPORT_FILE, MANIFEST_FILE)}
    try:
        out.mkdir(parents=True, exist_ok=True)
        report.aggregates.reindex(columns=AGGREGATE_COLUMNS).to_csv(paths[AGGREGATES_FILE], index=False, float_format="%.17g")
        report.replicates.reindex(columns=REPLICATE_COLUMNS).to_csv(paths[REPLICATES_FILE], index=False, float_format="%.17g")
        _write_json(report_bundle(report), paths[REPORT_FILE])
        _write_json(
            {
                "spec": report.spec,
                "seeds": report.seeds,
                "versions": package_versions(),
                "wall_seconds": report.wall_seconds,
                "failures": len(report.failures),
            },
            paths[MANIFEST_FILE],
        )
    except OSError as e:
        raise IoFailure(f"Could not write report to {out}: {e}") from e
    logging.info(f"Wrote report files to {out}")
    return paths


def read_replicates(path: Union[str, Path]) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IoFailure(f"Could not read replicates from {path}: {e}") from e
