"""Replication harness: replicate seeds, pipelines per experiment kind, truths and aggregates."""

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..bounds.estimators import BoundEstimate, BoundKind, width_reduction
from ..bounds.pipeline import ThresholdPair, estimate_bounds, threshold_pairs
from ..config.config import RunConfig
from ..config.constants import (
    BOUNDS_ESTIMATORS,
    DEFAULT_BOUNDS_N,
    DEFAULT_IV_N,
    DR,
    DR_DENSITY,
    DR_DIRECT,
    DR_KERNEL,
    DR_SMOOTH,
    DR_SMOOTH_LOWER,
    GPS_IPW,
    IPW,
    MARGINAL,
    MIN_TML_ROWS,
    OR,
    PLUGIN,
    TWOSLS,
    BadFoldCount,
    CfDistError,
    ConfigError,
    MissingInstrument,
)
from ..data.dataset import Dataset, read_csv
from ..data.folds import mix_seed
from ..hsic import permutation_test
from ..nuisance.gps import silverman_bandwidth
from ..sim.dgp import BoundsDgpSpec, BoundsVariant, DgpSpec, IvDgpSpec, IvOutcome, IvTreatment, SimulatedData, generate
from ..sim.oracle import OracleQuery, OracleTarget, OracleTruth, dose_response, oracle_per_point, oracle_truth
from ..tml.aggregate import run_with_splits
from ..tml.binary import run_tml_binary
from ..tml.bounds import run_tml_bounds
from ..tml.continuous import continuous_ate, make_dose_grid, run_tml_continuous
from ..tml.twosls import twosls_baseline
from ..tml.types import DoseGrid, TargetKind, TmlEstimate, TmlRun
from ..utils.utils import logged_exec_time

# Seed streams derived from the base seed, disjoint from replicate indices
PILOT_STREAM = 2**40
TRUTH_STREAM = 2**40 + 1
PILOT_ROWS = 100_000

# Latent diagnostics subsample
LATENT_SCATTER_POINTS = 500
LATENT_HSIC_POINTS = 300

REPLICATE_COLUMNS = ["replicate", "seed", "estimator", "target", "y1", "y0", "dose", "value", "raw", "se", "ci_lo", "ci_hi", "truth", "smooth_truth"]
GROUP_COLUMNS = ["estimator", "target", "y1", "y0", "dose"]
AGGREGATE_COLUMNS = GROUP_COLUMNS + ["count", "truth", "bias", "se", "mse", "mean_sq_error", "coverage"]
FAILURE_COLUMNS = ["replicate", "stage", "error", "message"]


class ExperimentKind(str, Enum):
    BOUNDS_SIM = "bounds_sim"
    IV_ATE_SIM = "iv_ate_sim"
    DOSE_SIM = "dose_sim"
    BOUNDS_ON_REP = "bounds_on_rep"
    USER_CSV = "user_csv"


class CsvPipeline(str, Enum):
    BOUNDS = "bounds"
    BINARY_TML = "binary_tml"
    CONTINUOUS_TML = "continuous_tml"


# estimator flag, bound side, oracle target, smoothed oracle target
_BOUND_TARGETS: Dict[BoundKind, Tuple[str, str, OracleTarget, Optional[OracleTarget]]] = {
    BoundKind.MARGINAL_L: (MARGINAL, "lower", OracleTarget.MARGINAL_LOWER, None),
    BoundKind.MARGINAL_U: (MARGINAL, "upper", OracleTarget.MARGINAL_UPPER, None),
    BoundKind.PLUGIN_L: (PLUGIN, "lower", OracleTarget.LOWER, None),
    BoundKind.PLUGIN_U: (PLUGIN, "upper", OracleTarget.UPPER, None),
    BoundKind.DR_DIRECT_U: (DR_DIRECT, "upper", OracleTarget.UPPER, None),
    BoundKind.DR_SMOOTH_U: (DR_SMOOTH, "upper", OracleTarget.UPPER, OracleTarget.SMOOTH_UPPER),
    BoundKind.DR_SMOOTH_L: (DR_SMOOTH_LOWER, "lower", OracleTarget.LOWER, OracleTarget.SMOOTH_LOWER),
}
_BOUND_ORACLE_TARGETS = (
    OracleTarget.LOWER,
    OracleTarget.UPPER,
    OracleTarget.MARGINAL_LOWER,
    OracleTarget.MARGINAL_UPPER,
    OracleTarget.SMOOTH_UPPER,
    OracleTarget.SMOOTH_LOWER,
    OracleTarget.WIDTH_REDUCTION,
)

TruthKey = Tuple[str, float, float]


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    cfg: RunConfig
    replications: int
    n: Optional[int] = None
    variant: BoundsVariant = BoundsVariant.LINEAR
    outcome: IvOutcome = IvOutcome.LINEAR
    treatment: IvTreatment = IvTreatment.BINARY
    oracle_nuisance: bool = False
    oracle_representation: bool = False
    csv_path: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"Experiments need at least one replicate, got {self.replications}")
        if self.jobs == 0:
            raise ConfigError("jobs must be nonzero")
        if self.kind == ExperimentKind.USER_CSV:
            if not self.csv_path:
                raise ConfigError("A user CSV experiment needs a csv_path")
            return
        if self.rows < 2:
            raise ConfigError(f"Simulated datasets need n >= 2, got {self.rows}")
        if self.oracle_nuisance and self.kind != ExperimentKind.BOUNDS_SIM:
            raise ConfigError("Oracle nuisances are only available for bounds simulations")
        if self.kind != ExperimentKind.BOUNDS_SIM and (self.cfg.k_folds < 3 or self.cfg.k_folds % 3 != 0):
            raise BadFoldCount(f"Triple cross-fitting needs k_folds >= 3 divisible by 3, got {self.cfg.k_folds}")
        if self.trains_representation and self.rows < MIN_TML_ROWS:
            raise ConfigError(f"Experiments that train the IV-VAE need n >= {MIN_TML_ROWS}, got {self.rows}")

    @property
    def rows(self) -> int:
        if self.n is not None:
            return self.n
        return DEFAULT_BOUNDS_N if self.kind == ExperimentKind.BOUNDS_SIM else DEFAULT_IV_N

    @property
    def trains_representation(self) -> bool:
        return self.kind in (ExperimentKind.IV_ATE_SIM, ExperimentKind.DOSE_SIM, ExperimentKind.BOUNDS_ON_REP) and not self.oracle_representation

    def dgp(self, seed: int) -> DgpSpec:
        if self.kind == ExperimentKind.BOUNDS_SIM:
            return BoundsDgpSpec(variant=self.variant, n=self.rows, seed=seed)
        if self.kind == ExperimentKind.IV_ATE_SIM:
            return IvDgpSpec(outcome=self.outcome, treatment=self.treatment, n=self.rows, seed=seed)
        if self.kind == ExperimentKind.DOSE_SIM:
            return IvDgpSpec(outcome=self.outcome, treatment=IvTreatment.CONTINUOUS, n=self.rows, seed=seed)
        if self.kind == ExperimentKind.BOUNDS_ON_REP:
            return IvDgpSpec(outcome=self.outcome, treatment=IvTreatment.BINARY, n=self.rows, seed=seed)
        raise ConfigError("User CSV experiments have no data-generating process")

    def replicate_seed(self, r: int) -> int:
        return mix_seed(self.cfg.seed, r)

    def to_dict(self) -> Dict[str, Any]:
        """Everything that determines the report contents; `jobs` does not."""
        out = asdict(self)
        out.pop("jobs")
        out["kind"] = self.kind.value
        out["variant"], out["outcome"], out["treatment"] = self.variant.value, self.outcome.value, self.treatment.value
        out["cfg"] = self.cfg.to_dict()
        out["n"] = None if self.kind == ExperimentKind.USER_CSV else self.rows
        return out


def pipeline_estimators(spec: ExperimentSpec, csv_pipeline: Optional[CsvPipeline] = None) -> Tuple[str, ...]:
    """The selected estimators the experiment's pipeline actually runs."""
    kind = spec.kind
    if kind in (ExperimentKind.BOUNDS_SIM, ExperimentKind.BOUNDS_ON_REP) or csv_pipeline == CsvPipeline.BOUNDS:
        family: Tuple[str, ...] = BOUNDS_ESTIMATORS
    elif kind == ExperimentKind.DOSE_SIM:
        family = (OR, GPS_IPW, DR_DENSITY, DR_KERNEL)
    elif (kind == ExperimentKind.IV_ATE_SIM and spec.treatment == IvTreatment.BINARY) or csv_pipeline == CsvPipeline.BINARY_TML:
        family = (OR, IPW, DR, TWOSLS)
    else:
        family = (OR, GPS_IPW, DR_DENSITY, DR_KERNEL, TWOSLS)
    return tuple(e for e in family if spec.cfg.wants(e))


@dataclass(frozen=True, eq=False)
class ReplicatePlan:
    """Inputs shared by every replicate: fixed evaluation grids, truths and user data."""

    pairs: Tuple[ThresholdPair, ...] = ()
    doses: Tuple[float, ...] = ()
    truths: Dict[TruthKey, OracleTruth] = field(default_factory=dict)
    user_data: Optional[Dataset] = None
    csv_pipeline: Optional[CsvPipeline] = None


@dataclass(frozen=True, eq=False)
class ReplicateResult:
    replicate: int
    seed: int
    records: List[Dict[str, Any]]
    failures: List[Dict[str, Any]]
    width_reductions: List[Dict[str, Any]] = field(default_factory=list)
    latent: Optional[Dict[str, Any]] = None
    latent_scatter: Optional[List[List[float]]] = None


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    spec: Dict[str, Any]
    truths: List[Dict[str, Any]]
    replicates: pd.DataFrame
    aggregates: pd.DataFrame
    failures: List[Dict[str, Any]]
    width_reductions: List[Dict[str, Any]]
    latent: List[Dict[str, Any]]
    latent_scatter: List[List[float]]
    seeds: List[int]
    estimators: Tuple[str, ...]
    wall_seconds: float = 0.0


def _record(r: int, seed: int, estimator: str, target: str, **values: Any) -> Dict[str, Any]:
    out: Dict[str, Any] = {c: None for c in REPLICATE_COLUMNS}
    out.update(replicate=r, seed=seed, estimator=estimator, target=target)
    out.update(values)
    return out


def _truth_value(plan: ReplicatePlan, target: Optional[OracleTarget], y1: float, y0: float) -> Optional[float]:
    if target is None:
        return None
    truth = plan.truths.get((target.value, y1, y0))
    return None if truth is None else truth.value


def bound_records(r: int, seed: int, estimates: Sequence[BoundEstimate], plan: ReplicatePlan) -> List[Dict[str, Any]]:
    out = []
    for e in estimates:
        estimator, side, target, smooth_target = _BOUND_TARGETS[e.kind]
        truth = _truth_value(plan, target, e.y1, e.y0)
        smooth = _truth_value(plan, smooth_target, e.y1, e.y0) if smooth_target is not None else truth
        out.append(
            _record(r, seed, estimator, side, y1=e.y1, y0=e.y0, value=e.value, raw=e.raw, se=e.se, ci_lo=e.ci_lo, ci_hi=e.ci_hi, truth=truth, smooth_truth=smooth)
        )
    return out


def _width_reductions(r: int, estimates: Sequence[BoundEstimate], plan: ReplicatePlan) -> List[Dict[str, Any]]:
    """Marginal minus conditional width per threshold pair, conditional from DR-smooth when both sides ran."""
    by_pair: Dict[ThresholdPair, Dict[BoundKind, float]] = {}
    for e in estimates:
        by_pair.setdefault((e.y1, e.y0), {})[e.kind] = e.value
    out = []
    for (y1, y0), kinds in by_pair.items():
        if BoundKind.MARGINAL_L not in kinds or BoundKind.MARGINAL_U not in kinds:
            continue
        marginal = (kinds[BoundKind.MARGINAL_L], kinds[BoundKind.MARGINAL_U])
        if BoundKind.DR_SMOOTH_L in kinds and BoundKind.DR_SMOOTH_U in kinds:
            conditional = (kinds[BoundKind.DR_SMOOTH_L], kinds[BoundKind.DR_SMOOTH_U])
        elif BoundKind.PLUGIN_L in kinds and BoundKind.PLUGIN_U in kinds:
            conditional = (kinds[BoundKind.PLUGIN_L], kinds[BoundKind.PLUGIN_U])
        else:
            continue
        out.append(
            {
                "replicate": r,
                "y1": y1,
                "y0": y0,
                "value": width_reduction(marginal, conditional),
                "truth": _truth_value(plan, OracleTarget.WIDTH_REDUCTION, y1, y0),
            }
        )
    return out


def _mean_truth(dgp: Optional[DgpSpec], estimate: TmlEstimate, dose: Optional[float]) -> Optional[float]:
    if not isinstance(dgp, IvDgpSpec):
        return None
    target = estimate.target
    if target.kind == TargetKind.DOSE_CURVE:
        return dose_response(dgp, float(dose))
    elif target.kind == TargetKind.POTENTIAL_MEAN:
        return dose_response(dgp, float(target.a))
    return dose_response(dgp, float(target.a)) - dose_response(dgp, float(target.a_ref))


def tml_records(r: int, seed: int, estimates: Sequence[TmlEstimate], dgp: Optional[DgpSpec]) -> List[Dict[str, Any]]:
    out = []
    for e in estimates:
        doses = e.doses if e.doses is not None else [None] * len(e.values)
        for dose, value, se, lo, hi in zip(doses, e.values, e.ses, e.ci_lo, e.ci_hi):
            truth = _mean_truth(dgp, e, dose)
            out.append(
                _record(
                    r,
                    seed,
                    e.estimator,
                    e.target.label,
                    dose=None if dose is None else float(dose),
                    value=float(value),
                    raw=float(value),
                    se=float(se),
                    ci_lo=float(lo),
                    ci_hi=float(hi),
                    truth=truth,
                    smooth_truth=truth,
                )
            )
    return out


def _replicate_grid(a: np.ndarray, doses: Sequence[float]) -> DoseGrid:
    return DoseGrid(doses=tuple(doses), bandwidth=silverman_bandwidth(float(np.std(a, ddof=1)), len(a)))


def _latent_diagnostics(r: int, latent: Optional[np.ndarray], confounder: np.ndarray, s: Optional[np.ndarray], seed: int):
    """|corr(ẑ, Z_C)| and the HSIC permutation p-value of (ẑ, S) on a row subsample."""
    if latent is None or np.isnan(latent).any():
        return None, None
    z_hat = latent[:, 0]
    corr = float(np.corrcoef(z_hat, confounder)[0, 1])
    p_value = None
    if s is not None:
        idx = np.unique(np.linspace(0, len(z_hat) - 1, min(len(z_hat), LATENT_HSIC_POINTS)).astype(np.int64))
        p_value = permutation_test(z_hat[idx], s[idx], seed=seed).p_value
    scatter = None
    if r == 0:
        idx = np.unique(np.linspace(0, len(z_hat) - 1, min(len(z_hat), LATENT_SCATTER_POINTS)).astype(np.int64))
        scatter = [[float(c), float(z)] for c, z in zip(confounder[idx], z_hat[idx])]
    return {"replicate": r, "correlation": corr, "abs_correlation": abs(corr), "hsic_p_value": p_value}, scatter


class _LatentCapture:
    """Wraps a TML runner and keeps the latent score of the first split."""

    def __init__(self, runner: Callable[[Dataset, RunConfig, int], TmlRun]):
        self.runner = runner
        self.latent: Optional[np.ndarray] = None

    def __call__(self, data: Dataset, cfg: RunConfig, seed: int) -> TmlRun:
        run = self.runner(data, cfg, seed)
        if self.latent is None:
            self.latent = run.latent
        return run


def _ate_runner(representation: Optional[np.ndarray], grid: Optional[DoseGrid]) -> Callable[[Dataset, RunConfig, int], TmlRun]:
    def run(data: Dataset, cfg: RunConfig, seed: int) -> TmlRun:
        if data.is_binary:
            return run_tml_binary(data, cfg, seed, representation)
        curves = run_tml_continuous(data, cfg, seed, grid=grid, representation=representation)
        return TmlRun(estimates=tuple(continuous_ate(curves)), latent=curves.latent, logs=curves.logs)

    return run


def _dose_runner(representation: Optional[np.ndarray], grid: DoseGrid) -> Callable[[Dataset, RunConfig, int], TmlRun]:
    def run(data: Dataset, cfg: RunConfig, seed: int) -> TmlRun:
        return run_tml_continuous(data, cfg, seed, grid=grid, representation=representation)

    return run


def _run_simulated(spec: ExperimentSpec, plan: ReplicatePlan, r: int, seed: int, sim: SimulatedData, stage: List[str]) -> ReplicateResult:
    cfg = spec.cfg
    data = sim.dataset
    dgp = spec.dgp(seed)
    fit_seed = mix_seed(seed, 1)
    records: List[Dict[str, Any]] = []
    widths: List[Dict[str, Any]] = []
    latent_entry, scatter = None, None

    if spec.kind == ExperimentKind.BOUNDS_SIM:
        stage[0] = "bounds"
        per_point = (lambda pair: oracle_per_point(dgp, sim, *pair)) if spec.oracle_nuisance else None
        result = estimate_bounds(data, cfg, seed=fit_seed, pairs=plan.pairs, per_point=per_point)
        records = bound_records(r, seed, result.estimates, plan)
        widths = _width_reductions(r, result.estimates, plan)
        return ReplicateResult(replicate=r, seed=seed, records=records, failures=[], width_reductions=widths)

    z_c = sim.side["z_c"].to_numpy()
    representation = z_c if spec.oracle_representation else None
    if spec.kind == ExperimentKind.BOUNDS_ON_REP:
        stage[0] = "bounds_on_rep"
        result = run_tml_bounds(data, cfg, fit_seed, representation=representation, pairs=plan.pairs)
        records = bound_records(r, seed, result.estimates, plan)
        widths = _width_reductions(r, result.estimates, plan)
        return ReplicateResult(replicate=r, seed=seed, records=records, failures=[], width_reductions=widths)

    grid = _replicate_grid(data.a, plan.doses) if plan.doses else None
    if spec.kind == ExperimentKind.IV_ATE_SIM:
        capture = _LatentCapture(_ate_runner(representation, grid))
    else:
        assert grid is not None
        capture = _LatentCapture(_dose_runner(representation, grid))
    stage[0] = "tml"
    estimates = run_with_splits(data, cfg, capture, fit_seed)
    if cfg.wants(TWOSLS) and spec.kind == ExperimentKind.IV_ATE_SIM:
        stage[0] = "twosls"
        estimates.append(twosls_baseline(data))
    records = tml_records(r, seed, estimates, dgp)
    if not spec.oracle_representation:
        stage[0] = "latent"
        latent_entry, scatter = _latent_diagnostics(r, capture.latent, z_c, data.s, mix_seed(seed, 2))
    return ReplicateResult(replicate=r, seed=seed, records=records, failures=[], latent=latent_entry, latent_scatter=scatter)


def _run_user_csv(spec: ExperimentSpec, plan: ReplicatePlan, r: int, seed: int, stage: List[str]) -> ReplicateResult:
    data = plan.user_data
    assert data is not None
    cfg = spec.cfg
    fit_seed = mix_seed(seed, 1)
    if plan.csv_pipeline == CsvPipeline.BOUNDS:
        stage[0] = "bounds"
        result = estimate_bounds(data, cfg, seed=fit_seed, pairs=plan.pairs)
        return ReplicateResult(
            replicate=r,
            seed=seed,
            records=bound_records(r, seed, result.estimates, plan),
            failures=[],
            width_reductions=_width_reductions(r, result.estimates, plan),
        )

    representation = None if data.has_instrument else data.x
    stage[0] = "tml"
    if plan.csv_pipeline == CsvPipeline.BINARY_TML:
        runner = _ate_runner(representation, None)
    else:
        runner = _dose_runner(representation, _replicate_grid(data.a, plan.doses))
    estimates = run_with_splits(data, cfg, runner, fit_seed)
    if cfg.wants(TWOSLS) and data.has_instrument:
        stage[0] = "twosls"
        estimates.append(twosls_baseline(data))
    return ReplicateResult(replicate=r, seed=seed, records=tml_records(r, seed, estimates, None), failures=[])


def run_replicate(spec: ExperimentSpec, plan: ReplicatePlan, r: int) -> ReplicateResult:
    """One replicate; domain errors are recorded as failures instead of raised."""
    seed = spec.replicate_seed(r)
    stage = ["generate"]
    try:
        if spec.kind == ExperimentKind.USER_CSV:
            return _run_user_csv(spec, plan, r, seed, stage)
        sim = generate(spec.dgp(seed))
        return _run_simulated(spec, plan, r, seed, sim, stage)
    except CfDistError as e:
        logging.warning(f"Replicate {r} failed at {stage[0]}: {type(e).__name__}: {e}")
        failure = {"replicate": r, "stage": stage[0], "error": type(e).__name__, "message": str(e)}
        return ReplicateResult(replicate=r, seed=seed, records=[], failures=[failure])


def csv_pipeline_for(data: Dataset) -> CsvPipeline:
    if data.has_instrument:
        return CsvPipeline.BINARY_TML if data.is_binary else CsvPipeline.CONTINUOUS_TML
    if data.is_binary:
        return CsvPipeline.BOUNDS
    if data.d == 0:
        raise MissingInstrument("A continuous treatment needs an instrument column s or covariate columns")
    return CsvPipeline.CONTINUOUS_TML


def _bound_truths(spec: ExperimentSpec, pairs: Sequence[ThresholdPair]) -> Dict[TruthKey, OracleTruth]:
    dgp = spec.dgp(spec.cfg.seed)
    truth_seed = mix_seed(spec.cfg.seed, TRUTH_STREAM)
    truths = {}
    for y1, y0 in pairs:
        for target in _BOUND_ORACLE_TARGETS:
            query = OracleQuery(target=target, y1=y1, y0=y0, t=spec.cfg.smoothing_t)
            truths[(target.value, y1, y0)] = oracle_truth(dgp, query, spec.cfg.n_mc, truth_seed)
    logging.info(f"Computed {len(truths)} oracle truths with n_mc={spec.cfg.n_mc}")
    return truths


def prepare_plan(spec: ExperimentSpec) -> ReplicatePlan:
    """Fixes threshold pairs and dose grids from a large pilot draw so every replicate shares them."""
    cfg = spec.cfg
    if spec.kind == ExperimentKind.USER_CSV:
        assert spec.csv_path is not None
        data = read_csv(spec.csv_path)
        pipeline = csv_pipeline_for(data)
        if pipeline == CsvPipeline.BOUNDS:
            return ReplicatePlan(pairs=threshold_pairs(data.y, cfg), user_data=data, csv_pipeline=pipeline)
        doses = make_dose_grid(data.a, cfg).doses if pipeline == CsvPipeline.CONTINUOUS_TML else ()
        return ReplicatePlan(doses=doses, user_data=data, csv_pipeline=pipeline)

    pilot_dgp = replace(spec.dgp(mix_seed(cfg.seed, PILOT_STREAM)), n=max(spec.rows, PILOT_ROWS))
    pilot = generate(pilot_dgp).dataset
    if spec.kind in (ExperimentKind.BOUNDS_SIM, ExperimentKind.BOUNDS_ON_REP):
        pairs = threshold_pairs(pilot.y, cfg)
        return ReplicatePlan(pairs=pairs, truths=_bound_truths(spec, pairs))
    if spec.kind == ExperimentKind.IV_ATE_SIM:
        doses: Tuple[float, ...] = () if spec.treatment == IvTreatment.BINARY else (0.0, 1.0)
        return ReplicatePlan(doses=doses)
    return ReplicatePlan(doses=make_dose_grid(pilot.a, cfg).doses)


def aggregate_records(replicates: pd.DataFrame) -> pd.DataFrame:
    """Bias, se = sd(est), mse = bias² + se², mean squared error and coverage per estimand.

    Coverage is measured against the smoothed truth. Rows without a truth get
    counts and se only.
    """
    if replicates.empty:
        return pd.DataFrame(columns=AGGREGATE_COLUMNS)
    rows = []
    for key, group in replicates.groupby(GROUP_COLUMNS, dropna=False, sort=True):
        values = group["value"].to_numpy(dtype=np.float64)
        truth = group["truth"].to_numpy(dtype=np.float64)
        count = len(values)
        se = float(np.std(values, ddof=1)) if count > 1 else 0.0
        row: Dict[str, Any] = dict(zip(GROUP_COLUMNS, key))
        row.update(count=count, truth=np.nan, bias=np.nan, se=se, mse=np.nan, mean_sq_error=np.nan, coverage=np.nan)
        if np.all(np.isfinite(truth)):
            err = values - truth
            bias = float(np.mean(err))
            smooth = group["smooth_truth"].to_numpy(dtype=np.float64)
            lo, hi = group["ci_lo"].to_numpy(dtype=np.float64), group["ci_hi"].to_numpy(dtype=np.float64)
            row.update(
                truth=float(np.mean(truth)),
                bias=bias,
                mse=bias**2 + se**2,
                mean_sq_error=float(np.mean(err**2)),
                coverage=float(np.mean((lo <= smooth) & (smooth <= hi))),
            )
        rows.append(row)
    return pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)


def replicates_frame(records: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    frame = pd.DataFrame(list(records), columns=REPLICATE_COLUMNS)
    for column in REPLICATE_COLUMNS[4:]:
        frame[column] = frame[column].astype(np.float64)
    return frame


def _missing_estimators(estimators: Sequence[str], aggregates: pd.DataFrame) -> List[Dict[str, Any]]:
    seen = set(aggregates["estimator"]) if not aggregates.empty else set()
    return [
        {"replicate": None, "stage": "report", "error": "NoEstimates", "message": f"Estimator {e} produced no estimates"}
        for e in estimators
        if e not in seen
    ]


@logged_exec_time
def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Runs every replicate (on `spec.jobs` workers), then sorts and aggregates by replicate index."""
    start = time.time()
    plan = prepare_plan(spec)
    estimators = pipeline_estimators(spec, plan.csv_pipeline)
    if plan.user_data is not None and not plan.user_data.has_instrument:
        estimators = tuple(e for e in estimators if e != TWOSLS)
    logging.info(f"Running {spec.replications} replicates of {spec.kind.value} with estimators {', '.join(estimators)}")

    results: List[ReplicateResult] = Parallel(n_jobs=spec.jobs)(delayed(run_replicate)(spec, plan, r) for r in range(spec.replications))
    results = sorted(results, key=lambda res: res.replicate)

    failures = [f for res in results for f in res.failures]
    replicates = replicates_frame([rec for res in results for rec in res.records])
    aggregates = aggregate_records(replicates)
    failures.extend(_missing_estimators(estimators, aggregates))
    if failures:
        logging.warning(f"{len(failures)} failures in {spec.kind.value}")

    truths = [
        {"target": target, "y1": y1, "y0": y0, **{k: v for k, v in asdict(truth).items() if k != "target"}}
        for (target, y1, y0), truth in sorted(plan.truths.items())
    ]
    scatter = next((res.latent_scatter for res in results if res.latent_scatter is not None), [])
    return ExperimentReport(
        spec=spec.to_dict(),
        truths=truths,
        replicates=replicates,
        aggregates=aggregates,
        failures=failures,
        width_reductions=[w for res in results for w in res.width_reductions],
        latent=[res.latent for res in results if res.latent is not None],
        latent_scatter=scatter,
        seeds=[res.seed for res in results],
        estimators=estimators,
        wall_seconds=time.time() - start,
    )
