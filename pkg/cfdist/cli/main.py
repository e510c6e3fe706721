import logging
import sys
from typing import List, Optional

import typer
from click.core import ParameterSource
from toolz import merge, pipe
from toolz.curried import keyfilter

from .. import __version__
from ..bench.experiment import ExperimentKind, ExperimentSpec, run_experiment
from ..bench.report import emit_report
from ..config.config import RunConfig
from ..config.constants import CONFIG_FILE_KEY, ConfigError
from ..config.ctx import CfContext, cf_context
from ..config.paths import get_default_config_path
from ..logging_config import setup_logging
from ..sim.dgp import BoundsDgpSpec, BoundsVariant, IvDgpSpec, IvOutcome, IvTreatment
from ..sim.oracle import OracleQuery, OracleTarget, oracle_truth
from ..utils.utils import to_jsonable
from .options import CliOption, get_config_params

RUN_PANEL = "Run Configuration"
NUISANCE_PANEL = "Nuisance Learners"
EXPERIMENT_PANEL = "Experiment Size"

# Parameters of `common` that are not RunConfig fields
AMBIENT_PARAMS = ["config_file", "out", "n", "jobs", "debug", "log_file_path"]

app = typer.Typer(
    help="Counterfactual distribution bounds and triple machine learning",
    context_settings={
        "obj": {},
    },
    no_args_is_help=True,
)


@app.callback()
def common(
    ctx: typer.Context,
    config_file: str = typer.Option(
        get_default_config_path(),
        "--config",
        envvar="CFDIST_CONFIG_FILE",
        is_eager=True,
        help="Path to a YAML or JSON configuration file. Values override defaults but are overridden by explicit flags or environment variables.",
        rich_help_panel=RUN_PANEL,
    ),
    seed: int = CliOption("seed", "--seed", help="Base seed; replicate r uses a seed derived from (seed, r).", rich_help_panel=RUN_PANEL),
    k_folds: int = CliOption("k_folds", "--k-folds", help="Folds for triple cross-fitting, divisible by 3.", rich_help_panel=RUN_PANEL),
    bounds_folds: int = CliOption("bounds_folds", "--bounds-folds", help="Cross-fitting folds for the bounds pipeline.", rich_help_panel=RUN_PANEL),
    smoothing_t: float = CliOption("smoothing_t", "--smoothing-t", help="Smoothing parameter of the DR-smooth bounds.", rich_help_panel=RUN_PANEL),
    clip_eps: float = CliOption("clip_eps", "--clip-eps", help="Propensity clipping level.", rich_help_panel=RUN_PANEL),
    splits: int = CliOption("splits", "--splits", help="Independent split seeds aggregated per estimate.", rich_help_panel=RUN_PANEL),
    estimators: List[str] = CliOption("estimators", "--estimator", help="Estimators to run; repeat the flag to select several.", rich_help_panel=RUN_PANEL),
    threshold_quantiles: List[float] = CliOption(
        "threshold_quantiles", "--threshold-quantile", help="Outcome quantiles forming the (y1, y0) grid.", rich_help_panel=RUN_PANEL
    ),
    dose_grid_points: int = CliOption("dose_grid_points", "--dose-grid-points", help="Points in the default dose grid.", rich_help_panel=RUN_PANEL),
    n_mc: int = CliOption("n_mc", "--n-mc", help="Monte Carlo draws for oracle truths.", rich_help_panel=RUN_PANEL),
    feature_degree: int = CliOption("feature_degree", "--feature-degree", help="Polynomial degree of nuisance features.", rich_help_panel=NUISANCE_PANEL),
    ridge_penalty: float = CliOption("ridge_penalty", "--ridge-penalty", help="Ridge penalty per training row.", rich_help_panel=NUISANCE_PANEL),
    logistic_c: float = CliOption("logistic_c", "--logistic-c", help="Inverse L2 strength of logistic fits.", rich_help_panel=NUISANCE_PANEL),
    logistic_tol: float = CliOption("logistic_tol", "--logistic-tol", help="Logistic solver tolerance.", rich_help_panel=NUISANCE_PANEL),
    logistic_max_iter: int = CliOption("logistic_max_iter", "--logistic-max-iter", help="Logistic solver iteration cap.", rich_help_panel=NUISANCE_PANEL),
    gps_trim_quantile: float = CliOption(
        "gps_trim_quantile", "--gps-trim-quantile", help="In-sample GPS quantile used as the density floor.", rich_help_panel=NUISANCE_PANEL
    ),
    replications: int = CliOption("replications", "--reps", help="Replicates per experiment.", rich_help_panel=EXPERIMENT_PANEL),
    tml_replications: int = CliOption(
        "tml_replications", "--tml-reps", help="Replicates for experiments that train the IV-VAE, unless --reps is given.", rich_help_panel=EXPERIMENT_PANEL
    ),
    n: Optional[int] = CliOption("n", "--n", help="Rows per simulated replicate.", rich_help_panel=EXPERIMENT_PANEL),
    jobs: int = CliOption("jobs", "--jobs", help="Parallel replicate workers.", rich_help_panel=EXPERIMENT_PANEL),
    out: Optional[str] = CliOption("out", "--out", help="Output directory for report files.", rich_help_panel=EXPERIMENT_PANEL),
    debug: bool = CliOption("debug", "--debug", help="Re-raise errors with tracebacks and log at DEBUG level.", rich_help_panel="Basic Configuration"),
    log_file_path: Optional[str] = CliOption("log_file_path", "--log-file-path", help="Where to write logs.", rich_help_panel="Logging"),
):
    """Common parameters."""

    explicit_reps = ctx.get_parameter_source("replications") in (ParameterSource.COMMANDLINE, ParameterSource.ENVIRONMENT)
    params = merge(get_config_params(ctx.params.get(CONFIG_FILE_KEY)), ctx.params)

    ctx.obj = pipe(
        params,
        keyfilter(lambda k: k in AMBIENT_PARAMS),
        dict,
        lambda x: CfContext(
            ctx.command,
            parent=ctx,
            run_params=keyfilter(lambda k: k in RunConfig.field_names(), params),
            explicit_reps=explicit_reps,
            **x,
        ),
    )

    setup_logging(str(ctx.obj.log_file_path), ctx.obj.debug)


def _run_and_report(ctx: CfContext, spec: ExperimentSpec, command: str) -> None:
    out_dir = ctx.out_dir(command)
    with ctx.io.status(f"Running {spec.replications} replicates of {spec.kind.value}"):
        report = run_experiment(spec)
    emit_report(report, out_dir)
    ctx.io.show_aggregates(report.aggregates, title=f"{command}: {spec.replications} replicates")
    for failure in report.failures:
        ctx.io.notify_warning(f"Replicate {failure['replicate']} failed at {failure['stage']}: {failure['error']}: {failure['message']}")
    ctx.io.sys_message(f"Report written to {out_dir}")


@app.command(name="sim-bounds")
@cf_context
def sim_bounds(
    ctx: CfContext,
    variant: BoundsVariant = typer.Option(BoundsVariant.LINEAR, help="Outcome model of the covariate design."),
    oracle_nuisance: bool = typer.Option(False, "--oracle-nuisance", help="Use the exact θ and π instead of cross-fitted ones."),
):
    """Bounds estimators on the two-covariate designs against Monte Carlo truths."""
    spec = ExperimentSpec(
        kind=ExperimentKind.BOUNDS_SIM,
        cfg=ctx.run_config,
        replications=ctx.replications(tml=False),
        n=ctx.n,
        variant=variant,
        oracle_nuisance=oracle_nuisance,
        jobs=ctx.jobs,
    )
    _run_and_report(ctx, spec, "sim-bounds")


@app.command(name="sim-iv-ate")
@cf_context
def sim_iv_ate(
    ctx: CfContext,
    outcome: IvOutcome = typer.Option(IvOutcome.LINEAR, help="Outcome model of the instrument design."),
    treatment: IvTreatment = typer.Option(IvTreatment.BINARY, help="Binary or continuous treatment."),
    oracle_representation: bool = typer.Option(False, "--oracle-representation", help="Use the true confounder instead of training the IV-VAE."),
):
    """TML average treatment effects and the 2SLS baseline on the instrument designs."""
    spec = ExperimentSpec(
        kind=ExperimentKind.IV_ATE_SIM,
        cfg=ctx.run_config,
        replications=ctx.replications(tml=True),
        n=ctx.n,
        outcome=outcome,
        treatment=treatment,
        oracle_representation=oracle_representation,
        jobs=ctx.jobs,
    )
    _run_and_report(ctx, spec, "sim-iv-ate")


@app.command(name="sim-dose")
@cf_context
def sim_dose(
    ctx: CfContext,
    outcome: IvOutcome = typer.Option(IvOutcome.LINEAR, help="Outcome model of the instrument design."),
    oracle_representation: bool = typer.Option(False, "--oracle-representation", help="Use the true confounder instead of training the IV-VAE."),
):
    """Dose-response curves on the continuous-treatment instrument design."""
    spec = ExperimentSpec(
        kind=ExperimentKind.DOSE_SIM,
        cfg=ctx.run_config,
        replications=ctx.replications(tml=True),
        n=ctx.n,
        outcome=outcome,
        oracle_representation=oracle_representation,
        jobs=ctx.jobs,
    )
    _run_and_report(ctx, spec, "sim-dose")


@app.command(name="bounds-on-rep")
@cf_context
def bounds_on_rep(
    ctx: CfContext,
    outcome: IvOutcome = typer.Option(IvOutcome.LINEAR, help="Outcome model of the binary instrument design."),
    oracle_representation: bool = typer.Option(False, "--oracle-representation", help="Use the true confounder instead of training the IV-VAE."),
):
    """Conditional bounds with nuisances fitted on the learned latent score."""
    spec = ExperimentSpec(
        kind=ExperimentKind.BOUNDS_ON_REP,
        cfg=ctx.run_config,
        replications=ctx.replications(tml=True),
        n=ctx.n,
        outcome=outcome,
        oracle_representation=oracle_representation,
        jobs=ctx.jobs,
    )
    _run_and_report(ctx, spec, "bounds-on-rep")


@app.command(name="fit-csv")
@cf_context
def fit_csv(
    ctx: CfContext,
    path: str = typer.Argument(..., help="CSV with columns y, a, optional s and x1..xd."),
):
    """Runs the pipeline matching a user table: bounds without an instrument, TML with one."""
    spec = ExperimentSpec(
        kind=ExperimentKind.USER_CSV,
        cfg=ctx.run_config,
        replications=ctx.run_config.replications if ctx.explicit_reps else 1,
        csv_path=path,
        jobs=ctx.jobs,
    )
    _run_and_report(ctx, spec, "fit-csv")


@app.command(name="oracle")
@cf_context
def oracle(
    ctx: CfContext,
    target: OracleTarget = typer.Option(..., help="Estimand to evaluate."),
    dgp: str = typer.Option("bounds", help="Design family: bounds or iv."),
    variant: BoundsVariant = typer.Option(BoundsVariant.LINEAR, help="Outcome model of the covariate design."),
    outcome: IvOutcome = typer.Option(IvOutcome.LINEAR, help="Outcome model of the instrument design."),
    treatment: IvTreatment = typer.Option(IvTreatment.BINARY, help="Treatment of the instrument design."),
    y1: float = typer.Option(0.0, help="Threshold for Y(1)."),
    y0: float = typer.Option(0.0, help="Threshold for Y(0)."),
    arm: int = typer.Option(1, help="Arm of a marginal CDF."),
    dose: float = typer.Option(0.0, help="Dose of a dose-curve point."),
    t: Optional[float] = typer.Option(None, help="Smoothing parameter, or the gap of a margin-curve point. Defaults to --smoothing-t."),
):
    """Prints the ground-truth value of an estimand under a simulation design."""
    cfg = ctx.run_config
    if dgp == "bounds":
        spec = BoundsDgpSpec(variant=variant, n=2, seed=cfg.seed)
    elif dgp == "iv":
        spec = IvDgpSpec(outcome=outcome, treatment=treatment, n=2, seed=cfg.seed)
    else:
        raise ConfigError(f"Unknown design family {dgp}. Valid options are: bounds, iv")
    query = OracleQuery(target=target, y1=y1, y0=y0, arm=arm, dose=dose, t=cfg.smoothing_t if t is None else t)
    truth = oracle_truth(spec, query, cfg.n_mc, cfg.seed)
    ctx.io.print(f"{truth.target}\tvalue={truth.value:.10g}\tmc_se={truth.mc_se:.3g}\tmethod={truth.method.value}")


@app.command(name="show-config")
@cf_context
def show_config(ctx: CfContext):
    """Shows the resolved run configuration and exits."""
    ambient = {
        "config_file": str(ctx.config_file),
        "out": ctx.out,
        "n": ctx.n,
        "jobs": ctx.jobs,
        "debug": ctx.debug,
        "log_file_path": str(ctx.log_file_path),
    }
    ctx.io.print(ctx.run_config.to_json())
    for key, value in to_jsonable(ambient).items():
        ctx.io.print(f"{key}: {value}")


@app.command()
def version():
    """Show version and exit."""
    typer.echo(f"cfdist version: {__version__}")
    raise typer.Exit()


def main():
    try:
        app()
    except ConfigError as e:
        # config files are read while options resolve, before any command runs
        logging.error(f"Configuration error: {e}")
        typer.echo(f"Error ({type(e).__name__}): {e}", err=True)
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
