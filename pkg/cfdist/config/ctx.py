import logging
import sys
from functools import cached_property, wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional, TypeVar, Union

import click
import typer

from .config import RunConfig
from .constants import CfDistError
from .paths import get_default_log_path, get_default_run_dir


class CfContext(typer.Context):
    from ..io.base import CfDistIO

    _io: Optional[CfDistIO] = None

    def __init__(
        self,
        command: click.Command,
        *,
        config_file: str,
        run_params: Dict[str, Any],
        out: Optional[str],
        n: Optional[int],
        jobs: int,
        explicit_reps: bool,
        debug: bool,
        log_file_path: Optional[str],
        parent: Optional[typer.Context] = None,
        **kwargs,
    ):
        super().__init__(command, parent=parent, **kwargs)
        self.config_file = config_file
        self.run_params = run_params
        self.out = out
        self.n = n
        self.jobs = jobs
        self.explicit_reps = explicit_reps

        # Basic Configuration
        self.debug = debug
        self.log_file_path = Path(log_file_path).resolve() if log_file_path else get_default_log_path()

    @cached_property
    def run_config(self) -> RunConfig:
        return RunConfig.from_params(self.run_params)

    def out_dir(self, command: str) -> Path:
        return Path(self.out) if self.out else get_default_run_dir(command)

    def replications(self, tml: bool) -> int:
        """--reps when given explicitly, otherwise the configured count for the pipeline."""
        cfg = self.run_config
        if tml and not self.explicit_reps:
            return cfg.tml_replications
        return cfg.replications

    @property
    def io(self) -> CfDistIO:
        from ..io.base import StdIO

        if not self._io:
            if sys.stdout.isatty():
                from ..io.cli import CliIO

                self._io = CliIO()
            else:
                self._io = StdIO()

        return self._io


def get_ctx(typer_ctx: Union[typer.Context, CfContext]) -> CfContext:
    if isinstance(typer_ctx, CfContext):
        return typer_ctx

    ctx = typer_ctx.obj
    assert isinstance(ctx, CfContext)
    return ctx


T = TypeVar("T", bound=Callable[..., Any])


def cf_context(func: T) -> T:
    """
    Decorator that converts a typer.Context argument to CfContext and maps
    domain errors to the CLI exit codes. Expects first argument to be the context.
    """

    @wraps(func)
    def wrapper(ctx, *args, **kwargs):
        if not isinstance(ctx, CfContext):
            ctx = ctx.obj
        assert isinstance(ctx, CfContext), f"Context must be CfContext, got {type(ctx)}"
        try:
            return func(ctx, *args, **kwargs)
        except CfDistError as e:
            logging.exception(f"{func.__name__} failed")
            if ctx.debug:
                raise
            typer.echo(f"Error ({type(e).__name__}): {e}", err=True)
            raise typer.Exit(code=e.exit_code)

    return wrapper  # type: ignore
