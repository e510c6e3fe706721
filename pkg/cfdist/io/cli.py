import logging
from contextlib import contextmanager
from typing import Any, Generator, Optional

import pandas as pd
from rich.console import Console
from rich.table import Table
from rich.text import Text

from .base import TABLE_COLUMNS, CfDistIO

SYSTEM_COLOR = "#9ACD32"
WARNING_COLOR = "yellow"
HEADER_COLOR = "cyan"


def _cell(value: Any) -> str:
    if value is None or (isinstance(value, float) and pd.isna(value)):
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


class CliIO(CfDistIO):
    def __init__(self, console: Optional[Console] = None) -> None:
        self.console = console or Console()

    def print(self, message) -> None:
        self.console.print(message)

    def sys_message(self, message: str) -> None:
        self.console.print(Text(message, style=SYSTEM_COLOR))

    def notify_warning(self, message: str) -> None:
        logging.warning(message)
        self.console.print(Text(message, style=WARNING_COLOR))

    def show_aggregates(self, aggregates: pd.DataFrame, title: str) -> None:
        table = Table(title=title, header_style=f"bold {HEADER_COLOR}")
        columns = [c for c in TABLE_COLUMNS if c in aggregates.columns]
        for column in columns:
            table.add_column(column, justify="left" if column in ("estimator", "target") else "right")
        for row in aggregates.reindex(columns=columns).itertuples(index=False):
            table.add_row(*[_cell(v) for v in row])
        self.console.print(table)

    @contextmanager
    def status(self, message: str) -> Generator[None, None, None]:
        logging.info(message)
        with self.console.status(f"[{SYSTEM_COLOR}]{message}[/]"):
            yield
        self.console.print(f"[{SYSTEM_COLOR}]Done![/]")
