import logging
from abc import ABC, abstractmethod
from contextlib import contextmanager
from typing import Any, Generator

import pandas as pd

# Columns shown in the aggregate table, in order
TABLE_COLUMNS = ["estimator", "target", "y1", "y0", "dose", "count", "truth", "bias", "se", "mse", "coverage"]


class CfDistIO(ABC):
    @abstractmethod
    def print(self, message: Any) -> None:
        raise NotImplementedError

    @abstractmethod
    def sys_message(self, message: str) -> None:
        raise NotImplementedError

    @abstractmethod
    def notify_warning(self, message: str) -> None:
        raise NotImplementedError

    @abstractmethod
    def show_aggregates(self, aggregates: pd.DataFrame, title: str) -> None:
        raise NotImplementedError

    @contextmanager
    def status(self, message: str) -> Generator[None, None, None]:
        logging.info(message)
        yield


class StdIO(CfDistIO):
    """
    IO which emits plain text to stdout.
    """

    def print(self, message: Any):
        print(message)

    def sys_message(self, message: str) -> None:
        logging.info(message)
        print(message)

    def notify_warning(self, message: str) -> None:
        logging.warning(message)

    def show_aggregates(self, aggregates: pd.DataFrame, title: str) -> None:
        print(title)
        if aggregates.empty:
            print("(no estimates)")
        else:
            print(aggregates.reindex(columns=TABLE_COLUMNS).to_string(index=False, float_format=lambda v: f"{v:.4f}"))
