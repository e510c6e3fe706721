import logging
import time
from functools import partial, wraps
from typing import Any, Callable, Optional, TypeVar

import numpy as np

T = TypeVar("T")


def logged_exec_time(func: Callable[..., T], name: Optional[str] = None) -> Callable[..., T]:
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        result = func(*args, **kwargs)
        elapsed_time = time.time() - start_time

        if name:
            func_name = name
        else:
            func_name = func.__name__ if not isinstance(func, partial) else func.func.__name__

        logging.info(f"Function '{func_name}' executed in {elapsed_time:.4f} seconds")
        return result

    return wrapper


def to_jsonable(value: Any) -> Any:
    """Converts numpy scalars/arrays, tuples and enums into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    elif isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    elif isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    elif isinstance(value, np.integer):
        return int(value)
    elif isinstance(value, np.floating):
        return finite_or_none(float(value))
    elif isinstance(value, float):
        return finite_or_none(value)
    elif hasattr(value, "value") and hasattr(value, "name") and not isinstance(value, (str, int)):
        return value.value
    else:
        return value


def finite_or_none(value: float) -> Optional[float]:
    return value if np.isfinite(value) else None
