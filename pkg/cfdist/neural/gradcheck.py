from typing import Callable, Sequence, Tuple

import numpy as np

Params = Tuple[np.ndarray, ...]


def numeric_grads(loss: Callable[[Params], float], params: Sequence[np.ndarray], h: float = 1e-5) -> Params:
    """Central finite differences of a scalar loss wrt every parameter entry."""
    params = tuple(np.array(p, dtype=np.float64, copy=True) for p in params)
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            original = p[idx]
            p[idx] = original + h
            up = loss(params)
            p[idx] = original - h
            down = loss(params)
            p[idx] = original
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return tuple(grads)


def max_relative_error(analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray], floor: float = 1e-8) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)) if a.size else 0.0)
    return worst
