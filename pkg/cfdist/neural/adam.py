from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..config.constants import ShapeMismatch

Params = Tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class AdamState:
    m: Params
    v: Params
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: Sequence[np.ndarray], lr: float = 1e-3) -> AdamState:
    return AdamState(m=tuple(np.zeros_like(p) for p in params), v=tuple(np.zeros_like(p) for p in params), step=0, lr=lr)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState) -> Tuple[Params, AdamState]:
    if len(params) != len(grads) or len(params) != len(state.m) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ShapeMismatch("Adam parameters, gradients and moments must share shapes")
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = tuple(b1 * mi + (1 - b1) * g for mi, g in zip(state.m, grads))
    v = tuple(b2 * vi + (1 - b2) * g * g for vi, g in zip(state.v, grads))
    c1, c2 = 1 - b1**step, 1 - b2**step
    new_params = tuple(p - state.lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps) for p, mi, vi in zip(params, m, v))
    return new_params, AdamState(m=m, v=v, step=step, lr=state.lr, beta1=b1, beta2=b2, eps=state.eps)
