import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..config.constants import NonFiniteLoss, ShapeMismatch

Params = Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class Cache:
    """Layer inputs and hidden post-activations from one forward pass."""

    inputs: Tuple[np.ndarray, ...]
    activations: Tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class Mlp:
    """tanh hidden layers, identity output. Params are [W0, b0, W1, b1, ...] with W of shape (in, out)."""

    sizes: Tuple[int, ...]
    params: Params

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise ShapeMismatch(f"Mlp needs at least input and output sizes, got {self.sizes}")
        expected = [shape for i, o in zip(self.sizes[:-1], self.sizes[1:]) for shape in ((i, o), (o,))]
        actual = [p.shape for p in self.params]
        if actual != expected:
            raise ShapeMismatch(f"Parameter shapes {actual} do not chain for sizes {self.sizes}")

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def weights(self) -> List[np.ndarray]:
        return list(self.params[0::2])

    @property
    def biases(self) -> List[np.ndarray]:
        return list(self.params[1::2])

    def with_params(self, params: Sequence[np.ndarray]) -> "Mlp":
        return Mlp(sizes=self.sizes, params=tuple(params))

    def to_json(self) -> str:
        return json.dumps(
            {
                "sizes": list(self.sizes),
                "shapes": [list(p.shape) for p in self.params],
                "params": flatten(self.params).tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Mlp":
        payload = json.loads(text)
        shapes = [tuple(s) for s in payload["shapes"]]
        return cls(sizes=tuple(payload["sizes"]), params=unflatten(np.asarray(payload["params"], dtype=np.float64), shapes))


def init_mlp(sizes: Sequence[int], rng: np.random.Generator, zero_output: bool = False) -> Mlp:
    """Xavier-uniform weights, zero biases."""
    params = []
    for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        if zero_output and layer == len(sizes) - 2:
            w = np.zeros_like(w)
        params.extend([w, np.zeros(fan_out)])
    return Mlp(sizes=tuple(sizes), params=tuple(params))


def forward(mlp: Mlp, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.sizes[0]:
        raise ShapeMismatch(f"Expected input of width {mlp.sizes[0]}, got shape {x.shape}")
    inputs, activations = [], []
    h = x
    for layer, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        inputs.append(h)
        h = h @ w + b
        if layer < mlp.n_layers - 1:
            h = np.tanh(h)
            activations.append(h)
    return h, Cache(inputs=tuple(inputs), activations=tuple(activations))


def backward(mlp: Mlp, cache: Cache, grad_out: np.ndarray) -> Tuple[Params, np.ndarray]:
    """Gradients of sum(grad_out * outputs) wrt every parameter and wrt the input."""
    grad = np.asarray(grad_out, dtype=np.float64)
    if grad.shape != (cache.inputs[0].shape[0], mlp.sizes[-1]):
        raise ShapeMismatch(f"Output gradient shape {grad.shape} does not match outputs")
    grads: List[np.ndarray] = [np.empty(0)] * len(mlp.params)
    for layer in reversed(range(mlp.n_layers)):
        w = mlp.weights[layer]
        grads[2 * layer] = cache.inputs[layer].T @ grad
        grads[2 * layer + 1] = grad.sum(axis=0)
        grad = grad @ w.T
        if layer > 0:
            grad = grad * (1.0 - cache.activations[layer - 1] ** 2)
    return tuple(grads), grad


def flatten(params: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(p) for p in params]) if params else np.zeros(0)


def unflatten(flat: np.ndarray, shapes: Sequence[Tuple[int, ...]]) -> Params:
    sizes = [int(np.prod(s)) for s in shapes]
    if sum(sizes) != len(flat):
        raise ShapeMismatch(f"Flat array of length {len(flat)} does not fill shapes {list(shapes)}")
    out, start = [], 0
    for shape, size in zip(shapes, sizes):
        out.append(flat[start : start + size].reshape(shape).copy())
        start += size
    return tuple(out)


def assert_finite(params: Sequence[np.ndarray], where: str) -> None:
    for i, p in enumerate(params):
        if not np.all(np.isfinite(p)):
            raise NonFiniteLoss(f"Non-finite parameter {i} after {where}")
