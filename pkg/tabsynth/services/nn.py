"""Dense-network machinery: affine layers, activations, backprop and optimizers.

Layers cache their inputs during ``forward`` and consume the cache in
``backward``. Parameters and gradients are exposed as name -> array dicts so
an optimizer can update them in place.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, softmax

from tabsynth.errors import InvalidGroupError, ShapeError, StateError

log = logging.getLogger("tabsynth")

TRAIN_DTYPE = np.float32
ORACLE_DTYPE = np.float64


def _as_matrix(x: np.ndarray, dtype) -> np.ndarray:
    x = np.asarray(x, dtype=dtype)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def silu(x: np.ndarray) -> np.ndarray:
    return x * expit(x)


def _check_groups(groups: list[slice], width: int) -> None:
    for g in groups:
        start, stop, _ = g.indices(width)
        if stop - start <= 0 or g.stop is None or g.stop > width:
            raise InvalidGroupError(f"softmax group {g} is empty or exceeds width {width}")


def softmax_groups(x: np.ndarray, groups: list[slice]) -> np.ndarray:
    """Apply softmax independently over each column group of the last axis.

    Columns outside every group are passed through untouched.
    """
    x = np.asarray(x)
    _check_groups(groups, x.shape[-1])
    out = x.copy()
    for g in groups:
        out[..., g] = softmax(x[..., g], axis=-1)
    return out


def log_softmax_groups(x: np.ndarray, groups: list[slice]) -> np.ndarray:
    x = np.asarray(x)
    _check_groups(groups, x.shape[-1])
    out = x.copy()
    for g in groups:
        out[..., g] = log_softmax(x[..., g], axis=-1)
    return out


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class Layer:
    """A differentiable op with optional parameters."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> dict[str, np.ndarray]:
        return {}

    def gradients(self) -> dict[str, np.ndarray]:
        return {}


def forward_dense(weight: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = x·Wᵀ + b for a weight of shape (out, in)."""
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(
            f"dense layer expects {weight.shape[1]} input columns, got shape {x.shape}"
        )
    return x @ weight.T + bias


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, dtype=TRAIN_DTYPE):
        bound = np.sqrt(1.0 / in_dim)
        self.weight = rng.uniform(-bound, bound, size=(out_dim, in_dim)).astype(dtype)
        self.bias = rng.uniform(-bound, bound, size=out_dim).astype(dtype)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x, self.weight.dtype)
        y = forward_dense(self.weight, self.bias, x)
        self._x = x
        return y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise StateError("Dense.backward called without a cached forward pass")
        if grad.shape != (self._x.shape[0], self.out_dim):
            raise ShapeError(f"gradient shape {grad.shape} does not match layer output")
        self.grad_weight[...] = grad.T @ self._x
        self.grad_bias[...] = grad.sum(axis=0)
        return grad @ self.weight

    def parameters(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self) -> dict[str, np.ndarray]:
        return {"weight": self.grad_weight, "bias": self.grad_bias}


class ReLU(Layer):
    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return relu(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise StateError("ReLU.backward called without a cached forward pass")
        return grad * self._mask


class SiLU(Layer):
    def __init__(self):
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return silu(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise StateError("SiLU.backward called without a cached forward pass")
        s = expit(self._x)
        return grad * (s * (1 + self._x * (1 - s)))


class Dropout(Layer):
    """Inverted dropout; inert at rate 0 or outside training."""

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self.training = True
        self._rng = rng
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.rate == 0.0 or not self.training:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self._rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad if self._mask is None else grad * self._mask


class Embedding(Layer):
    """Trainable lookup table indexed by integer ids."""

    def __init__(self, num: int, dim: int, rng: np.random.Generator, dtype=TRAIN_DTYPE):
        self.table = rng.standard_normal((num, dim)).astype(dtype)
        self.grad_table = np.zeros_like(self.table)
        self._ids: np.ndarray | None = None

    def forward(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.table.shape[0]):
            raise IndexError(f"class id out of range [0, {self.table.shape[0]})")
        self._ids = ids
        return self.table[ids]

    def backward(self, grad: np.ndarray) -> None:
        if self._ids is None:
            raise StateError("Embedding.backward called without a cached forward pass")
        self.grad_table.fill(0)
        np.add.at(self.grad_table, self._ids, grad)
        return None

    def parameters(self) -> dict[str, np.ndarray]:
        return {"table": self.table}

    def gradients(self) -> dict[str, np.ndarray]:
        return {"table": self.grad_table}


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": p
            for i, layer in enumerate(self.layers)
            for name, p in layer.parameters().items()
        }

    def gradients(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": g
            for i, layer in enumerate(self.layers)
            for name, g in layer.gradients().items()
        }


def backward(network: Layer, loss_grad: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate *loss_grad* through *network* and return its parameter gradients."""
    network.backward(loss_grad)
    return network.gradients()


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

@dataclass
class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count

        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(v / bc2) + self.eps
            p -= (self.lr / bc1) * m / denom
        return params


def adam_step(state: Adam, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return state.step(params, grads)


@dataclass
class GradientDescent:
    lr: float = 0.1

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
            p -= self.lr * g
        return params
