"""Reverse-process network.

x = Linear(x_in) + t_emb + y_emb, followed by an MLP whose output has the
input's dimensionality: ε-predictions for the numerical block, then logits
for each categorical feature.
"""

import logging
from dataclasses import dataclass

import numpy as np

from tabsynth.errors import ShapeError
from tabsynth.services.nn import (
    TRAIN_DTYPE,
    Dense,
    Dropout,
    Embedding,
    ReLU,
    Sequential,
    SiLU,
    forward_dense,
    relu,
    silu,
)

log = logging.getLogger("tabsynth")

EMBED_DIM = 128
LAYER_CHOICES = (2, 4, 6, 8)


@dataclass(frozen=True)
class DenoiserConfig:
    input_dim: int
    num_layers: int = 4
    layer_width: int = 256
    num_classes: int = 0
    embed_dim: int = EMBED_DIM
    dropout: float = 0.0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.num_layers not in LAYER_CHOICES:
            raise ValueError(f"num_layers must be one of {LAYER_CHOICES}")
        if self.layer_width < 1:
            raise ValueError("layer_width must be positive")
        if self.num_classes < 0:
            raise ValueError("num_classes must be non-negative")

    def parameter_count(self) -> int:
        d, e, w = self.input_dim, self.embed_dim, self.layer_width
        count = d * e + e                      # input projection
        count += 2 * (e * e + e)               # time MLP
        count += self.num_classes * e          # class embedding
        count += e * w + w                     # first block
        count += (self.num_layers - 1) * (w * w + w)
        count += w * d + d                     # head
        return count


def time_embedding(t, dim: int = EMBED_DIM) -> np.ndarray:
    """Sinusoidal embedding: sin(t·ω_j) then cos(t·ω_j), ω_j = 10000^(-j/(dim/2 - 1))."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t < 0):
        raise ValueError("timesteps must be non-negative")
    half = dim // 2
    freqs = 10000.0 ** (-np.arange(half) / (half - 1))
    args = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


class DenoiserModel:
    def __init__(self, config: DenoiserConfig, rng: np.random.Generator, dtype=TRAIN_DTYPE):
        self.config = config
        self.dtype = dtype
        e, w = config.embed_dim, config.layer_width

        self.input_proj = Dense(config.input_dim, e, rng, dtype)
        self.time_mlp = Sequential([Dense(e, e, rng, dtype), SiLU(), Dense(e, e, rng, dtype)])
        self.class_embedding = (
            Embedding(config.num_classes, e, rng, dtype) if config.num_classes > 0 else None
        )

        layers = []
        width_in = e
        for _ in range(config.num_layers):
            layers += [Dense(width_in, w, rng, dtype), ReLU(), Dropout(config.dropout, rng)]
            width_in = w
        self.blocks = Sequential(layers)
        self.head = Dense(w, config.input_dim, rng, dtype)

    # ------------------------------------------------------------------
    # Modules / parameters
    # ------------------------------------------------------------------

    def _modules(self) -> list[tuple[str, object]]:
        modules = [("input_proj", self.input_proj), ("time_mlp", self.time_mlp)]
        if self.class_embedding is not None:
            modules.append(("class_embedding", self.class_embedding))
        modules += [("blocks", self.blocks), ("head", self.head)]
        return modules

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.{name}": p
            for prefix, module in self._modules()
            for name, p in module.parameters().items()
        }

    def gradients(self) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.{name}": g
            for prefix, module in self._modules()
            for name, g in module.gradients().items()
        }

    def load_parameters(self, params: dict[str, np.ndarray]) -> None:
        own = self.parameters()
        if set(own) != set(params):
            raise ShapeError("parameter names do not match the model layout")
        for name, p in own.items():
            if p.shape != params[name].shape:
                raise ShapeError(f"{name}: expected shape {p.shape}, got {params[name].shape}")
            p[...] = params[name]

    # ------------------------------------------------------------------
    # Forward / backward
    # ------------------------------------------------------------------

    def class_embed(self, y) -> np.ndarray:
        if self.class_embedding is None:
            return np.zeros(self.config.embed_dim, dtype=self.dtype)
        return self.class_embedding.forward(np.atleast_1d(y))[0]

    def forward(self, x_in: np.ndarray, t, y=None) -> np.ndarray:
        x_in = np.asarray(x_in, dtype=self.dtype)
        single = x_in.ndim == 1
        if single:
            x_in = x_in[None, :]
        if x_in.shape[1] != self.config.input_dim:
            raise ShapeError(f"expected {self.config.input_dim} input columns, got {x_in.shape[1]}")
        if self.class_embedding is not None and y is None:
            raise ValueError("class-conditional model requires a class label")
        if self.class_embedding is None and y is not None:
            raise ValueError("unconditional model does not take a class label")

        t = np.broadcast_to(np.asarray(t), (x_in.shape[0],))
        h = self.input_proj.forward(x_in)
        h = h + self.time_mlp.forward(time_embedding(t, self.config.embed_dim).astype(self.dtype))
        if self.class_embedding is not None:
            y = np.broadcast_to(np.asarray(y), (x_in.shape[0],))
            h = h + self.class_embedding.forward(y)
        out = self.head.forward(self.blocks.forward(h))
        return out[0] if single else out

    def predict(self, x_in: np.ndarray, t, y=None) -> np.ndarray:
        """Forward pass without caching; safe to call from several threads at once."""
        x_in = np.asarray(x_in, dtype=self.dtype)
        if x_in.ndim != 2 or x_in.shape[1] != self.config.input_dim:
            raise ShapeError(f"expected (rows, {self.config.input_dim}) input, got {x_in.shape}")
        t = np.broadcast_to(np.asarray(t), (x_in.shape[0],))

        first, _, second = self.time_mlp.layers
        emb = time_embedding(t, self.config.embed_dim).astype(self.dtype)
        emb = forward_dense(second.weight, second.bias, silu(forward_dense(first.weight, first.bias, emb)))
        h = forward_dense(self.input_proj.weight, self.input_proj.bias, x_in) + emb
        if self.class_embedding is not None:
            if y is None:
                raise ValueError("class-conditional model requires a class label")
            h = h + self.class_embedding.table[np.broadcast_to(np.asarray(y), (x_in.shape[0],))]

        for layer in self.blocks.layers:
            if isinstance(layer, Dense):
                h = forward_dense(layer.weight, layer.bias, h)
            elif isinstance(layer, ReLU):
                h = relu(h)
        return forward_dense(self.head.weight, self.head.bias, h)

    def backward(self, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        grad = np.asarray(grad_out, dtype=self.dtype)
        if grad.ndim == 1:
            grad = grad[None, :]
        grad = self.blocks.backward(self.head.backward(grad))
        self.input_proj.backward(grad)
        self.time_mlp.backward(grad)
        if self.class_embedding is not None:
            self.class_embedding.backward(grad)
        return self.gradients()
