from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError

ACTIVATIONS = ("relu", "linear")


@dataclass
class Dense:
    weights: np.ndarray  # out x in
    bias: np.ndarray
    activation: str = "relu"

    @property
    def shape(self):
        return self.weights.shape


class DenseNet:
    """Stack of affine layers with ReLU or linear activations.

    ``forward`` returns the output and a cache; ``backward`` consumes that
    cache and returns per-layer ``(dW, db)`` pairs plus the input gradient.
    """

    def __init__(self, layers, seed=None):
        self.layers = list(layers)
        self.seed = seed
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weights.shape[0] != b.weights.shape[1]:
                raise ValidationError(f"layer dims do not chain: {a.shape} -> {b.shape}")
        for layer in self.layers:
            if layer.activation not in ACTIVATIONS:
                raise ValidationError(f"unknown activation {layer.activation!r}")

    @classmethod
    def build(cls, dims, rng, hidden_activation="relu", output_activation="linear", dtype=np.float64):
        """Glorot-uniform weights, zero biases."""
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_out, fan_in)).astype(dtype)
            act = output_activation if i == len(dims) - 2 else hidden_activation
            layers.append(Dense(W, np.zeros(fan_out, dtype=dtype), act))
        return cls(layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].weights.shape[1]] + [layer.weights.shape[0] for layer in self.layers]

    @property
    def dtype(self):
        return self.layers[0].weights.dtype

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def forward(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ValidationError(f"expected n x {self.dims[0]} input, got {x.shape}")
        cache = [x]
        for layer in self.layers:
            x = x @ layer.weights.T + layer.bias
            if layer.activation == "relu":
                x = np.maximum(x, 0)
            cache.append(x)
        return x, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        grads = [None] * (2 * len(self.layers))
        g = np.asarray(grad_out, dtype=self.dtype)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if layer.activation == "relu":
                g = g * (cache[i + 1] > 0)
            grads[2 * i] = g.T @ cache[i]
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.weights
        return grads, g

    def copy(self) -> "DenseNet":
        return DenseNet(
            [Dense(layer.weights.copy(), layer.bias.copy(), layer.activation) for layer in self.layers], self.seed
        )
