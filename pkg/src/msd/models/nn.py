"""Multilayer perceptrons over flattened frames."""

from __future__ import annotations

import numpy as np

from ..core import tensor as T
from ..core.rng import Rng
from ..core.tensor import Parameter, Tensor

_ACTIVATIONS = {"relu": (T.relu, lambda a: np.maximum(a, 0)), "tanh": (T.tanh, np.tanh)}
_OUTPUTS = {
    "linear": (lambda t: t, lambda a: a),
    "sigmoid": (T.sigmoid, lambda a: 1.0 / (1.0 + np.exp(-np.clip(a, -60, 60)))),
}


class MLP:
    """Dense layers ``sizes[0] -> ... -> sizes[-1]`` with a hidden activation and an output map."""

    def __init__(self, sizes: list[int], rng: Rng, prefix: str, activation: str = "relu", output: str = "linear", dtype=np.float32):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if output not in _OUTPUTS:
            raise ValueError(f"unknown output map {output!r}")
        self.activation = activation
        self.output = output
        self.layers: list[tuple[Parameter, Parameter]] = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = np.sqrt(2.0 / a) if (activation == "relu" and i < len(sizes) - 2) else np.sqrt(1.0 / a)
            w = Parameter((rng.normal_array((a, b)) * scale).astype(dtype), name=f"{prefix}.{i}.weight")
            bias = Parameter(np.zeros(b, dtype=dtype), name=f"{prefix}.{i}.bias")
            self.layers.append((w, bias))

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer]

    def __call__(self, x: Tensor) -> Tensor:
        act = _ACTIVATIONS[self.activation][0]
        for i, (w, b) in enumerate(self.layers):
            x = x @ w + b
            x = act(x) if i < len(self.layers) - 1 else _OUTPUTS[self.output][0](x)
        return x

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Graph-free forward pass for inference."""
        act = _ACTIVATIONS[self.activation][1]
        for i, (w, b) in enumerate(self.layers):
            x = x @ w.data + b.data
            x = act(x) if i < len(self.layers) - 1 else _OUTPUTS[self.output][1](x)
        return x.astype(self.layers[-1][0].data.dtype)
