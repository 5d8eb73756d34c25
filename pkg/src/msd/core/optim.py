"""Adam with bias-corrected first and second moments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Parameter


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: list[Parameter], grads: list[np.ndarray]) -> None:
    """Update ``params`` in place and advance the step counter."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g in zip(params, grads):
        key = p.pid
        m = state.m.get(key)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        v = state.v[key]
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[key] = m.astype(p.data.dtype)
        state.v[key] = v.astype(p.data.dtype)
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - update).astype(p.data.dtype)


class Adam:
    """Convenience wrapper holding a parameter list and its state."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self, grads: list[np.ndarray]) -> None:
        adam_step(self.state, self.params, grads)

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flat name -> array map for checkpointing, keyed by parameter order."""
        out = {"step": np.array([self.state.step], dtype=np.int64)}
        for i, p in enumerate(self.params):
            if p.pid in self.state.m:
                out[f"m{i}"] = self.state.m[p.pid]
                out[f"v{i}"] = self.state.v[p.pid]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.state.step = int(arrays["step"][0])
        for i, p in enumerate(self.params):
            if f"m{i}" in arrays:
                self.state.m[p.pid] = arrays[f"m{i}"].astype(p.data.dtype)
                self.state.v[p.pid] = arrays[f"v{i}"].astype(p.data.dtype)
