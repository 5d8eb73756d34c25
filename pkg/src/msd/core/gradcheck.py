"""Central finite-difference checks for reverse-mode gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .rng import Rng
from .tensor import Parameter, Tensor, backward


def relative_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: list[Parameter],
    n_coords: int = 32,
    h: float = 1e-3,
    seed: int = 0,
    floor: float = 1e-6,
) -> float:
    """Worst relative error over ``n_coords`` sampled coordinates.

    Parameters should hold float64 data; float32 central differences cannot
    resolve a 1e-4 relative tolerance.
    """
    grads = backward(loss_fn(), params)
    sizes = [p.data.size for p in params]
    total = sum(sizes)
    rng = Rng(seed)
    picks = rng.choice(total, min(n_coords, total)) if total > n_coords else np.arange(total)
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = int(flat - offsets[k])
        p = params[k]
        view = p.data.reshape(-1)
        orig = view[idx]
        view[idx] = orig + h
        up = float(loss_fn().data)
        view[idx] = orig - h
        down = float(loss_fn().data)
        view[idx] = orig
        numeric = (up - down) / (2 * h)
        analytic = float(grads[k].reshape(-1)[idx])
        worst = max(worst, relative_error(analytic, numeric, floor))
    return worst
