"""Loss terms shared by the sequence models."""

from __future__ import annotations

from ..core import tensor as T
from ..core.tensor import Tensor


def reconstruction(x_hat: Tensor, x) -> Tensor:
    """Mean squared error over every element."""
    return T.mean(T.square(x_hat - x))


def gaussian_kl(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over steps and dims, averaged over the batch (axis 0)."""
    per = (T.square(mu) + T.exp(logvar) - logvar - 1.0) * 0.5
    return T.sum(per) * (1.0 / mu.shape[0])


def sparsity(z: Tensor, weight: float) -> Tensor:
    """``weight`` times the mean absolute activation."""
    return T.mean(T.absolute(z)) * weight


def prediction(Z: Tensor, K: Tensor) -> Tensor:
    """Mean squared one-step error of ``z[t+1] ~ z[t] K``; K is shared or per sequence."""
    t = Z.shape[1]
    prev = T.getitem(Z, (slice(None), slice(0, t - 1)))
    nxt = T.getitem(Z, (slice(None), slice(1, t)))
    return T.mean(T.square(nxt - prev @ K))
