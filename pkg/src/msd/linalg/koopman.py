"""Koopman matrix fits, mode classification, spectral penalties and projections.

Latent states are row vectors, so a fitted matrix advances a sequence as
``z[t + 1] = z[t] @ K``. Spectral projectors are ``V[:, S] @ Vinv[S, :]`` and
act on the right of a state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.tensor import Tensor, getitem, reshape
from .eig import EigResult, eig
from .lstsq import lstsq, lstsq_op

STATIC = "static"
DYNAMIC = "dynamic"


@dataclass
class SpectralConfig:
    k_dim: int = 8
    static_size: int = 1
    static_mode: str = "ball"
    dynamic_thresh: float = 0.25
    w_rec: float = 1.0
    w_pred: float = 1.0
    w_eigs: float = 1.0

    def __post_init__(self):
        if not 1 <= self.static_size < self.k_dim:
            raise ValueError(f"static_size must lie in [1, k_dim), got {self.static_size} with k_dim {self.k_dim}")
        if self.static_mode not in ("ball", "norm"):
            raise ValueError(f"static_mode must be 'ball' or 'norm', got {self.static_mode!r}")
        if not 0.0 < self.dynamic_thresh < 1.0:
            raise ValueError(f"dynamic_thresh must lie in (0, 1), got {self.dynamic_thresh}")
        if min(self.w_rec, self.w_pred, self.w_eigs) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class KoopmanDecomposition:
    matrix: np.ndarray
    eigen: EigResult
    mode_labels: list[str]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigen.values

    def subset(self, label: str) -> np.ndarray:
        return np.array([i for i, m in enumerate(self.mode_labels) if m == label], dtype=np.int64)


# ----------------------------------------------------------------------
# fits


def _check_sequences(Z) -> None:
    if Z.ndim != 3:
        raise ValueError(f"expected N x T x K latents, got shape {Z.shape}")
    if Z.shape[1] < 2:
        raise ValueError("need at least two time steps to fit a transition")


def fit_batch(Z: np.ndarray) -> np.ndarray:
    """One matrix for all (z_t, z_{t+1}) pairs of every sequence."""
    Z = np.asarray(Z, dtype=np.float64)
    _check_sequences(Z)
    k = Z.shape[2]
    return lstsq(Z[:, :-1].reshape(-1, k), Z[:, 1:].reshape(-1, k))


def fit_instance(Z_i: np.ndarray) -> np.ndarray:
    """Minimum-norm transition matrix of a single T x K sequence."""
    Z_i = np.asarray(Z_i, dtype=np.float64)
    if Z_i.ndim != 2:
        raise ValueError(f"expected T x K latents, got shape {Z_i.shape}")
    return fit_batch(Z_i[None])


def fit_instances(Z: np.ndarray) -> np.ndarray:
    """Stack of per-sequence matrices, shape N x K x K."""
    Z = np.asarray(Z, dtype=np.float64)
    _check_sequences(Z)
    return lstsq(Z[:, :-1], Z[:, 1:])


def fit_batch_op(Z: Tensor) -> Tensor:
    _check_sequences(Z)
    n, t, k = Z.shape
    a = reshape(getitem(Z, (slice(None), slice(0, t - 1))), (n * (t - 1), k))
    b = reshape(getitem(Z, (slice(None), slice(1, t))), (n * (t - 1), k))
    return lstsq_op(a, b)


def fit_instances_op(Z: Tensor) -> Tensor:
    _check_sequences(Z)
    t = Z.shape[1]
    return lstsq_op(getitem(Z, (slice(None), slice(0, t - 1))), getitem(Z, (slice(None), slice(1, t))))


# ----------------------------------------------------------------------
# modes


def mode_distance(values: np.ndarray, static_mode: str) -> np.ndarray:
    if static_mode == "ball":
        return np.abs(values - 1.0)
    if static_mode == "norm":
        return np.abs(np.abs(values) - 1.0)
    raise ValueError(f"unknown static_mode {static_mode!r}")


def classify_modes(values: np.ndarray, cfg: SpectralConfig, partner: np.ndarray | None = None) -> list[str]:
    """Pick ``static_size`` units closest to the static target; a conjugate pair is one unit."""
    values = np.asarray(values, dtype=np.complex128)
    k = len(values)
    if cfg.static_size >= k:
        raise ValueError(f"static_size {cfg.static_size} must be below the number of modes {k}")
    if partner is None:
        partner = _match_partners(values)
    units = sorted({tuple(sorted((i, int(partner[i])))) for i in range(k)})
    dist = mode_distance(values, cfg.static_mode)
    ranked = sorted(units, key=lambda u: (dist[u[0]], u[0]))
    labels = [DYNAMIC] * k
    for unit in ranked[: cfg.static_size]:
        for i in unit:
            labels[i] = STATIC
    return labels


def _match_partners(values: np.ndarray) -> np.ndarray:
    partner = np.arange(len(values))
    taken = np.zeros(len(values), dtype=bool)
    for i, v in enumerate(values):
        if v.imag > 0:
            for j in range(len(values)):
                if not taken[j] and j != i and values[j] == np.conj(v):
                    partner[i], partner[j] = j, i
                    taken[j] = True
                    break
    return partner


def decompose(matrix: np.ndarray, cfg: SpectralConfig) -> KoopmanDecomposition:
    result = eig(matrix)
    return KoopmanDecomposition(np.asarray(matrix, dtype=np.float64), result, classify_modes(result.values, cfg, result.partner))


# ----------------------------------------------------------------------
# spectral penalty


def spectral_loss(values: np.ndarray, mode_labels: list[str], cfg: SpectralConfig) -> float:
    values = np.asarray(values, dtype=np.complex128)
    static = np.array([m == STATIC for m in mode_labels])
    radius = 1.0 - cfg.dynamic_thresh
    loss = np.sum(np.abs(values[static] - 1.0) ** 2)
    loss += np.sum(np.maximum(0.0, np.abs(values[~static]) - radius) ** 2)
    return float(loss)


def _spectral_grad(values: np.ndarray, labels: list[str], cfg: SpectralConfig) -> np.ndarray:
    """Complex weights g_j with dL = sum_j Re(conj(g_j) dlambda_j)."""
    radius = 1.0 - cfg.dynamic_thresh
    g = np.zeros(len(values), dtype=np.complex128)
    for j, (lam, lab) in enumerate(zip(values, labels)):
        if lab == STATIC:
            g[j] = 2.0 * (lam - 1.0)
        else:
            mod = abs(lam)
            excess = mod - radius
            if excess > 0 and mod > 0:
                g[j] = 2.0 * excess * lam / mod
    return g


def spectral_loss_op(K: Tensor, cfg: SpectralConfig) -> tuple[Tensor, list[KoopmanDecomposition]]:
    """Spectral penalty of one matrix or the mean over a stack of matrices.

    Eigen-directions are frozen at the current step: the gradient is the
    first-order perturbation ``dlambda_j = w_j dK v_j`` with ``w_j`` the j-th row
    of the inverse eigenvector matrix.
    """
    mats = K.data.astype(np.float64)
    single = mats.ndim == 2
    if single:
        mats = mats[None]
    decomps = [decompose(m, cfg) for m in mats]
    total = 0.0
    grads = np.zeros_like(mats)
    for b, dec in enumerate(decomps):
        vals = dec.eigen.values
        total += spectral_loss(vals, dec.mode_labels, cfg)
        g = _spectral_grad(vals, dec.mode_labels, cfg)
        if np.any(g != 0):
            V, W = dec.eigen.vectors, dec.eigen.inverse
            # sum_j conj(g_j) * outer(w_j, v_j)
            grads[b] = np.real((W.T * np.conj(g)[None, :]) @ V.T)
    scale = 1.0 / len(decomps)
    value = np.asarray(total * scale, dtype=K.dtype)
    grads *= scale
    if single:
        grads = grads[0]

    def back(gout):
        return ((grads * float(gout)).astype(K.dtype),)

    return Tensor.from_op(value, (K,), back, "spectral_loss"), decomps


# ----------------------------------------------------------------------
# projections


def projector(eigen: EigResult, subset) -> np.ndarray:
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("mode subset is empty")
    members = set(subset.tolist())
    if any(int(eigen.partner[j]) not in members for j in subset):
        raise ValueError("mode subset is not closed under conjugation")
    P = eigen.vectors[:, subset] @ eigen.inverse[subset, :]
    return P


def project_modes(Z_i: np.ndarray, eigen: EigResult, subset) -> np.ndarray:
    """``Z_i @ P_S`` as a real array; the imaginary residue is checked and dropped."""
    P = projector(eigen, subset)
    out = np.asarray(Z_i, dtype=np.float64) @ P
    scale = max(1.0, float(np.abs(out).max(initial=0.0)))
    if np.abs(out.imag).max(initial=0.0) > 1e-8 * scale * max(1.0, eigen.cond if np.isfinite(eigen.cond) else 1.0):
        raise ValueError("projection left a non-negligible imaginary part")
    return out.real


def prediction_residual(Z: np.ndarray, K: np.ndarray) -> float:
    """Mean squared one-step error ``||Z[:, 1:] - Z[:, :-1] K||^2 / (N (T-1) K)``."""
    Z = np.asarray(Z, dtype=np.float64)
    diff = Z[:, 1:] - Z[:, :-1] @ K
    return float(np.mean(diff * diff))
