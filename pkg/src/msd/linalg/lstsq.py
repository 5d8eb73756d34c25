"""Minimum-norm least squares in float64, plus a differentiable variant."""

from __future__ import annotations

import numpy as np

from ..core.tensor import Tensor


def pinv(A: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a matrix or a stack of matrices.

    Singular values below ``max(M, K) * eps * s_max`` are treated as zero,
    the same cut LAPACK's least-squares drivers use.
    """
    A = np.asarray(A, dtype=np.float64)
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    m, k = A.shape[-2:]
    smax = s[..., :1] if s.shape[-1] else s
    cutoff = max(m, k) * np.finfo(np.float64).eps * smax
    keep = s > cutoff
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return np.swapaxes(vt, -1, -2) @ (inv_s[..., :, None] * np.swapaxes(u, -1, -2))


def lstsq(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Minimum Frobenius norm X for ``min ||A X - B||_F`` (batched over leading axes)."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim < 2 or B.ndim < 2 or A.shape[:-1] != B.shape[:-1]:
        raise ValueError(f"dimension mismatch: A {A.shape}, B {B.shape}")
    if A.shape[-2] < 1:
        raise ValueError("need at least one row")
    return pinv(A) @ B


def lstsq_op(A: Tensor, B: Tensor) -> Tensor:
    """Differentiable ``pinv(A) @ B``; the solve runs in float64.

    The backward pass uses the pseudo-inverse derivative, valid while the
    numerical rank of A stays fixed under perturbation.
    """
    if A.shape[:-1] != B.shape[:-1]:
        raise ValueError(f"dimension mismatch: A {A.shape}, B {B.shape}")
    a = A.data.astype(np.float64)
    b = B.data.astype(np.float64)
    p = pinv(a)
    x = p @ b
    out_dtype = np.result_type(A.dtype, B.dtype)

    def back(g):
        g = g.astype(np.float64)
        pt = np.swapaxes(p, -1, -2)
        xt = np.swapaxes(x, -1, -2)
        gt = np.swapaxes(g, -1, -2)
        eye_m = np.eye(a.shape[-2])
        eye_k = np.eye(a.shape[-1])
        resid = (eye_m - a @ p) @ b
        grad_a = -pt @ g @ xt + resid @ gt @ p @ pt + pt @ x @ gt @ (eye_k - p @ a)
        grad_b = pt @ g
        return grad_a.astype(A.dtype), grad_b.astype(B.dtype)

    return Tensor.from_op(x.astype(out_dtype), (A, B), back, "lstsq")
