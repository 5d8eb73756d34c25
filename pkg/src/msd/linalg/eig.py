"""Dense nonsymmetric eigensolver.

Eigenvalues come from Householder reduction to Hessenberg form followed by
Francis double-shift QR sweeps with deflation. Eigenvectors are recovered by
inverse iteration on ``M - lambda I`` using a batched partial-pivot LU, and the
inverse of the eigenvector matrix is another LU solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CLUSTER_TOL = 1e-10
COND_LIMIT = 1e12
_EPS = np.finfo(np.float64).eps


class EigenError(ArithmeticError):
    """QR iteration failed to converge within its iteration budget."""


@dataclass
class EigResult:
    values: np.ndarray  # (K,) complex128, sorted
    vectors: np.ndarray  # (K, K) complex128, columns
    inverse: np.ndarray  # (K, K) complex128
    partner: np.ndarray  # index of the conjugate partner (self for real modes)
    cond: float
    ill_conditioned: bool


# ----------------------------------------------------------------------
# Hessenberg reduction and QR sweeps


def _householder(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit v and beta with ``(I - beta v v^T) x`` a multiple of e_0."""
    alpha = np.linalg.norm(x)
    v = x.astype(np.float64).copy()
    if alpha == 0.0:
        return v, 0.0
    v[0] += alpha if x[0] >= 0 else -alpha
    vv = float(v @ v)
    if vv == 0.0:
        return v, 0.0
    return v, 2.0 / vv


def hessenberg(M: np.ndarray) -> np.ndarray:
    H = np.array(M, dtype=np.float64, copy=True)
    n = H.shape[0]
    for k in range(n - 2):
        v, beta = _householder(H[k + 1 :, k])
        if beta == 0.0:
            continue
        H[k + 1 :, k:] -= beta * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= beta * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _block_eigs(a: float, b: float, c: float, d: float) -> tuple[complex, complex]:
    p = 0.5 * (a + d)
    half = 0.5 * (a - d)
    disc = half * half + b * c
    if disc >= 0.0:
        root = np.sqrt(disc)
        r1 = p + root if p >= 0 else p - root
        r2 = (a * d - b * c) / r1 if r1 != 0.0 else p - root
        return complex(r1), complex(r2)
    im = np.sqrt(-disc)
    return complex(p, im), complex(p, -im)


def _reflect3(x: float, y: float, z: float) -> tuple[float, float, float, float]:
    """Scalar Householder for a 3-vector: (v0, v1, v2, beta)."""
    alpha = math.sqrt(x * x + y * y + z * z)
    if alpha == 0.0:
        return x, y, z, 0.0
    v0 = x + (alpha if x >= 0 else -alpha)
    vv = v0 * v0 + y * y + z * z
    return v0, y, z, (2.0 / vv if vv != 0.0 else 0.0)


def _francis_sweep(W: np.ndarray, exceptional: bool) -> None:
    """One implicit double-shift QR sweep on an unreduced Hessenberg block, in place."""
    m = W.shape[0]
    if exceptional:
        # ad hoc shifts break rare cycles
        w = abs(W[m - 1, m - 2]) + abs(W[m - 2, m - 3])
        s = 1.5 * w
        t = w * w
    else:
        s = W[m - 2, m - 2] + W[m - 1, m - 1]
        t = W[m - 2, m - 2] * W[m - 1, m - 1] - W[m - 2, m - 1] * W[m - 1, m - 2]
    x = W[0, 0] * W[0, 0] + W[0, 1] * W[1, 0] - s * W[0, 0] + t
    y = W[1, 0] * (W[0, 0] + W[1, 1] - s)
    z = W[1, 0] * W[2, 1]
    for k in range(m - 2):
        v0, v1, v2, beta = _reflect3(float(x), float(y), float(z))
        if beta != 0.0:
            q = max(0, k - 1)
            rows = W[k : k + 3, q:]
            w = beta * (v0 * rows[0] + v1 * rows[1] + v2 * rows[2])
            rows[0] -= v0 * w
            rows[1] -= v1 * w
            rows[2] -= v2 * w
            r = min(k + 4, m)
            cols = W[:r, k : k + 3]
            w = beta * (cols[:, 0] * v0 + cols[:, 1] * v1 + cols[:, 2] * v2)
            cols[:, 0] -= w * v0
            cols[:, 1] -= w * v1
            cols[:, 2] -= w * v2
        x = W[k + 1, k]
        y = W[k + 2, k]
        if k < m - 3:
            z = W[k + 3, k]
    v0, v1, _, beta = _reflect3(float(x), float(y), 0.0)
    if beta != 0.0:
        rows = W[m - 2 :, m - 3 :]
        w = beta * (v0 * rows[0] + v1 * rows[1])
        rows[0] -= v0 * w
        rows[1] -= v1 * w
        cols = W[:, m - 2 :]
        w = beta * (cols[:, 0] * v0 + cols[:, 1] * v1)
        cols[:, 0] -= w * v0
        cols[:, 1] -= w * v1


def eigvals(M: np.ndarray, max_iter_per_value: int = 60) -> np.ndarray:
    """All eigenvalues of a real square matrix, unsorted, conjugates exact."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    n = M.shape[0]
    H = hessenberg(M)
    out: list[complex] = []
    hi = n - 1
    its = 0
    norm = max(np.abs(H).sum(), 1e-300)
    while hi >= 0:
        if hi == 0:
            out.append(complex(H[0, 0]))
            hi -= 1
            continue
        # find start of the unreduced block ending at hi
        lo = hi
        while lo > 0:
            scale = abs(H[lo, lo]) + abs(H[lo - 1, lo - 1])
            if scale == 0.0:
                scale = norm
            if abs(H[lo, lo - 1]) <= _EPS * scale:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            out.append(complex(H[hi, hi]))
            hi -= 1
            its = 0
        elif lo == hi - 1:
            out.extend(_block_eigs(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi]))
            hi -= 2
            its = 0
        else:
            if its >= max_iter_per_value:
                raise EigenError(f"QR iteration did not converge (block {lo}..{hi})")
            its += 1
            _francis_sweep(H[lo : hi + 1, lo : hi + 1], exceptional=its in (10, 20, 40))
    return np.asarray(out, dtype=np.complex128)


def sort_eigenvalues(vals: np.ndarray) -> np.ndarray:
    """Descending modulus, then descending real part, then positive imaginary first."""
    return np.lexsort((-vals.imag, -vals.real, -np.abs(vals)))


# ----------------------------------------------------------------------
# batched LU with partial pivoting


def lu_factor(A: np.ndarray, pivot_floor: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """LU of a stack (B, n, n); returns packed LU and row permutations.

    Pivots with magnitude below ``pivot_floor`` are replaced by it, which is
    what inverse iteration needs for exactly singular shifted matrices.
    """
    LU = np.array(A, dtype=np.complex128, copy=True)
    b, n, _ = LU.shape
    perm = np.tile(np.arange(n), (b, 1))
    ar = np.arange(b)
    for c in range(n):
        p = c + np.argmax(np.abs(LU[:, c:, c]), axis=1)
        swap = p != c
        if swap.any():
            idx = ar[swap]
            rows_c = LU[idx, c, :].copy()
            LU[idx, c, :] = LU[idx, p[swap], :]
            LU[idx, p[swap], :] = rows_c
            pc = perm[idx, c].copy()
            perm[idx, c] = perm[idx, p[swap]]
            perm[idx, p[swap]] = pc
        piv = LU[:, c, c]
        small = np.abs(piv) < pivot_floor
        if small.any():
            LU[small, c, c] = pivot_floor
            piv = LU[:, c, c]
        if c + 1 < n:
            safe = np.where(piv == 0, 1.0, piv)
            LU[:, c + 1 :, c] /= safe[:, None]
            LU[:, c + 1 :, c + 1 :] -= LU[:, c + 1 :, c, None] * LU[:, c, None, c + 1 :]
    return LU, perm


def lu_solve(LU: np.ndarray, perm: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve each system for a stack of right-hand sides (B, n, r)."""
    b, n, _ = LU.shape
    ar = np.arange(b)[:, None]
    x = rhs[ar, perm].astype(np.complex128)
    for i in range(n):
        x[:, i] -= np.einsum("bj,bjr->br", LU[:, i, :i], x[:, :i])
    for i in range(n - 1, -1, -1):
        x[:, i] -= np.einsum("bj,bjr->br", LU[:, i, i + 1 :], x[:, i + 1 :])
        x[:, i] /= LU[:, i, i, None]
    return x


def inverse(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    LU, perm = lu_factor(A[None])
    if np.any(np.abs(np.diagonal(LU[0])) == 0):
        raise np.linalg.LinAlgError("singular matrix")
    return lu_solve(LU, perm, np.eye(n, dtype=np.complex128)[None])[0]


# ----------------------------------------------------------------------
# eigenvectors


def _normalize_columns(V: np.ndarray) -> np.ndarray:
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    # fix the phase so the largest-magnitude entry (lowest index on ties) is real positive
    lead = np.argmax(np.abs(V) * (1.0 - 1e-12 * np.arange(V.shape[0]))[:, None], axis=0)
    phase = V[lead, np.arange(V.shape[1])]
    return V * (np.abs(phase) / phase)[None, :]


def _inverse_iteration(M: np.ndarray, lams: np.ndarray, iters: int = 3) -> np.ndarray:
    n = M.shape[0]
    scale = max(np.linalg.norm(M), 1e-300)
    shifted = M[None].astype(np.complex128) - lams[:, None, None] * np.eye(n)[None]
    LU, perm = lu_factor(shifted, pivot_floor=_EPS * scale)
    x = np.ones((len(lams), n, 1), dtype=np.complex128) + 1e-3 * np.arange(n)[None, :, None]
    for _ in range(iters):
        x = lu_solve(LU, perm, x)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x[:, :, 0].T


def _cluster_basis(M: np.ndarray, mu: complex, size: int) -> tuple[np.ndarray, bool]:
    """Basis of the invariant subspace for an eigenvalue cluster of ``size`` members.

    The second value is True when the cluster is defective, i.e. the basis
    needed generalized eigenvectors.
    """
    n = M.shape[0]
    shifted = M.astype(np.complex128) - mu * np.eye(n)
    power = np.eye(n, dtype=np.complex128)
    scale = max(np.linalg.norm(M), 1.0)
    for p in range(1, size + 1):
        power = power @ shifted
        _, s, vh = np.linalg.svd(power)
        if np.sum(s <= 1e-8 * scale**p) >= size:
            break
    return vh[-size:].conj().T, p > 1


def eig(M: np.ndarray) -> EigResult:
    """Full eigendecomposition ``M V = V diag(values)`` with sorted spectrum."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    vals = eigvals(M)
    vals = vals[sort_eigenvalues(vals)]
    # 2x2 blocks emit exact conjugates, so partners can be matched by equality
    partner = np.arange(n)
    taken = np.zeros(n, dtype=bool)
    for i in range(n):
        if vals[i].imag > 0:
            j = next(k for k in range(n) if not taken[k] and vals[k] == np.conj(vals[i]))
            partner[i], partner[j] = j, i
            taken[j] = True

    V = np.zeros((n, n), dtype=np.complex128)
    done = np.zeros(n, dtype=bool)
    defective = False
    # clusters of (nearly) repeated eigenvalues get a joint subspace basis
    for j in range(n):
        if done[j] or vals[j].imag < 0:
            continue
        members = [
            k
            for k in range(n)
            if not done[k] and (vals[k].imag > 0) == (vals[j].imag > 0) and abs(vals[k] - vals[j]) < CLUSTER_TOL
        ]
        if len(members) > 1:
            basis, bad = _cluster_basis(M, vals[j], len(members))
            defective |= bad
            if vals[j].imag == 0.0:
                basis = _real_basis(basis)
            V[:, members] = basis
            done[members] = True
            if vals[j].imag > 0:
                conj_members = [partner[k] for k in members]
                V[:, conj_members] = basis.conj()
                done[conj_members] = True
    todo = [j for j in range(n) if not done[j] and vals[j].imag >= 0]
    if todo:
        V[:, todo] = _inverse_iteration(M, vals[todo])
        for j in todo:
            if vals[j].imag == 0.0:
                V[:, j] = V[:, j].real
            else:
                V[:, partner[j]] = V[:, j].conj()
    V = _normalize_columns(V)
    for j in range(n):
        if vals[j].imag < 0:
            V[:, j] = V[:, partner[j]].conj()
    try:
        Vinv = inverse(V)
        cond = float(np.abs(V).sum(axis=0).max() * np.abs(Vinv).sum(axis=0).max())
    except np.linalg.LinAlgError:
        Vinv = np.full((n, n), np.nan + 0j)
        cond = float("inf")
    if defective:
        cond = float("inf")
    return EigResult(vals, V, Vinv, partner, cond, not cond <= COND_LIMIT)


def _real_basis(basis: np.ndarray) -> np.ndarray:
    """Real orthonormal basis spanning the same space as a complex basis of a real subspace."""
    stacked = np.concatenate([basis.real, basis.imag], axis=1)
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    return u[:, : basis.shape[1]].astype(np.complex128)
