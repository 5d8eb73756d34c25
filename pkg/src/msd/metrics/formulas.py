"""Closed-form scoring rules: noise floors, consistency scores, matrix summaries, DCI."""

from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    pass


def noise_floor(cardinality: int, labels: np.ndarray | None = None, empirical: bool = False) -> float:
    """Chance accuracy for a factor: 1/n, or the majority-class frequency of ``labels``."""
    if cardinality < 2:
        raise MetricError("a factor needs at least two labels")
    if not empirical:
        return 1.0 / cardinality
    if labels is None or len(labels) == 0:
        raise MetricError("empirical floors need labels")
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=cardinality)
    return float(counts.max() / counts.sum())


def _as_label_rows(labels) -> np.ndarray:
    arr = np.asarray(labels)
    return arr[None, :] if arr.ndim == 1 else arr


def c_sample(labels) -> np.ndarray | float:
    """Fraction of adjacent frames with equal labels; rows are sequences."""
    rows = _as_label_rows(labels)
    if rows.shape[1] < 2:
        raise MetricError("C-Sample needs at least two frames")
    score = (rows[:, 1:] == rows[:, :-1]).mean(axis=1)
    return float(score[0]) if np.asarray(labels).ndim == 1 else score


def gc_sample(labels) -> np.ndarray | float:
    """Frequency of the modal frame label; ties resolve to the lowest label."""
    rows = _as_label_rows(labels)
    if rows.shape[1] < 1:
        raise MetricError("GC-Sample needs at least one frame")
    shifted = rows - rows.min()
    counts = np.stack([np.bincount(r, minlength=shifted.max() + 1) for r in shifted])
    score = counts.max(axis=1) / rows.shape[1]
    return float(score[0]) if np.asarray(labels).ndim == 1 else score


def c_swap_score(frame_labels, donor_label) -> np.ndarray | float:
    """Fraction of frames showing the donor's label after a static swap."""
    rows = _as_label_rows(frame_labels)
    donor = np.broadcast_to(np.asarray(donor_label).reshape(-1, 1), (rows.shape[0], 1))
    score = (rows == donor).mean(axis=1)
    return float(score[0]) if np.asarray(frame_labels).ndim == 1 else score


def summarize_matrix(A, floors, refined: bool = False, weights: tuple[float, float] = (0.5, 0.5)) -> float:
    """Combine preservation (diagonal) and independence (off-diagonal near floor) into one score.

    Default: the weighted arithmetic mean of the two parts. ``refined``: their
    weighted geometric mean. With one factor only the diagonal counts.
    """
    A = np.asarray(A, dtype=np.float64)
    floors = np.asarray(floors, dtype=np.float64)
    k = A.shape[0]
    if A.shape != (k, k) or k < 1 or floors.shape != (k,):
        raise MetricError(f"need a k x k matrix and k floors, got {A.shape} and {floors.shape}")
    if np.any(floors >= 1.0):
        raise MetricError("a floor of 1 leaves no room above chance")
    diag = float(np.mean(np.diag(A)))
    if k == 1:
        return diag
    off = ~np.eye(k, dtype=bool)
    dev = np.minimum(1.0, np.abs(A - floors[None, :]) / (1.0 - floors[None, :]))
    indep = float(np.mean(1.0 - dev[off]))
    w1, w2 = weights
    if refined:
        return float(diag ** (w1 / (w1 + w2)) * indep ** (w2 / (w1 + w2)))
    return float((w1 * diag + w2 * indep) / (w1 + w2))


def chance_normalized(acc, floor, margin: float = 0.0):
    """Accuracy rescaled so chance maps to 0 and perfect to 1, clipped to [0, 1]."""
    acc = np.asarray(acc, dtype=np.float64)
    floor = np.asarray(floor, dtype=np.float64)
    return np.clip((acc - floor - margin) / (1.0 - floor - margin), 0.0, 1.0)


def _weighted_specificity(Q: np.ndarray) -> float:
    """sum_i rho_i (1 - H(row_i) / log m) over the rows of a non-negative matrix."""
    m = Q.shape[1]
    mass = Q.sum(axis=1)
    total = mass.sum()
    out = 0.0
    for row, w in zip(Q, mass):
        if w <= 0:
            continue
        p = row / w
        nz = p[p > 0]
        h = float(-(nz * np.log(nz)).sum())
        out += (w / total) * (1.0 - h / np.log(m))
    # rounding can push a maximal-entropy result a hair outside [0, 1]
    return float(np.clip(out, 0.0, 1.0))


def dci_from_relevance(Q, explicit) -> tuple[float, float, float, bool]:
    """(modularity, compactness, explicitness, degenerate) from a groups x factors relevance matrix."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] < 2:
        raise MetricError("DCI needs at least two factors")
    if np.any(Q < 0):
        raise MetricError("relevance must be non-negative")
    E = float(np.clip(np.mean(explicit), 0.0, 1.0))
    if Q.sum() <= 0:
        return 0.0, 0.0, E, True
    if Q.shape[0] < 2:
        raise MetricError("DCI needs at least two latent groups")
    return float(_weighted_specificity(Q)), float(_weighted_specificity(Q.T)), E, False


def aggregate(values: dict[str, float]) -> float:
    """Arithmetic mean of the valid metric values for one model on one dataset."""
    vals = [v for v in values.values() if v is not None and np.isfinite(v)]
    if not vals:
        raise MetricError("no valid metric values to aggregate")
    return float(np.mean(vals))


def standard_error(samples) -> float:
    s = np.asarray(samples, dtype=np.float64)
    return float(s.std(ddof=1) / np.sqrt(len(s))) if len(s) > 1 else 0.0
