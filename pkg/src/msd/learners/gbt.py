"""Multiclass gradient-boosted regression trees.

Each boosting round fits one depth-limited regression tree per class to the
softmax residuals ``onehot - p`` and sets leaf values with a single Newton
step. Features are quantile-binned once; split search is a level-wise
histogram scan over all open nodes at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GbtParams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    n_bins: int = 64
    min_gain: float = 1e-12


@dataclass
class _Tree:
    feature: np.ndarray  # -1 marks a leaf, heap layout
    threshold: np.ndarray  # bin index; bin <= threshold goes left
    value: np.ndarray


@dataclass
class GbtModel:
    params: GbtParams
    classes: np.ndarray
    edges: list[np.ndarray]
    init: np.ndarray
    trees: list[list[_Tree]] = field(default_factory=list)  # rounds x classes
    gains: np.ndarray | None = None
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.edges)

    def bin(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        out = np.empty(X.shape, dtype=np.int32)
        for j, e in enumerate(self.edges):
            out[:, j] = np.searchsorted(e, X[:, j], side="left")
        return out

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        B = self.bin(X)
        F = np.tile(self.init, (len(B), 1))
        lr = self.params.learning_rate
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                F[:, k] += lr * _predict_tree(tree, B)
        return F

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.decision_function(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax picks the lowest class index on ties
        return self.classes[np.argmax(self.decision_function(X), axis=1)]

    def importances(self) -> np.ndarray:
        return gbt_importances(self)


def _softmax(F: np.ndarray) -> np.ndarray:
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _bin_edges(col: np.ndarray, n_bins: int) -> np.ndarray:
    """Cut points between quantiles; bin b holds values in (edge[b-1], edge[b]]."""
    values = np.unique(col)
    if len(values) <= n_bins:
        return (values[:-1] + values[1:]) * 0.5
    qs = np.quantile(col, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
    return np.unique(qs)


def _predict_tree(tree: _Tree, B: np.ndarray) -> np.ndarray:
    node = np.zeros(len(B), dtype=np.int64)
    rows = np.arange(len(B))
    while True:
        feat = tree.feature[node]
        inner = feat >= 0
        if not inner.any():
            return tree.value[node]
        go_left = B[rows, np.maximum(feat, 0)] <= tree.threshold[node]
        nxt = np.where(go_left, 2 * node + 1, 2 * node + 2)
        node = np.where(inner, nxt, node)


def _fit_tree(B: np.ndarray, r: np.ndarray, hess: np.ndarray, params: GbtParams, n_classes: int, gains: np.ndarray) -> _Tree:
    n, d = B.shape
    nb = params.n_bins + 1
    size = 2 ** (params.max_depth + 1) - 1
    feature = np.full(size, -1, dtype=np.int64)
    threshold = np.zeros(size, dtype=np.int64)
    value = np.zeros(size, dtype=np.float64)
    node = np.zeros(n, dtype=np.int64)
    offsets = (np.arange(d, dtype=np.int64) * nb)[None, :]
    flat_bins = B + offsets  # n x d
    for depth in range(params.max_depth):
        first = 2**depth - 1
        count = 2**depth
        local = node - first
        active = (local >= 0) & (local < count)
        if not active.any():
            break
        idx = (local[active, None] * (d * nb) + flat_bins[active]).ravel()
        length = count * d * nb
        g = np.bincount(idx, weights=np.repeat(r[active], d), minlength=length).reshape(count, d, nb)
        c = np.bincount(idx, minlength=length).reshape(count, d, nb).astype(np.float64)
        gl = np.cumsum(g, axis=2)[:, :, :-1]
        cl = np.cumsum(c, axis=2)[:, :, :-1]
        gt = g.sum(axis=2)[:, :, None]
        ct = c.sum(axis=2)[:, :, None]
        gr = gt - gl
        cr = ct - cl
        valid = (cl > 0) & (cr > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.where(valid, gl * gl / np.where(valid, cl, 1) + gr * gr / np.where(valid, cr, 1) - gt * gt / np.maximum(ct, 1), -np.inf)
        flat = gain.reshape(count, -1)
        best = np.argmax(flat, axis=1)  # first maximum: lowest feature, then lowest threshold
        best_gain = flat[np.arange(count), best]
        for j in range(count):
            nid = first + j
            if not np.isfinite(best_gain[j]) or best_gain[j] <= params.min_gain:
                continue
            f, t = divmod(int(best[j]), nb - 1)
            feature[nid] = f
            threshold[nid] = t
            gains[f] += best_gain[j]
        # route samples of split nodes to children
        split_here = active.copy()
        split_here[active] = feature[node[active]] >= 0
        rows = np.nonzero(split_here)[0]
        nid = node[rows]
        left = B[rows, feature[nid]] <= threshold[nid]
        node[rows] = np.where(left, 2 * nid + 1, 2 * nid + 2)
    # Newton leaf values for the multiclass deviance
    sums = np.bincount(node, weights=r, minlength=size)
    hs = np.bincount(node, weights=hess, minlength=size)
    scale = (n_classes - 1) / n_classes
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(hs > 1e-12, scale * sums / np.where(hs > 1e-12, hs, 1.0), 0.0)
    return _Tree(feature, threshold, value)


def gbt_fit(X: np.ndarray, y: np.ndarray, params: GbtParams | None = None) -> GbtModel:
    params = params or GbtParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"X must be N x d with one label per row, got {X.shape} and {y.shape}")
    if len(X) < 2:
        raise ValueError("need at least two samples")
    classes, yi = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("labels contain a single class")
    k = len(classes)
    edges = [_bin_edges(X[:, j], params.n_bins) for j in range(X.shape[1])]
    prior = np.bincount(yi, minlength=k) / len(yi)
    model = GbtModel(params, classes, edges, np.log(prior), gains=np.zeros(X.shape[1]))
    B = model.bin(X)
    onehot = np.eye(k)[yi]
    F = np.tile(model.init, (len(X), 1))
    model.train_loss.append(_deviance(F, yi))
    for _ in range(params.n_trees):
        p = _softmax(F)
        resid = onehot - p
        hess = np.abs(resid) * (1.0 - np.abs(resid))
        round_trees = []
        for c in range(k):
            tree = _fit_tree(B, resid[:, c], hess[:, c], params, k, model.gains)
            round_trees.append(tree)
        for c, tree in enumerate(round_trees):
            F[:, c] += params.learning_rate * _predict_tree(tree, B)
        model.trees.append(round_trees)
        model.train_loss.append(_deviance(F, yi))
    return model


def _deviance(F: np.ndarray, yi: np.ndarray) -> float:
    z = F - F.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(yi)), yi].mean())


def gbt_importances(model: GbtModel) -> np.ndarray:
    """Normalized split gains per feature; uniform when the model never split."""
    if model.gains is None or not model.trees:
        raise ValueError("model is not fitted")
    total = model.gains.sum()
    if total <= 0:
        return np.full(model.n_features, 1.0 / model.n_features)
    return model.gains / total
