"""Intervention metrics: swap and resample latent groups, decode, and judge the result."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..core.rng import Rng, derive_seed
from ..judges.base import INVALID
from ..learners.gbt import GbtParams, gbt_fit
from ..les import FactorMap
from ..models.base import swap_channels
from .formulas import (
    MetricError,
    c_sample,
    c_swap_score,
    chance_normalized,
    dci_from_relevance,
    gc_sample,
    noise_floor,
    summarize_matrix,
)

log = logging.getLogger(__name__)

METRICS = ("M-Swap", "2-Swap", "M-GSample", "2-GSample", "DCI-M", "DCI-C", "DCI-E", "C-Swap", "C-Sample", "GC-Sample")
DCI_METRICS = ("DCI-M", "DCI-C", "DCI-E")
DCI_GBT = GbtParams(n_trees=40, max_depth=3, learning_rate=0.2, n_bins=32)
DCI_MARGIN_Z = 3.0


def valid_metrics(modality: str) -> tuple[str, ...]:
    """Swap and consistency metrics need a decoder judged per frame; time series get DCI only."""
    return METRICS if modality == "video" else DCI_METRICS


@dataclass
class EvalContext:
    """Everything the metrics share: model, judge, factor map and the evaluation samples.

    ``fit_x``/``fit_y`` (usually the training split) train the DCI regressors;
    ``x``/``y`` are scored. Samples whose codes the model flags as unreliable
    are never drawn.
    """

    model: object
    judge: object
    fmap: FactorMap
    manifest: object
    x: np.ndarray
    y: np.ndarray
    fit_x: np.ndarray | None = None
    fit_y: np.ndarray | None = None
    empirical_floors: bool = False
    codes: np.ndarray | None = None
    flags: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.codes is None:
            self.codes = self.model.codes(self.x)
        if self.flags is None:
            self.flags = np.asarray(self.model.code_flags(self.x), dtype=bool)
        self.valid = np.nonzero(self.flags)[0]
        if len(self.valid) < 2:
            raise MetricError("fewer than two evaluation samples have usable codes")
        self.floors = np.array(
            [noise_floor(f.cardinality, self.y[:, i], self.empirical_floors) for i, f in enumerate(self.manifest.factors)]
        )

    @property
    def skip_rate(self) -> float:
        return 1.0 - len(self.valid) / len(self.x)

    @property
    def n_factors(self) -> int:
        return len(self.manifest.factors)

    def draw(self, rng: Rng, n: int) -> np.ndarray:
        return self.valid[[rng.integers(len(self.valid)) for _ in range(n)]]

    def draw_pairs(self, rng: Rng, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Source/donor index pairs with distinct members."""
        m = len(self.valid)
        a = np.array([rng.integers(m) for _ in range(n)], dtype=np.int64)
        b = np.array([(i + 1 + rng.integers(m - 1)) % m for i in a], dtype=np.int64)
        return self.valid[a], self.valid[b]

    def judge_all(self, x: np.ndarray) -> np.ndarray:
        return self.judge.judge_all(x)

    def groups_by_kind(self) -> tuple[list[int], list[int]]:
        static, dynamic = self.fmap.union("static"), self.fmap.union("dynamic")
        if not static or not dynamic:
            raise MetricError("both a static and a dynamic latent group are required")
        shared = sorted(set(static) & set(dynamic))
        if shared:
            self.warnings.append(f"channels {shared} are claimed by static and dynamic factors; they follow the static group")
            dynamic = [d for d in dynamic if d not in shared]
        return static, dynamic

    def frame_factors(self) -> list[int]:
        return [self.manifest.factor_index(n) for n in self.judge.frame_factors()]


def _accuracy(judged: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-column accuracy; judge failures count as wrong."""
    return ((judged == truth) & (judged != INVALID)).mean(axis=0)


# -- two-group interventions ---------------------------------------------------


def two_swap(ctx: EvalContext, n_pairs: int = 256, seed: int = 0) -> float:
    """Exchange the dynamic group between pairs and check both halves keep their sources."""
    static, dynamic = ctx.groups_by_kind()
    a, b = ctx.draw_pairs(Rng(derive_seed(seed, "2-swap")), n_pairs)
    ca, cb = swap_channels(ctx.codes[a], ctx.codes[b], dynamic)  # ca = (s_a, d_b)
    kinds = np.array([f.kind == "static" for f in ctx.manifest.factors])
    truth_a = np.where(kinds[None, :], ctx.y[a], ctx.y[b])
    truth_b = np.where(kinds[None, :], ctx.y[b], ctx.y[a])
    ja = ctx.judge_all(ctx.model.decode_codes(ca))
    jb = ctx.judge_all(ctx.model.decode_codes(cb))
    return float(np.mean([_accuracy(ja, truth_a).mean(), _accuracy(jb, truth_b).mean()]))


def _resampled(ctx: EvalContext, src: np.ndarray, S: list[int], seed: int) -> np.ndarray:
    codes = ctx.codes[src].copy()
    if S:
        codes[..., S] = ctx.model.sample_latent(S, len(src), seed)
    return codes


def two_gsample(ctx: EvalContext, n_samples: int = 256, seed: int = 0) -> float:
    """Resample one group from the model and judge the other group against the source.

    Both directions are scored: new dynamics under kept static factors, and new
    static content under kept dynamics.
    """
    static, dynamic = ctx.groups_by_kind()
    kinds = np.array([f.kind == "static" for f in ctx.manifest.factors])
    scores = []
    for tag, resample, kept in (("dyn", dynamic, kinds), ("stat", static, ~kinds)):
        src = ctx.draw(Rng(derive_seed(seed, f"2-gsample/{tag}")), n_samples)
        codes = _resampled(ctx, src, resample, derive_seed(seed, f"2-gsample/{tag}/values"))
        judged = ctx.judge_all(ctx.model.decode_codes(codes))
        scores.append(_accuracy(judged[:, kept], ctx.y[src][:, kept]).mean())
    return float(np.mean(scores))


# -- multi-factor interventions -----------------------------------------------


@dataclass
class AccuracyMatrix:
    A: np.ndarray  # frozen factor x judged factor
    floors: np.ndarray
    trials: int
    overlap_warning: bool = False

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(self.A * (1.0 - self.A) / self.trials)

    def summary(self, refined: bool = False) -> float:
        return summarize_matrix(self.A, self.floors, refined=refined)

    def to_json(self) -> dict:
        return {"A": self.A.tolist(), "floors": self.floors.tolist(), "trials": self.trials, "overlap_warning": self.overlap_warning}


def _replace_set(ctx: EvalContext, i: int) -> tuple[list[int], bool]:
    """Channels of every factor except ``i``; channels shared with factor ``i`` stay frozen."""
    frozen = set(ctx.fmap.group(ctx.manifest.factors[i].name))
    others = {d for j, f in enumerate(ctx.manifest.factors) if j != i for d in ctx.fmap.group(f.name)}
    return sorted(others - frozen), bool(others & frozen)


def m_swap(ctx: EvalContext, trials: int = 500, seed: int = 0) -> AccuracyMatrix:
    k = ctx.n_factors
    A = np.zeros((k, k))
    overlap = False
    for i in range(k):
        S, shared = _replace_set(ctx, i)
        overlap |= shared
        src, don = ctx.draw_pairs(Rng(derive_seed(seed, f"m-swap/{i}")), trials)
        codes, _ = swap_channels(ctx.codes[src], ctx.codes[don], S)
        A[i] = _accuracy(ctx.judge_all(ctx.model.decode_codes(codes)), ctx.y[src])
    if overlap:
        ctx.warnings.append("overlapping factor groups: shared channels stayed with the frozen factor")
    return AccuracyMatrix(A, ctx.floors.copy(), trials, overlap)


def m_gsample(ctx: EvalContext, trials: int = 500, seed: int = 0, keep_outputs: bool = False):
    """As ``m_swap`` with model-sampled values; optionally returns the generated sequences too."""
    k = ctx.n_factors
    A = np.zeros((k, k))
    overlap = False
    outputs = []
    for i in range(k):
        S, shared = _replace_set(ctx, i)
        overlap |= shared
        src = ctx.draw(Rng(derive_seed(seed, f"m-gsample/{i}")), trials)
        decoded = ctx.model.decode_codes(_resampled(ctx, src, S, derive_seed(seed, f"m-gsample/{i}/values")))
        A[i] = _accuracy(ctx.judge_all(decoded), ctx.y[src])
        if keep_outputs:
            outputs.append(decoded)
    if overlap:
        ctx.warnings.append("overlapping factor groups: shared channels stayed with the frozen factor")
    matrix = AccuracyMatrix(A, ctx.floors.copy(), trials, overlap)
    return (matrix, np.concatenate(outputs)) if keep_outputs else matrix


# -- temporal consistency -------------------------------------------------------


def _frame_labels(ctx: EvalContext, seqs: np.ndarray, factor: int) -> np.ndarray:
    n, t = seqs.shape[:2]
    frames = seqs.reshape(n * t, *seqs.shape[2:])
    return ctx.judge.judge_frames(frames, ctx.manifest.factors[factor].name).reshape(n, t)


def c_swap(ctx: EvalContext, n_pairs: int = 128, seed: int = 0) -> dict[str, float]:
    """Per static, frame-observable factor: share of frames showing the donor's label after swapping its group."""
    factors = ctx.frame_factors()
    if not factors:
        raise MetricError("no frame-observable static factors to swap")
    out = {}
    for m in factors:
        name = ctx.manifest.factors[m].name
        a, b = ctx.draw_pairs(Rng(derive_seed(seed, f"c-swap/{name}")), n_pairs)
        ca, cb = swap_channels(ctx.codes[a], ctx.codes[b], ctx.fmap.group(name))
        la = _frame_labels(ctx, ctx.model.decode_codes(ca), m)
        lb = _frame_labels(ctx, ctx.model.decode_codes(cb), m)
        out[name] = float(np.mean([c_swap_score(la, ctx.y[b, m]).mean(), c_swap_score(lb, ctx.y[a, m]).mean()]))
    return out


def sample_consistency(ctx: EvalContext, generated: np.ndarray, limit: int | None = 512) -> tuple[float, float]:
    """(C-Sample, GC-Sample) over generated sequences, averaged across frame-observable static factors."""
    factors = ctx.frame_factors()
    if not factors:
        raise MetricError("no frame-observable static factors")
    seqs = generated if limit is None else generated[:limit]
    cs, gs = [], []
    for m in factors:
        labels = _frame_labels(ctx, seqs, m)
        cs.append(np.mean(c_sample(labels)))
        gs.append(np.mean(gc_sample(labels)))
    return float(np.mean(cs)), float(np.mean(gs))


# -- DCI ---------------------------------------------------------------------------


def _gbt_accuracy(X_fit, y_fit, X_eval, y_eval, params) -> float:
    if len(np.unique(y_fit)) < 2:
        return float(np.mean(y_eval == y_fit[0]))
    model = gbt_fit(X_fit, y_fit, params)
    return float(np.mean(model.predict(X_eval) == y_eval))


@dataclass
class DciResult:
    modularity: float
    compactness: float
    explicitness: float
    relevance: np.ndarray
    degenerate: bool


def dci(ctx: EvalContext, params: GbtParams | None = None, z: float = DCI_MARGIN_Z) -> DciResult:
    """Relevance of each factor's latent group for predicting every factor.

    Regressors train on ``fit_x`` and are scored on the evaluation samples.
    Relevance is chance-normalized accuracy with a ``z``-standard-error margin,
    so that chance-level predictors contribute exactly zero.
    """
    params = params or DCI_GBT
    if ctx.fit_x is None:
        raise MetricError("DCI needs a fitting split")
    L_fit = ctx.model.latent_vector(ctx.fit_x)
    L_eval = ctx.codes[ctx.valid].mean(axis=1)
    y_eval = ctx.y[ctx.valid]
    k = ctx.n_factors
    Q = np.zeros((k, k))
    n = len(y_eval)
    for i, f in enumerate(ctx.manifest.factors):
        J = ctx.fmap.group(f.name)
        if not J:
            continue
        for j in range(k):
            acc = _gbt_accuracy(L_fit[:, J], ctx.fit_y[:, j], L_eval[:, J], y_eval[:, j], params)
            margin = z * np.sqrt(ctx.floors[j] * (1.0 - ctx.floors[j]) / n)
            Q[i, j] = chance_normalized(acc, ctx.floors[j], margin)
    full = [_gbt_accuracy(L_fit, ctx.fit_y[:, j], L_eval, y_eval[:, j], params) for j in range(k)]
    E = chance_normalized(full, ctx.floors)
    M, C, E_mean, degenerate = dci_from_relevance(Q, E)
    return DciResult(M, C, E_mean, Q, degenerate)


def evaluate_once(ctx: EvalContext, metrics, seed: int, sizes: dict | None = None) -> dict[str, float]:
    """One evaluation run of the requested metrics with a single seed."""
    sizes = {"pairs": 256, "trials": 500, "consistency": 512, **(sizes or {})}
    metrics = list(metrics)
    out: dict[str, float] = {}
    if "M-Swap" in metrics:
        out["M-Swap"] = m_swap(ctx, sizes["trials"], derive_seed(seed, "M-Swap")).summary()
    if "2-Swap" in metrics:
        out["2-Swap"] = two_swap(ctx, sizes["pairs"], derive_seed(seed, "2-Swap"))
    if any(m in metrics for m in ("M-GSample", "C-Sample", "GC-Sample")):
        matrix, generated = m_gsample(ctx, sizes["trials"], derive_seed(seed, "M-GSample"), keep_outputs=True)
        if "M-GSample" in metrics:
            out["M-GSample"] = matrix.summary()
        if "C-Sample" in metrics or "GC-Sample" in metrics:
            pick = Rng(derive_seed(seed, "consistency")).permutation(len(generated))[: sizes["consistency"]]
            cs, gs = sample_consistency(ctx, generated[np.sort(pick)], limit=None)
            if "C-Sample" in metrics:
                out["C-Sample"] = cs
            if "GC-Sample" in metrics:
                out["GC-Sample"] = gs
    if "2-GSample" in metrics:
        out["2-GSample"] = two_gsample(ctx, sizes["pairs"], derive_seed(seed, "2-GSample"))
    if any(m in metrics for m in DCI_METRICS):
        r = dci(ctx)
        out.update({"DCI-M": r.modularity, "DCI-C": r.compactness, "DCI-E": r.explicitness})
    if "C-Swap" in metrics:
        out["C-Swap"] = float(np.mean(list(c_swap(ctx, sizes["pairs"] // 2, derive_seed(seed, "C-Swap")).values())))
    return {m: out[m] for m in METRICS if m in out and m in metrics}
