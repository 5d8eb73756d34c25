"""Latent exploration: find which latent channels carry each factor.

Two strategies produce the same ``FactorMap``:

* predictor-based: fit a boosted-tree classifier per factor on time-averaged
  codes and keep the smallest importance-ranked prefix reaching ``tau``;
* swap-based: swap candidate channel subsets between sample pairs, decode,
  judge, and keep the subset that changes its factor most selectively.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core.rng import Rng, derive_seed
from .judges.base import INVALID
from .learners.gbt import GbtParams, gbt_fit
from .models.base import swap_channels

LES_GBT = GbtParams(n_trees=30, max_depth=3, learning_rate=0.2, n_bins=32)


class ExplorationError(ValueError):
    pass


@dataclass
class FactorMap:
    factors: list[str]
    kinds: list[str]
    latent_dim: int
    groups: dict[str, list[int]]
    relevance: dict[str, list[float]]
    strategy: str
    unlocated: list[str] = field(default_factory=list)
    low_confidence: bool = False
    overlap: int = 0
    details: dict = field(default_factory=dict)

    def group(self, factor: str) -> list[int]:
        return list(self.groups.get(factor, []))

    def union(self, kind: str) -> list[int]:
        dims = {d for f, k in zip(self.factors, self.kinds) if k == kind for d in self.groups.get(f, [])}
        return sorted(dims)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "FactorMap":
        obj = dict(obj)
        obj["groups"] = {k: [int(d) for d in v] for k, v in obj["groups"].items()}
        return cls(**obj)

    def same_groups(self, other: "FactorMap") -> bool:
        return {f: sorted(v) for f, v in self.groups.items()} == {f: sorted(v) for f, v in other.groups.items()}


def count_overlap(groups: dict[str, list[int]]) -> int:
    """Number of channels claimed by more than one factor."""
    counts: dict[int, int] = {}
    for dims in groups.values():
        for d in dims:
            counts[d] = counts.get(d, 0) + 1
    return sum(1 for c in counts.values() if c > 1)


def _stochastic(row: np.ndarray) -> np.ndarray:
    row = np.maximum(np.asarray(row, dtype=np.float64), 0.0)
    total = row.sum()
    return row / total if total > 0 else np.full(len(row), 1.0 / len(row))


def importance_prefix(importances: np.ndarray, tau: float) -> list[int]:
    """Smallest set of top-ranked dims whose cumulative importance reaches ``tau``.

    Ties in importance rank the lower index first.
    """
    order = np.argsort(-importances, kind="stable")
    cum = np.cumsum(importances[order])
    k = int(np.searchsorted(cum, tau - 1e-12, side="left")) + 1
    keep = order[: min(k, len(order))]
    return sorted(int(d) for d in keep if importances[d] > 0)


def predictor_les(
    latents: np.ndarray,
    labels: np.ndarray,
    manifest,
    tau: float = 0.9,
    disjoint: bool = False,
    params: GbtParams | None = None,
) -> FactorMap:
    """``latents``: N x l fixed-length vectors; ``labels``: N x F label indices."""
    if not 0.0 < tau <= 1.0:
        raise ExplorationError("tau must lie in (0, 1]")
    params = params or LES_GBT
    latents = np.asarray(latents, dtype=np.float64)
    l = latents.shape[1]
    table = np.zeros((len(manifest.factors), l))
    for i, f in enumerate(manifest.factors):
        y = labels[:, i]
        if len(np.unique(y)) < 2:
            raise ExplorationError(f"factor {f.name!r} has a single label in the exploration split")
        table[i] = gbt_fit(latents, y, params).importances()
    groups = {}
    if disjoint:
        owner = np.argmax(table, axis=0)
        for i, f in enumerate(manifest.factors):
            groups[f.name] = [d for d in importance_prefix(table[i], tau) if owner[d] == i]
    else:
        groups = {f.name: importance_prefix(table[i], tau) for i, f in enumerate(manifest.factors)}
    names = manifest.factor_names
    return FactorMap(
        factors=names,
        kinds=[f.kind for f in manifest.factors],
        latent_dim=l,
        groups=groups,
        relevance={n: _stochastic(table[i]).tolist() for i, n in enumerate(names)},
        strategy="predictor",
        unlocated=[n for n in names if not groups[n]],
        low_confidence=bool(table.max() < 2.0 / l),
        overlap=count_overlap(groups),
        details={"tau": tau, "disjoint": disjoint},
    )


class _SwapProbe:
    """Evaluates change rates for candidate subsets on a fixed set of sample pairs."""

    def __init__(self, model, codes: np.ndarray, judge, pairs: np.ndarray, n_factors: int):
        self.model = model
        self.codes = codes
        self.judge = judge
        self.src, self.don = pairs[:, 0], pairs[:, 1]
        self.base = judge.judge_all(model.decode_codes(codes[self.src]))
        self.n_factors = n_factors
        self.calls = 0
        self.cache: dict[tuple[int, ...], np.ndarray] = {}

    def change_rate(self, S: tuple[int, ...]) -> np.ndarray:
        if S in self.cache:
            return self.cache[S]
        if not S:
            rate = np.zeros(self.n_factors)
        else:
            swapped, _ = swap_channels(self.codes[self.src], self.codes[self.don], S)
            judged = self.judge.judge_all(self.model.decode_codes(swapped))
            self.calls += len(self.src)
            valid = (judged != INVALID) & (self.base != INVALID)
            rate = ((judged != self.base) & valid).sum(axis=0) / np.maximum(valid.sum(axis=0), 1)
        self.cache[S] = rate
        return rate


def swap_score(rate: np.ndarray, f: int, size: int, lam: float) -> float:
    """Selective change of factor ``f`` minus the penalty for each channel beyond the first."""
    others = np.delete(rate, f)
    return float(rate[f] - (others.mean() if len(others) else 0.0) - lam * max(size - 1, 0))


def swap_les(
    model,
    codes: np.ndarray,
    judge,
    manifest,
    lam: float = 0.05,
    n_pairs: int = 50,
    budget: int = 2000,
    seed: int = 0,
    fanout: int = 3,
) -> FactorMap:
    """Greedy subset search: all singletons, then grow each factor's best subset.

    ``codes`` are the model's codes for the exploration samples. Every
    candidate costs ``n_pairs`` judge calls against each factor's budget;
    growth stops when the budget is spent or no grown subset scores higher.
    """
    codes = np.asarray(codes)
    n, l = len(codes), codes.shape[-1]
    F = len(manifest.factors)
    rng = Rng(derive_seed(seed, "swap-les/pairs"))
    src = np.array([rng.integers(n) for _ in range(n_pairs)], dtype=np.int64)
    don = np.array([(s + 1 + rng.integers(n - 1)) % n for s in src], dtype=np.int64)
    probe = _SwapProbe(model, codes, judge, np.stack([src, don], axis=1), F)
    max_candidates = max(budget // n_pairs, 1)

    singles = np.zeros((F, l))
    for d in range(l):
        if len(probe.cache) >= max_candidates:
            break
        rate = probe.change_rate((d,))
        singles[:, d] = [swap_score(rate, f, 1, lam) for f in range(F)]
    best = []
    for f in range(F):
        d = int(np.argmax(singles[f]))  # lowest index among ties
        best.append(((d,), singles[f, d]))
    growing = set(range(F))
    while growing and len(probe.cache) < max_candidates:
        nxt = set()
        for f in sorted(growing):
            S, score = best[f]
            ranked = [int(d) for d in np.argsort(-singles[f], kind="stable") if int(d) not in S][:fanout]
            for d in ranked:
                cand = tuple(sorted(S + (d,)))
                if cand in probe.cache:
                    continue
                if len(probe.cache) >= max_candidates:
                    break
                s = swap_score(probe.change_rate(cand), f, len(cand), lam)
                if s > best[f][1] + 1e-12:
                    best[f] = (cand, s)
                    nxt.add(f)
        growing = nxt
    names = manifest.factor_names
    groups = {names[f]: (sorted(best[f][0]) if best[f][1] > 0 else []) for f in range(F)}
    return FactorMap(
        factors=names,
        kinds=[fs.kind for fs in manifest.factors],
        latent_dim=l,
        groups=groups,
        relevance={names[f]: _stochastic(singles[f]).tolist() for f in range(F)},
        strategy="swap",
        unlocated=[nm for nm in names if not groups[nm]],
        low_confidence=False,
        overlap=count_overlap(groups),
        details={
            "lambda": lam,
            "pairs": n_pairs,
            "candidates": len(probe.cache),
            "judge_calls_per_factor": probe.calls,
            "scores": {names[f]: float(best[f][1]) for f in range(F)},
        },
    )
