"""Seeded train/val/test partitions."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core.rng import Rng, derive_seed


def split_indices(n: int, ratios: Sequence[float], seed: int, names: Sequence[str] = ("train", "val", "test")) -> dict[str, list[int]]:
    """Shuffle ``range(n)`` with the seeded stream and cut it into contiguous blocks."""
    if len(ratios) != len(names):
        raise ValueError("one ratio per split name is required")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    if min(ratios) < 0:
        raise ValueError("ratios must be non-negative")
    sizes = [int(round(r * n)) for r in ratios[:-1]]
    sizes.append(n - sum(sizes))
    if min(sizes) <= 0:
        raise ValueError(f"a split would be empty: sizes {sizes}")
    perm = Rng(derive_seed(seed, "split")).permutation(n)
    out, start = {}, 0
    for name, size in zip(names, sizes):
        out[name] = sorted(perm[start : start + size].tolist())
        start += size
    return out


def split_dataset(manifest, ratios: Sequence[float], seed: int) -> dict[str, list[int]]:
    splits = split_indices(manifest.n_samples, ratios, seed)
    manifest.splits = splits
    return splits
