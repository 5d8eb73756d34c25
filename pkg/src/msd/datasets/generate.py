"""Build a full dataset for a named generator."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import shapes2d, timeseries
from .container import Dataset
from .factors import DatasetManifest, build_state_space
from .split import split_indices

GENERATORS = ("shapes2d16", "ts24")


def enumerate_states(name: str, seed: int = 0, noise: float = 0.05) -> tuple[np.ndarray, np.ndarray, list]:
    """Every configuration of a generator: (sequences, labels, factor specs)."""
    if name == "shapes2d16":
        factors = shapes2d.factor_specs()
        states = build_state_space(factors)
        return shapes2d.render_all(states), states, factors
    if name == "ts24":
        factors = timeseries.factor_specs()
        states = build_state_space(factors)
        return timeseries.generate_all(states, seed, noise), states, factors
    raise ValueError(f"unknown dataset {name!r}; choose from {GENERATORS}")


def make_dataset(name: str, seed: int = 0, ratios: Sequence[float] = (0.7, 0.15, 0.15), noise: float = 0.05) -> Dataset:
    """One sample per configuration of the generator's state space."""
    data, states, factors = enumerate_states(name, seed, noise)
    n = len(states)
    generator = {"name": name, "seed": int(seed)}
    if name == "ts24":
        generator["noise"] = float(noise)
    manifest = DatasetManifest(
        name=name,
        factors=factors,
        n_samples=n,
        seq_len=data.shape[1],
        step_shape=data.shape[2:],
        splits=split_indices(n, ratios, seed),
        modality="video" if name == "shapes2d16" else "timeseries",
        generator=generator,
    )
    return Dataset(manifest, data, states.copy())


def enumerate_for(manifest: DatasetManifest) -> tuple[np.ndarray, np.ndarray]:
    """Regenerate the clean state enumeration that produced a manifest's dataset."""
    gen = manifest.generator
    data, states, _ = enumerate_states(gen["name"], gen.get("seed", 0), gen.get("noise", 0.05))
    return data, states
