"""Factor declarations, dataset manifests and state-space enumeration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class FactorSpec:
    """A discrete factor of variation.

    ``frame_observable`` is False for factors that cannot be read off a single
    frame (for example where a moving glyph started); frame-level judging and
    consistency metrics skip those.
    """

    name: str
    kind: str
    labels: tuple[str, ...]
    frame_observable: bool = True

    def __post_init__(self):
        if self.kind not in ("static", "dynamic"):
            raise ValueError(f"factor {self.name!r}: kind must be static or dynamic, got {self.kind!r}")
        if len(self.labels) < 2:
            raise ValueError(f"factor {self.name!r} needs at least two labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"factor {self.name!r} has duplicate labels")
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def cardinality(self) -> int:
        return len(self.labels)

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "labels": list(self.labels), "frame_observable": self.frame_observable}

    @classmethod
    def from_json(cls, obj: dict) -> "FactorSpec":
        return cls(obj["name"], obj["kind"], tuple(obj["labels"]), bool(obj.get("frame_observable", True)))


@dataclass
class DatasetManifest:
    name: str
    factors: list[FactorSpec]
    n_samples: int
    seq_len: int
    step_shape: tuple[int, ...]
    splits: dict[str, list[int]] = field(default_factory=dict)
    dtype: str = "float32"
    modality: str = "video"
    generator: dict = field(default_factory=dict)
    checksums: dict[str, str] = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    def __post_init__(self):
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise ValueError("factor names must be unique")
        self.step_shape = tuple(int(s) for s in self.step_shape)
        seen: set[int] = set()
        for key, idx in self.splits.items():
            s = set(idx)
            if len(s) != len(idx) or s & seen:
                raise ValueError(f"split {key!r} overlaps another split or repeats indices")
            if idx and (min(idx) < 0 or max(idx) >= self.n_samples):
                raise ValueError(f"split {key!r} has indices outside [0, {self.n_samples})")
            seen |= s

    @property
    def factor_names(self) -> list[str]:
        return [f.name for f in self.factors]

    def factor(self, name: str) -> FactorSpec:
        for f in self.factors:
            if f.name == name:
                return f
        raise KeyError(name)

    def factor_index(self, name: str) -> int:
        return self.factor_names.index(name)

    def static_factors(self) -> list[int]:
        return [i for i, f in enumerate(self.factors) if f.kind == "static"]

    def dynamic_factors(self) -> list[int]:
        return [i for i, f in enumerate(self.factors) if f.kind == "dynamic"]

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "name": self.name,
            "modality": self.modality,
            "factors": [f.to_json() for f in self.factors],
            "n_samples": self.n_samples,
            "seq_len": self.seq_len,
            "step_shape": list(self.step_shape),
            "dtype": self.dtype,
            "splits": {k: list(map(int, v)) for k, v in self.splits.items()},
            "generator": self.generator,
            "checksums": self.checksums,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetManifest":
        if obj.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unknown manifest version {obj.get('version')!r}")
        return cls(
            name=obj["name"],
            factors=[FactorSpec.from_json(f) for f in obj["factors"]],
            n_samples=int(obj["n_samples"]),
            seq_len=int(obj["seq_len"]),
            step_shape=tuple(obj["step_shape"]),
            splits={k: list(v) for k, v in obj.get("splits", {}).items()},
            dtype=obj.get("dtype", "float32"),
            modality=obj.get("modality", "video"),
            generator=obj.get("generator", {}),
            checksums=obj.get("checksums", {}),
            version=obj["version"],
        )


def build_state_space(factors: Sequence) -> np.ndarray:
    """All label combinations, lexicographic in declaration order (last factor fastest).

    Accepts FactorSpecs or plain cardinalities; returns an (S, F) int64 array.
    """
    if len(factors) == 0:
        raise ValueError("empty factor list")
    sizes = [f.cardinality if isinstance(f, FactorSpec) else int(f) for f in factors]
    if min(sizes) < 1:
        raise ValueError("every factor needs at least one value")
    grids = np.indices(sizes).reshape(len(sizes), -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)
