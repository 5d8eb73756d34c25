"""On-disk dataset container and the in-memory dataset.

A container is a directory holding ``manifest.json`` (sorted keys, UTF-8),
``data.bin`` (float32 little-endian, row-major N x T x step_shape) and
``labels.bin`` (uint32 little-endian, N x F). The manifest records a sha256
of each binary file, checked on read.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .factors import DatasetManifest


class ContainerError(ValueError):
    """Corrupt, truncated or inconsistent container."""


@dataclass
class Dataset:
    manifest: DatasetManifest
    data: np.ndarray  # float32, N x T x step_shape
    labels: np.ndarray  # int64, N x F

    def __post_init__(self):
        m = self.manifest
        if self.labels.ndim != 2 or self.labels.shape[1] != len(m.factors):
            raise ContainerError(f"labels have {self.labels.shape[-1]} columns but the manifest declares {len(m.factors)} factors")
        expected = (m.n_samples, m.seq_len, *m.step_shape)
        if self.data.shape != expected:
            raise ContainerError(f"data shape {self.data.shape} does not match manifest {expected}")
        if self.labels.shape[0] != m.n_samples:
            raise ContainerError("label rows do not match the sample count")
        for j, f in enumerate(m.factors):
            col = self.labels[:, j]
            if col.size and (col.min() < 0 or col.max() >= f.cardinality):
                raise ContainerError(f"labels of factor {f.name!r} fall outside its label space")

    def split(self, name: str) -> np.ndarray:
        return np.asarray(self.manifest.splits[name], dtype=np.int64)

    def subset(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        idx = self.split(name)
        return self.data[idx], self.labels[idx]


def _sha256(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_container(dataset: Dataset, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    data_raw = np.ascontiguousarray(dataset.data, dtype="<f4").tobytes()
    labels_raw = np.ascontiguousarray(dataset.labels, dtype="<u4").tobytes()
    manifest = dataset.manifest
    manifest.checksums = {"data.bin": _sha256(data_raw), "labels.bin": _sha256(labels_raw)}
    for name, raw in (("data.bin", data_raw), ("labels.bin", labels_raw)):
        tmp = path / (name + ".tmp")
        tmp.write_bytes(raw)
        os.replace(tmp, path / name)
    (path / "manifest.json").write_text(dump_json(manifest.to_json()), encoding="utf-8")
    return path


def read_container(path) -> Dataset:
    path = Path(path)
    try:
        obj = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ContainerError(f"no manifest.json in {path}") from exc
    except json.JSONDecodeError as exc:
        raise ContainerError(f"malformed manifest: {exc}") from exc
    manifest = DatasetManifest.from_json(obj)
    arrays = {}
    shapes = {
        "data.bin": ((manifest.n_samples, manifest.seq_len, *manifest.step_shape), "<f4"),
        "labels.bin": ((manifest.n_samples, len(manifest.factors)), "<u4"),
    }
    for name, (shape, dt) in shapes.items():
        raw = (path / name).read_bytes()
        expected = int(np.prod(shape)) * 4
        if len(raw) != expected:
            raise ContainerError(f"{name} holds {len(raw)} bytes, expected {expected} (truncated or padded)")
        if _sha256(raw) != manifest.checksums.get(name):
            raise ContainerError(f"checksum mismatch for {name}")
        arrays[name] = np.frombuffer(raw, dtype=dt).reshape(shape)
    data = arrays["data.bin"].astype(np.float32)
    labels = arrays["labels.bin"].astype(np.int64)
    return Dataset(manifest, data, labels)
