"""Checkpoint directories: ``manifest.json`` plus one ``params.bin`` blob.

The blob concatenates little-endian arrays in manifest order: model
parameters under ``param/``, post-training state (latent bank, reference
Koopman matrix) under ``extra/`` and optimizer moments under ``optim/``.
The manifest holds everything needed to rebuild the model, including the
dataset manifest, and the blob's sha256.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..datasets.container import ContainerError, dump_json
from ..datasets.factors import DatasetManifest
from .registry import build_model

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: object
    optim: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _arrays_of(model, optim) -> list[tuple[str, np.ndarray]]:
    out = [(f"param/{name}", p.data) for name, p in model.named_parameters()]
    out += [(f"extra/{k}", v) for k, v in sorted(model.extra_state().items())]
    out += [(f"optim/{k}", v) for k, v in sorted((optim or {}).items())]
    return out


def save_checkpoint(path, model, optim: dict[str, np.ndarray] | None = None, meta: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries, chunks, offset = [], [], 0
    for name, arr in _arrays_of(model, optim):
        arr = np.asarray(arr)
        le = arr.dtype.newbyteorder("<") if arr.dtype.byteorder not in ("|",) else arr.dtype
        raw = np.ascontiguousarray(arr, dtype=le).tobytes()
        entries.append({"name": name, "dtype": le.str, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    manifest = {
        "format": FORMAT_VERSION,
        "model": model.name,
        "hyper": model.hyper,
        "seed": model.seed,
        "dtype": model.dtype.str,
        "dataset": model.manifest.to_json(),
        "arrays": entries,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "meta": meta or {},
    }
    tmp = path / "params.bin.tmp"
    tmp.write_bytes(blob)
    os.replace(tmp, path / "params.bin")
    tmp = path / "manifest.json.tmp"
    tmp.write_text(dump_json(manifest), encoding="utf-8")
    os.replace(tmp, path / "manifest.json")
    return path


def read_manifest(path) -> dict:
    try:
        obj = json.loads((Path(path) / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ContainerError(f"no checkpoint manifest in {path}") from exc
    if obj.get("format") != FORMAT_VERSION:
        raise ContainerError(f"unsupported checkpoint format {obj.get('format')!r}")
    return obj


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    obj = read_manifest(path)
    blob = (path / "params.bin").read_bytes()
    if hashlib.sha256(blob).hexdigest() != obj["sha256"]:
        raise ContainerError(f"checksum mismatch for {path / 'params.bin'}")
    arrays = {}
    for e in obj["arrays"]:
        raw = blob[e["offset"] : e["offset"] + e["nbytes"]]
        if len(raw) != e["nbytes"]:
            raise ContainerError(f"array {e['name']} truncated")
        arrays[e["name"]] = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    dataset = DatasetManifest.from_json(obj["dataset"])
    model = build_model(obj["model"], dataset, obj["hyper"], obj["seed"], dtype=np.dtype(obj["dtype"]))
    for name, p in model.named_parameters():
        key = f"param/{name}"
        if key not in arrays or arrays[key].shape != p.shape:
            raise ContainerError(f"parameter {name} missing or mis-shaped in checkpoint")
        p.data = arrays[key].astype(p.data.dtype)
    model.load_extra_state({k[6:]: v for k, v in arrays.items() if k.startswith("extra/")})
    optim = {k[6:]: v for k, v in arrays.items() if k.startswith("optim/")}
    return Checkpoint(model, optim, obj.get("meta", {}))
