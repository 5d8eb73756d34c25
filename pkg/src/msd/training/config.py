"""JSON training configuration with strict validation.

Schema (top level)::

    model        str, required     one of msd.models.registry.MODELS
    dataset      str, required     path to a dataset container
    epochs       int  >= 0         default 20
    batch_size   int  >= 1         default 32
    seed         int  >= 0         default 0
    patience     int  >= 1         default 10   (early stopping, validation loss)
    min_delta    float >= 0        default 1e-5
    time_budget  float >= 0        default 0    (seconds; 0 = unlimited)
    optimizer    {lr, beta1, beta2, eps}
    hyper        model hyperparameters, checked against the model's schema

Unknown or duplicate keys anywhere are errors.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..models.registry import validate_hyper


class ConfigError(ValueError):
    pass


@dataclass
class OptimizerConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainingConfig:
    model: str
    dataset: str
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    patience: int = 10
    min_delta: float = 1e-5
    time_budget: float = 0.0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    hyper: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


_TOP = {
    "epochs": (int, lambda v: v >= 0, ">= 0"),
    "batch_size": (int, lambda v: v >= 1, ">= 1"),
    "seed": (int, lambda v: v >= 0, ">= 0"),
    "patience": (int, lambda v: v >= 1, ">= 1"),
    "min_delta": ((int, float), lambda v: v >= 0, ">= 0"),
    "time_budget": ((int, float), lambda v: v >= 0, ">= 0"),
}
_OPT = {
    "lr": lambda v: v > 0,
    "beta1": lambda v: 0 <= v < 1,
    "beta2": lambda v: 0 <= v < 1,
    "eps": lambda v: v > 0,
}


def _no_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}")
        seen[key] = value
    return seen


def _typed(key, value, kind, check, rule):
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigError(f"{key} must be {kind}, got {type(value).__name__}")
    if not check(value):
        raise ConfigError(f"{key}={value!r} out of range ({rule})")
    return value


def config_from_dict(obj: dict) -> TrainingConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"model", "dataset", "optimizer", "hyper", *_TOP}
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s): {unknown}")
    for key in ("model", "dataset"):
        if not isinstance(obj.get(key), str):
            raise ConfigError(f"{key} is required and must be a string")
    kwargs = {k: _typed(k, obj[k], *_TOP[k]) for k in _TOP if k in obj}
    opt = obj.get("optimizer", {})
    if not isinstance(opt, dict):
        raise ConfigError("optimizer must be an object")
    bad = sorted(set(opt) - set(_OPT))
    if bad:
        raise ConfigError(f"unknown optimizer key(s): {bad}")
    optimizer = OptimizerConfig(**{k: float(_typed(f"optimizer.{k}", v, (int, float), _OPT[k], "see schema")) for k, v in opt.items()})
    hyper = obj.get("hyper", {})
    if not isinstance(hyper, dict):
        raise ConfigError("hyper must be an object")
    try:
        hyper = validate_hyper(obj["model"], hyper)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for k in ("min_delta", "time_budget"):
        if k in kwargs:
            kwargs[k] = float(kwargs[k])
    return TrainingConfig(model=obj["model"], dataset=obj["dataset"], optimizer=optimizer, hyper=hyper, **kwargs)


def parse_config_text(text: str) -> TrainingConfig:
    try:
        obj = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    return config_from_dict(obj)


def parse_config(path) -> TrainingConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    cfg = parse_config_text(text)
    # relative dataset paths resolve against the config's directory
    if not Path(cfg.dataset).is_absolute():
        cfg.dataset = str((path.parent / cfg.dataset).resolve())
    return cfg
