"""Model names, hyperparameter schemas and construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .analytic import GroundTruthModel
from .autoencoders import SequentialAE, SequentialBetaVAE, SequentialVAE, SparseAE
from .koopman_models import SKD, SSMSKD


@dataclass(frozen=True)
class Hyper:
    kind: type | tuple
    default: Any
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""


def _positive(v):
    return v >= 1


def _hidden_list(v):
    return isinstance(v, list) and len(v) >= 1 and all(isinstance(h, int) and not isinstance(h, bool) and h >= 1 for h in v)


_ACT = Hyper(str, "relu", lambda v: v in ("relu", "tanh"), "relu or tanh")
_AE = {
    "latent_dim": Hyper(int, 8, _positive, ">= 1"),
    "hidden_dims": Hyper(list, [128], _hidden_list, "non-empty list of positive ints"),
    "activation": _ACT,
}
_KOOPMAN = {
    "k_dim": Hyper(int, 16, lambda v: v >= 2, ">= 2"),
    "hidden_dim": Hyper(int, 128, _positive, ">= 1"),
    "static_mode": Hyper(str, "ball", lambda v: v in ("ball", "norm"), "ball or norm"),
    "dynamic_thresh": Hyper((int, float), 0.25, lambda v: 0.0 < v < 1.0, "in (0, 1)"),
    "w_rec": Hyper((int, float), 1.0, lambda v: v >= 0, ">= 0"),
    "w_pred": Hyper((int, float), 1.0, lambda v: v >= 0, ">= 0"),
    "w_eigs": Hyper((int, float), 1.0, lambda v: v >= 0, ">= 0"),
    "activation": _ACT,
}

MODELS: dict[str, type] = {
    "ae": SequentialAE,
    "vae": SequentialVAE,
    "beta_vae": SequentialBetaVAE,
    "sparse_ae": SparseAE,
    "skd": SKD,
    "ssm_skd": SSMSKD,
    "analytic": GroundTruthModel,
}

SCHEMAS: dict[str, dict[str, Hyper]] = {
    "ae": dict(_AE),
    "vae": dict(_AE),
    "beta_vae": {**_AE, "beta": Hyper((int, float), 4.0, lambda v: v >= 0, ">= 0")},
    "sparse_ae": {**_AE, "sparsity_weight": Hyper((int, float), 0.01, lambda v: v >= 0, ">= 0")},
    "skd": {**_KOOPMAN, "static_size": Hyper(int, 4, _positive, ">= 1")},
    "ssm_skd": {**_KOOPMAN, "static_size": Hyper(int, 1, lambda v: v == 1, "exactly 1")},
    "analytic": {},
}


def validate_hyper(model: str, hyper: dict) -> dict:
    """Fill defaults and check types and ranges; raises ValueError on any problem."""
    if model not in SCHEMAS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(SCHEMAS)}")
    schema = SCHEMAS[model]
    unknown = sorted(set(hyper) - set(schema))
    if unknown:
        raise ValueError(f"unknown hyperparameter(s) for {model}: {unknown}")
    out = {}
    for key, spec in schema.items():
        value = hyper.get(key, spec.default)
        if isinstance(value, bool) or not isinstance(value, spec.kind):
            raise ValueError(f"{key} has type {type(value).__name__}, expected {spec.kind}")
        if not spec.check(value):
            raise ValueError(f"{key}={value!r} out of range ({spec.rule})")
        out[key] = float(value) if spec.kind == (int, float) else value
    if model == "skd" and out["static_size"] >= out["k_dim"]:
        raise ValueError("static_size must be smaller than k_dim")
    return out


def build_model(name: str, manifest, hyper: dict | None = None, seed: int = 0, **kwargs):
    return MODELS[name](manifest, validate_hyper(name, hyper or {}), seed, **kwargs)
