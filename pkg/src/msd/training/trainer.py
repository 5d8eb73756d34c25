"""Minibatch training with seeded shuffling, best-validation checkpoints and resume.

Output directory layout::

    train_log.tsv   one tab-separated record per epoch
    last/           latest parameters, optimizer moments and loop state
    best/           best-validation parameters, finalized (latent bank etc.)
"""

from __future__ import annotations

import hashlib

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core.optim import Adam
from ..core.rng import Rng, derive_seed
from ..core.tensor import NonFiniteError, backward
from ..datasets.container import Dataset, read_container
from ..models.checkpoint import load_checkpoint, save_checkpoint
from ..models.registry import build_model
from .config import TrainingConfig

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainResult:
    best: Path
    epochs_run: int
    best_epoch: int
    best_val: float
    stopped_early: bool
    history: list[dict]


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return Rng(derive_seed(seed, f"shuffle/{epoch}")).permutation(n)


def batch_rng(seed: int, epoch: int, batch: int) -> Rng:
    return Rng(derive_seed(seed, f"noise/{epoch}/{batch}"))


def evaluate_loss(model, x: np.ndarray, seed: int, chunk: int = 128) -> tuple[float, dict[str, float]]:
    """Sample-weighted mean loss and terms over ``x`` with a fixed noise stream."""
    total, terms, n = 0.0, {}, 0
    for b, s in enumerate(range(0, len(x), chunk)):
        xb = x[s : s + chunk]
        loss, t = model.loss_terms(xb, Rng(derive_seed(seed, f"eval/{b}")))
        total += loss.item() * len(xb)
        for k, v in t.items():
            terms[k] = terms.get(k, 0.0) + v * len(xb)
        n += len(xb)
    return total / n, {k: v / n for k, v in terms.items()}


def dataset_identity(ds: Dataset) -> str:
    digest = hashlib.sha256()
    for arr in (ds.data, ds.labels):
        digest.update(np.ascontiguousarray(arr).tobytes())
    return f"{ds.manifest.name}@sha256:{digest.hexdigest()}"


def _resumable(cfg_json: dict) -> dict:
    """Config fields that must match to continue a run; the epoch count and time budget may grow."""
    return {k: v for k, v in cfg_json.items() if k not in ("epochs", "time_budget")}


def _format_row(values: list) -> str:
    return "\t".join(v if isinstance(v, str) else f"{v:.9g}" for v in values)


def train(cfg: TrainingConfig, out_dir, dataset: Dataset | None = None, resume: bool = True) -> TrainResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = dataset if dataset is not None else read_container(cfg.dataset)
    train_x, _ = ds.subset("train")
    val_x, _ = ds.subset("val")
    model = build_model(cfg.model, ds.manifest, cfg.hyper, seed=cfg.seed)
    if not model.trainable:
        raise TrainingError(f"model {cfg.model!r} has no trainable parameters")
    params = model.parameters()
    opt = Adam(params, cfg.optimizer.lr, cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps)
    state = {"epoch": 0, "best_val": float("inf"), "best_epoch": 0, "bad_epochs": 0, "stopped": False}
    history: list[dict] = []
    log_path = out / "train_log.tsv"
    meta_cfg = cfg.to_json()
    # identify the data by content so checkpoints do not depend on where the container lives
    meta_cfg["dataset"] = dataset_identity(ds)

    if resume and (out / "last" / "manifest.json").exists():
        ck = load_checkpoint(out / "last")
        if _resumable(ck.meta.get("config", {})) != _resumable(meta_cfg):
            raise TrainingError("existing run in output directory was made with a different config")
        for p, q in zip(params, ck.model.parameters()):
            p.data = q.data.copy()
        opt.load_state_arrays(ck.optim)
        state = dict(ck.meta["loop"])
        history = list(ck.meta.get("history", []))
        log.info("resuming at epoch %d", state["epoch"])
    else:
        log_path.write_text("", encoding="utf-8")
        # the initial parameters are the best known until a validated epoch beats them
        save_checkpoint(out / "best", model, meta={"config": meta_cfg, "epoch": 0})

    started = time.monotonic()
    n = len(train_x)
    while state["epoch"] < cfg.epochs and not state["stopped"]:
        epoch = state["epoch"] + 1
        order = epoch_order(cfg.seed, epoch, n)
        tot, terms_sum = 0.0, {}
        for b, s in enumerate(range(0, n, cfg.batch_size)):
            xb = train_x[order[s : s + cfg.batch_size]]
            try:
                loss, terms = model.loss_terms(xb, batch_rng(cfg.seed, epoch, b))
                grads = backward(loss, params)
            except NonFiniteError as exc:
                raise TrainingError(f"non-finite value at epoch {epoch}, batch {b}: {exc}") from exc
            if not np.isfinite(loss.item()) or not all(np.isfinite(g).all() for g in grads):
                raise TrainingError(f"non-finite loss or gradient at epoch {epoch}, batch {b}; terms {terms}")
            opt.step(grads)
            tot += loss.item() * len(xb)
            for k, v in terms.items():
                terms_sum[k] = terms_sum.get(k, 0.0) + v * len(xb)
        train_loss = tot / n
        val_loss, val_terms = evaluate_loss(model, val_x, cfg.seed)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        record = {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
        record.update({f"train_{k}": v / n for k, v in sorted(terms_sum.items())})
        record.update({f"val_{k}": v for k, v in sorted(val_terms.items())})
        history.append(record)
        with log_path.open("a", encoding="utf-8") as fh:
            if epoch == 1:
                fh.write("\t".join(record) + "\n")
            fh.write(_format_row(list(record.values())) + "\n")
        log.info("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)

        if val_loss < state["best_val"] - cfg.min_delta:
            state.update(best_val=val_loss, best_epoch=epoch, bad_epochs=0)
            save_checkpoint(out / "best", model, meta={"config": meta_cfg, "epoch": epoch})
        else:
            state["bad_epochs"] += 1
            state["stopped"] = state["bad_epochs"] >= cfg.patience
        state["epoch"] = epoch
        if cfg.time_budget and time.monotonic() - started >= cfg.time_budget:
            state["stopped"] = True
            log.info("time budget of %.0f s reached after epoch %d", cfg.time_budget, epoch)
        save_checkpoint(out / "last", model, optim=opt.state_arrays(), meta={"config": meta_cfg, "loop": state, "history": history})

    best = load_checkpoint(out / "best")
    best.model.finalize(train_x)
    save_checkpoint(out / "best", best.model, meta={"config": meta_cfg, "epoch": state["best_epoch"]})
    return TrainResult(out / "best", state["epoch"], state["best_epoch"], state["best_val"], state["stopped"], history)
