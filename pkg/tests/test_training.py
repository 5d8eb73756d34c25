import json

import numpy as np
import pytest

from msd.datasets.container import Dataset
from msd.models.checkpoint import load_checkpoint
from msd.models.registry import build_model
from msd.training.config import ConfigError, config_from_dict, parse_config, parse_config_text
from msd.training.trainer import TrainingError, batch_rng, epoch_order, train

TINY = {"latent_dim": 4, "hidden_dims": [16]}


def _cfg(**kw):
    base = {"model": "ae", "dataset": "unused", "epochs": 2, "batch_size": 64, "seed": 1, "hyper": TINY}
    base.update(kw)
    return config_from_dict(base)


# config -------------------------------------------------------------------


def test_minimal_config_gets_defaults():
    cfg = parse_config_text('{"model": "skd", "dataset": "d"}')
    assert cfg.epochs == 20 and cfg.batch_size == 32 and cfg.patience == 10
    assert cfg.min_delta == 1e-5 and cfg.optimizer.lr == 1e-3
    assert cfg.hyper["k_dim"] == 16 and cfg.hyper["static_size"] == 4


def test_config_range_error_on_dynamic_thresh():
    with pytest.raises(ConfigError, match="dynamic_thresh"):
        parse_config_text('{"model": "skd", "dataset": "d", "hyper": {"dynamic_thresh": 1.5}}')


def test_config_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text('{"model": "ae", "dataset": "d", "epochs": 1, "epochs": 2}')
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text('{"model": "ae", "dataset": "d", "hyper": {"latent_dim": 2, "latent_dim": 3}}')


@pytest.mark.parametrize(
    "text",
    [
        '{"model": "ae", "dataset": "d", "epoch": 3}',
        '{"model": "ae", "dataset": "d", "epochs": "3"}',
        '{"model": "ae", "dataset": "d", "epochs": -1}',
        '{"model": "ae", "dataset": "d", "optimizer": {"lr": 0}}',
        '{"model": "ae", "dataset": "d", "optimizer": {"momentum": 0.9}}',
        '{"model": "ae", "dataset": "d", "hyper": {"beta": 2}}',
        '{"model": "nope", "dataset": "d"}',
        '{"dataset": "d"}',
        '[1, 2]',
        '{"model": "ae",',
    ],
)
def test_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_config_file_resolves_relative_dataset(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"model": "ae", "dataset": "data/x"}))
    cfg = parse_config(tmp_path / "c.json")
    assert cfg.dataset == str((tmp_path / "data" / "x").resolve())
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.json")


# training loop ---------------------------------------------------------------


def test_zero_epochs_checkpoint_is_initialization(shapes_ds, tmp_path):
    res = train(_cfg(epochs=0), tmp_path, dataset=shapes_ds)
    init = build_model("ae", shapes_ds.manifest, _cfg().hyper, seed=1)
    ck = load_checkpoint(res.best)
    for p, q in zip(init.parameters(), ck.model.parameters()):
        assert np.array_equal(p.data, q.data)
    assert res.epochs_run == 0


def test_same_seed_gives_identical_checkpoints(shapes_ds, tmp_path):
    a = train(_cfg(), tmp_path / "a", dataset=shapes_ds)
    b = train(_cfg(), tmp_path / "b", dataset=shapes_ds)
    for f in ("params.bin", "manifest.json"):
        assert (a.best / f).read_bytes() == (b.best / f).read_bytes()
    assert (tmp_path / "a" / "train_log.tsv").read_bytes() == (tmp_path / "b" / "train_log.tsv").read_bytes()


def test_resume_matches_uninterrupted_run(shapes_ds, tmp_path):
    straight = train(_cfg(epochs=3), tmp_path / "s", dataset=shapes_ds)
    train(_cfg(epochs=1), tmp_path / "r", dataset=shapes_ds)
    resumed = train(_cfg(epochs=3), tmp_path / "r", dataset=shapes_ds)
    assert resumed.epochs_run == 3
    for d in ("best", "last"):
        assert (tmp_path / "s" / d / "params.bin").read_bytes() == (tmp_path / "r" / d / "params.bin").read_bytes()
    assert (tmp_path / "s" / "train_log.tsv").read_text() == (tmp_path / "r" / "train_log.tsv").read_text()
    assert straight.history == resumed.history


def test_resume_rejects_changed_config(shapes_ds, tmp_path):
    train(_cfg(epochs=1), tmp_path, dataset=shapes_ds)
    with pytest.raises(TrainingError):
        train(_cfg(epochs=2, seed=9), tmp_path, dataset=shapes_ds)


def test_log_is_tab_separated_with_header(shapes_ds, tmp_path):
    train(_cfg(), tmp_path, dataset=shapes_ds)
    lines = (tmp_path / "train_log.tsv").read_text().splitlines()
    header = lines[0].split("\t")
    assert header[:3] == ["epoch", "train_loss", "val_loss"] and "val_recon" in header
    assert len(lines) == 3 and all(len(line.split("\t")) == len(header) for line in lines)


def test_logged_loss_matches_recomputation_on_same_order(shapes_ds, tmp_path):
    # with a vanishing step size the parameters stay at their initial values
    cfg = _cfg(model="vae", epochs=1, optimizer={"lr": 1e-30})
    res = train(cfg, tmp_path, dataset=shapes_ds)
    model = build_model("vae", shapes_ds.manifest, cfg.hyper, seed=cfg.seed)
    train_x, _ = shapes_ds.subset("train")
    order = epoch_order(cfg.seed, 1, len(train_x))
    total = 0.0
    for b, s in enumerate(range(0, len(train_x), cfg.batch_size)):
        xb = train_x[order[s : s + cfg.batch_size]]
        total += model.loss_terms(xb, batch_rng(cfg.seed, 1, b))[0].item() * len(xb)
    assert abs(res.history[0]["train_loss"] - total / len(train_x)) <= 1e-6


def test_early_stopping_with_patience(shapes_ds, tmp_path):
    cfg = _cfg(epochs=10, patience=2, optimizer={"lr": 1e-30})
    res = train(cfg, tmp_path, dataset=shapes_ds)
    assert res.stopped_early and res.epochs_run == 3 and res.best_epoch == 1


def test_nan_input_aborts_with_diagnostic(shapes_ds, tmp_path):
    data = shapes_ds.data.copy()
    data[shapes_ds.split("train")[5], 0, 0, 0, 0] = np.inf
    bad = Dataset(shapes_ds.manifest, data, shapes_ds.labels)
    with pytest.raises(TrainingError, match="epoch 1"):
        train(_cfg(epochs=1), tmp_path, dataset=bad)


def test_analytic_model_is_not_trainable(shapes_ds, tmp_path):
    with pytest.raises(TrainingError):
        train(config_from_dict({"model": "analytic", "dataset": "d"}), tmp_path, dataset=shapes_ds)


@pytest.mark.slow
def test_ae_validation_mse_halves_within_twenty_epochs(shapes_ds, tmp_path):
    cfg = config_from_dict(
        {"model": "ae", "dataset": "d", "epochs": 20, "batch_size": 32, "seed": 0, "hyper": {"latent_dim": 8, "hidden_dims": [128]}}
    )
    res = train(cfg, tmp_path, dataset=shapes_ds)
    first, last = res.history[0]["val_recon"], res.history[-1]["val_recon"]
    assert len(res.history) == 20
    assert last < 0.5 * first
