import json

import numpy as np
import pytest

from msd.core.rng import Rng
from msd.les import (
    ExplorationError,
    FactorMap,
    _SwapProbe,
    count_overlap,
    importance_prefix,
    predictor_les,
    swap_les,
    swap_score,
)

IDENTITY = {"color": [0], "shape": [1], "start": [2], "motion": [3], "speed": [4]}


@pytest.fixture(scope="module")
def explore_split(shapes_ds):
    return shapes_ds.subset("train")


@pytest.fixture(scope="module")
def predictor_map(analytic, explore_split, shapes_ds):
    x, y = explore_split
    return predictor_les(analytic.latent_vector(x), y, shapes_ds.manifest)


@pytest.fixture(scope="module")
def swap_map(analytic, explore_split, oracle, shapes_ds):
    x, _ = explore_split
    return swap_les(analytic, analytic.codes(x), oracle, shapes_ds.manifest, seed=3)


def test_importance_prefix_reaches_tau():
    imp = np.array([0.2, 0.5, 0.0, 0.3])
    assert importance_prefix(imp, 0.5) == [1]
    assert importance_prefix(imp, 0.8) == [1, 3]
    assert importance_prefix(imp, 0.81) == [0, 1, 3]
    # tau = 1 keeps every dim with nonzero importance and nothing else
    assert importance_prefix(imp, 1.0) == [0, 1, 3]


def test_importance_prefix_ties_prefer_lower_index():
    assert importance_prefix(np.array([0.25, 0.25, 0.25, 0.25]), 0.5) == [0, 1]


def test_predictor_recovers_analytic_channels(predictor_map):
    assert predictor_map.groups == IDENTITY
    assert predictor_map.unlocated == []
    assert predictor_map.overlap == 0
    assert not predictor_map.low_confidence


def test_predictor_tau_one_keeps_all_nonzero_dims(analytic, explore_split, shapes_ds):
    x, y = explore_split
    lat = analytic.latent_vector(x)
    noisy = np.concatenate([lat, Rng(5).normal_array((len(x), 2))], axis=1)
    fmap = predictor_les(noisy, y, shapes_ds.manifest, tau=1.0)
    for name in shapes_ds.manifest.factor_names:
        rel = np.array(fmap.relevance[name])
        assert fmap.groups[name] == [int(d) for d in np.nonzero(rel > 0)[0]]


def test_predictor_flags_pure_noise(explore_split, shapes_ds):
    x, y = explore_split
    noise = Rng(11).normal_array((len(x), 8))
    fmap = predictor_les(noise, y, shapes_ds.manifest)
    assert fmap.low_confidence
    for row in fmap.relevance.values():
        assert max(row) < 2.0 / 8


def test_predictor_disjoint_mode_has_no_overlap(explore_split, shapes_ds):
    x, y = explore_split
    lat = Rng(2).normal_array((len(x), 6)) + y[:, [0, 0, 1, 2, 3, 4]]
    fmap = predictor_les(lat, y, shapes_ds.manifest, disjoint=True)
    assert fmap.overlap == 0
    assert count_overlap(fmap.groups) == 0


def test_predictor_rejects_bad_inputs(explore_split, shapes_ds):
    x, y = explore_split
    lat = np.zeros((len(x), 3))
    with pytest.raises(ExplorationError):
        predictor_les(lat, y, shapes_ds.manifest, tau=0.0)
    y1 = y.copy()
    y1[:, 2] = 0
    with pytest.raises(ExplorationError):
        predictor_les(lat, y1, shapes_ds.manifest)


def test_swap_recovers_analytic_channels(swap_map):
    assert swap_map.groups == IDENTITY
    assert swap_map.unlocated == []
    assert swap_map.details["judge_calls_per_factor"] <= 2000


def test_both_strategies_agree_on_analytic_model(predictor_map, swap_map):
    assert predictor_map.same_groups(swap_map)


def test_relevance_rows_are_stochastic(predictor_map, swap_map):
    for fmap in (predictor_map, swap_map):
        for row in fmap.relevance.values():
            assert np.all(np.array(row) >= 0)
            assert sum(row) == pytest.approx(1.0, abs=1e-12)


def test_swap_is_deterministic(analytic, explore_split, oracle, shapes_ds, swap_map):
    x, _ = explore_split
    again = swap_les(analytic, analytic.codes(x), oracle, shapes_ds.manifest, seed=3)
    assert again.to_json() == swap_map.to_json()


def test_large_penalty_selects_singletons_only(analytic, explore_split, oracle, shapes_ds):
    x, _ = explore_split
    fmap = swap_les(analytic, analytic.codes(x), oracle, shapes_ds.manifest, lam=50.0, n_pairs=20, seed=1)
    assert all(len(g) <= 1 for g in fmap.groups.values())


def test_empty_swap_changes_nothing(analytic, explore_split, oracle):
    x, _ = explore_split
    codes = analytic.codes(x[:20])
    pairs = np.stack([np.arange(10), np.arange(10, 20)], axis=1)
    probe = _SwapProbe(analytic, codes, oracle, pairs, 5)
    assert np.array_equal(probe.change_rate(()), np.zeros(5))
    assert probe.change_rate((0, 1, 2, 3, 4)).max() > 0


def test_swap_score_arithmetic():
    rate = np.array([0.8, 0.1, 0.3])
    assert swap_score(rate, 0, 1, 0.05) == pytest.approx(0.8 - 0.2)
    assert swap_score(rate, 0, 3, 0.05) == pytest.approx(0.8 - 0.2 - 0.1)


def test_factor_map_json_roundtrip(swap_map):
    text = json.dumps(swap_map.to_json())
    back = FactorMap.from_json(json.loads(text))
    assert back == swap_map
    assert back.union("static") == [0, 1, 2]
    assert back.union("dynamic") == [3, 4]


def test_count_overlap():
    assert count_overlap({"a": [0, 1], "b": [1, 2], "c": [1, 2]}) == 2
    assert count_overlap({"a": [0], "b": [1]}) == 0
