import json

import numpy as np
import pytest

from msd.datasets import shapes2d, timeseries
from msd.datasets.container import ContainerError, Dataset, read_container, write_container
from msd.datasets.factors import DatasetManifest, FactorSpec, build_state_space
from msd.datasets.generate import enumerate_states, make_dataset
from msd.datasets.split import split_indices


@pytest.fixture(scope="module")
def shapes():
    return make_dataset("shapes2d16", seed=3)


def test_state_space_counts():
    assert len(build_state_space([3, 2, 2])) == 12
    assert len(build_state_space([1])) == 1
    assert len(build_state_space(shapes2d.factor_specs())) == 1296
    with pytest.raises(ValueError):
        build_state_space([])


def test_state_space_is_lexicographic():
    states = build_state_space([2, 3])
    assert states.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]


def test_factor_spec_validation():
    with pytest.raises(ValueError):
        FactorSpec("x", "static", ("a",))
    with pytest.raises(ValueError):
        FactorSpec("x", "sideways", ("a", "b"))
    with pytest.raises(ValueError):
        DatasetManifest("d", [FactorSpec("x", "static", ("a", "b"))] * 2, 1, 2, (1,))


def test_motionless_glyph_frames_identical():
    frames = shapes2d.render([1, 2, 4, 5, 1])
    assert all(np.array_equal(frames[0], f) for f in frames[1:])


def test_render_is_deterministic_and_bounded():
    a = shapes2d.render([3, 0, 7, 4, 0])
    b = shapes2d.render([3, 0, 7, 4, 0])
    assert a.tobytes() == b.tobytes()
    assert a.shape == (8, 3, 16, 16) and a.min() >= 0 and a.max() <= 1


def test_all_sequences_pairwise_distinct(shapes):
    flat = shapes.data.reshape(len(shapes.data), -1)
    assert len(np.unique(flat, axis=0)) == 1296


def test_every_factor_value_covered(shapes):
    for j, f in enumerate(shapes.manifest.factors):
        assert set(np.unique(shapes.labels[:, j])) == set(range(f.cardinality))


def test_timeseries_station_only_difference_is_offset():
    a = timeseries.generate([1, 2, 0, 1, 2], seed=4)
    b = timeseries.generate([1, 2, 3, 1, 2], seed=4)
    diff = (a.astype(np.float64) - b) - (timeseries.station_offsets(0) - timeseries.station_offsets(3))
    assert np.abs(diff).max() <= 1e-5


def test_timeseries_flat_noiseless_is_offsets():
    s = timeseries.generate([0, 0, 2, 1, 0], noise=0.0, amp_override=0.0)
    assert np.allclose(s, timeseries.station_offsets(2)[None, :].astype(np.float32))


def test_timeseries_sine_averages_out():
    cfg = [3, 1, 4, 2, 1]
    s = timeseries.generate(cfg, noise=0.0).astype(np.float64)
    t = np.arange(timeseries.SEQ_LEN)[:, None]
    rest = s - timeseries.station_offsets(4)[None] - timeseries.SLOPES[2] * t / timeseries.SEQ_LEN
    assert np.abs(rest.mean(axis=0)).max() <= 1e-6


def test_split_sizes_and_partition():
    sp = split_indices(1200, (0.7, 0.15, 0.15), seed=9)
    assert [len(sp[k]) for k in ("train", "val", "test")] == [840, 180, 180]
    union = sorted(sp["train"] + sp["val"] + sp["test"])
    assert union == list(range(1200))
    assert sp == split_indices(1200, (0.7, 0.15, 0.15), seed=9)
    assert sp != split_indices(1200, (0.7, 0.15, 0.15), seed=10)


def test_split_rejects_bad_ratios():
    with pytest.raises(ValueError):
        split_indices(10, (0.5, 0.5, 0.1), seed=0)
    with pytest.raises(ValueError):
        split_indices(10, (1.0, 0.0, 0.0), seed=0)


def test_container_roundtrip_bitwise(tmp_path, shapes):
    write_container(shapes, tmp_path / "d")
    back = read_container(tmp_path / "d")
    assert back.data.tobytes() == shapes.data.tobytes()
    assert np.array_equal(back.labels, shapes.labels)
    assert back.manifest.to_json() == shapes.manifest.to_json()


def test_container_detects_flipped_byte(tmp_path, shapes):
    path = write_container(shapes, tmp_path / "d")
    raw = bytearray((path / "data.bin").read_bytes())
    raw[1234] ^= 0x01
    (path / "data.bin").write_bytes(bytes(raw))
    with pytest.raises(ContainerError, match="checksum"):
        read_container(path)


def test_container_detects_truncation(tmp_path, shapes):
    path = write_container(shapes, tmp_path / "d")
    raw = (path / "labels.bin").read_bytes()
    (path / "labels.bin").write_bytes(raw[:-4])
    with pytest.raises(ContainerError, match="truncated"):
        read_container(path)


def test_container_unknown_version(tmp_path, shapes):
    path = write_container(shapes, tmp_path / "d")
    obj = json.loads((path / "manifest.json").read_text())
    obj["version"] = 99
    (path / "manifest.json").write_text(json.dumps(obj))
    with pytest.raises(ValueError, match="version"):
        read_container(path)


def test_factor_count_must_match_label_columns(shapes):
    with pytest.raises(ContainerError):
        Dataset(shapes.manifest, shapes.data, shapes.labels[:, :3])


def test_same_seed_same_bytes(tmp_path):
    a = write_container(make_dataset("ts24", seed=5), tmp_path / "a")
    b = write_container(make_dataset("ts24", seed=5), tmp_path / "b")
    for name in ("manifest.json", "data.bin", "labels.bin"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_ts24_geometry():
    data, states, factors = enumerate_states("ts24", seed=1)
    assert data.shape == (720, 24, 6) and len(factors) == 5
