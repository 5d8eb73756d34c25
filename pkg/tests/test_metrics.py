import json
from pathlib import Path

import numpy as np
import pytest

import bruteforce as bf
from msd.core.rng import Rng, derive_seed
from msd.les import FactorMap
from msd.metrics.formulas import (
    MetricError,
    aggregate,
    c_sample,
    c_swap_score,
    dci_from_relevance,
    gc_sample,
    noise_floor,
    standard_error,
    summarize_matrix,
)
from msd.metrics.report import MetricReport, check_unique, leaderboard, read_report, summary_table, write_leaderboard
from msd.metrics.suite import (
    METRICS,
    EvalContext,
    c_swap,
    dci,
    m_gsample,
    m_swap,
    sample_consistency,
    two_gsample,
    two_swap,
    valid_metrics,
)

FIXTURE = Path(__file__).parent / "data" / "published_results.json"
IDENTITY = {"color": [0], "shape": [1], "start": [2], "motion": [3], "speed": [4]}


def _identity_map(manifest) -> FactorMap:
    return FactorMap(
        factors=manifest.factor_names,
        kinds=[f.kind for f in manifest.factors],
        latent_dim=5,
        groups=dict(IDENTITY),
        relevance={n: np.eye(5)[i].tolist() for i, n in enumerate(manifest.factor_names)},
        strategy="predictor",
    )


@pytest.fixture(scope="module")
def ctx(analytic, oracle, shapes_ds):
    x, y = shapes_ds.subset("test")
    fx, fy = shapes_ds.subset("train")
    return EvalContext(analytic, oracle, _identity_map(shapes_ds.manifest), shapes_ds.manifest, x, y, fit_x=fx, fit_y=fy)


# noise floors -----------------------------------------------------------------


def test_noise_floor_examples():
    assert noise_floor(4) == 0.25
    assert noise_floor(2) == 0.5
    assert noise_floor(2, np.array([0, 0, 0, 1]), empirical=True) == 0.75
    with pytest.raises(MetricError):
        noise_floor(1)


# consistency scores ----------------------------------------------------------------


def test_consistency_examples():
    a, b = 0, 1
    assert c_sample([a, a, a, a]) == 1.0
    assert c_sample([a, a, b, b]) == pytest.approx(2 / 3)
    assert c_sample([a, b, a, b]) == 0.0
    assert gc_sample([a, a, a]) == 1.0
    assert gc_sample([a, a, b, a]) == 0.75
    assert gc_sample([a, b]) == 0.5
    assert c_swap_score([2, 2, 2], 2) == 1.0
    assert c_swap_score([1, 2, 2, 0], 2) == 0.5
    with pytest.raises(MetricError):
        c_sample([a])


def test_consistency_rows_match_per_sequence_calls():
    rows = np.array([[0, 0, 1, 1], [2, 1, 2, 2], [0, 1, 0, 1]])
    assert np.allclose(c_sample(rows), [c_sample(r) for r in rows])
    assert np.allclose(gc_sample(rows), [gc_sample(r) for r in rows])
    donors = np.array([1, 2, 0])
    assert np.allclose(c_swap_score(rows, donors), [c_swap_score(r, d) for r, d in zip(rows, donors)])


def test_consistency_bruteforce_parity():
    for classes, seq in bf.label_sequences(4, 3):
        arr = np.array(seq)
        if len(seq) >= 2:
            assert c_sample(arr) == pytest.approx(bf.c_sample(seq), abs=1e-15)
        assert gc_sample(arr) == pytest.approx(bf.gc_sample(seq), abs=1e-15)
        for donor in range(classes):
            assert c_swap_score(arr, donor) == pytest.approx(bf.c_swap(seq, donor), abs=1e-15)


# matrix summary -------------------------------------------------------------------


def test_summary_examples():
    assert summarize_matrix([[1.0, 0.25], [0.25, 1.0]], [0.25, 0.25]) == pytest.approx(1.0)
    assert summarize_matrix([[0.5, 1.0], [1.0, 0.5]], [0.5, 0.5]) == pytest.approx(0.25)
    assert summarize_matrix([[0.7]], [0.5]) == pytest.approx(0.7)
    with pytest.raises(MetricError):
        summarize_matrix([[1.0, 0.0], [0.0, 1.0]], [1.0, 0.5])


def test_summary_refined_is_geometric_mean():
    A, floors = [[1.0, 0.5], [0.5, 0.8]], [0.25, 0.25]
    indep = 1 - (0.25 / 0.75)
    assert summarize_matrix(A, floors, refined=True) == pytest.approx(np.sqrt(0.9 * indep))


def test_summary_bruteforce_parity():
    for A, floors in bf.accuracy_matrices():
        assert summarize_matrix(A, floors) == pytest.approx(bf.summary(A, floors), abs=1e-12)
        assert summarize_matrix(A, floors, refined=True) == pytest.approx(bf.summary(A, floors, refined=True), abs=1e-12)


# DCI --------------------------------------------------------------------------------


def test_dci_examples():
    M, C, E, degenerate = dci_from_relevance(np.eye(3), [1.0, 1.0, 1.0])
    assert (M, C, E, degenerate) == (pytest.approx(1.0), pytest.approx(1.0), 1.0, False)
    M, C, _, _ = dci_from_relevance(np.full((3, 3), 0.4), [0.5])
    assert M == pytest.approx(0.0, abs=1e-12) and C == pytest.approx(0.0, abs=1e-12)
    M, C, _, _ = dci_from_relevance([[0.9, 0.1], [0.1, 0.9]], [1.0])
    assert M == pytest.approx(0.531, abs=5e-4) and C == pytest.approx(0.531, abs=5e-4)


def test_dci_degenerate_and_permutation_invariance():
    assert dci_from_relevance(np.zeros((2, 2)), [0.3]) == (0.0, 0.0, 0.3, True)
    Q = np.array([[0.8, 0.1, 0.0], [0.2, 0.5, 0.3], [0.0, 0.0, 0.9]])
    base = dci_from_relevance(Q, [1.0])
    perm = [2, 0, 1]
    assert dci_from_relevance(Q[perm], [1.0])[:2] == pytest.approx(base[:2])
    assert dci_from_relevance(Q[:, perm], [1.0])[:2] == pytest.approx(base[:2])


class _PermutedCodes:
    """Wraps a model and reorders its code channels."""

    def __init__(self, model, perm):
        self.model, self.perm = model, np.asarray(perm)
        self.inv = np.argsort(self.perm)
        self.manifest = model.manifest

    def codes(self, x):
        return self.model.codes(x)[..., self.perm]

    def code_flags(self, x):
        return self.model.code_flags(x)

    def latent_vector(self, x):
        return self.model.latent_vector(x)[:, self.perm]

    def decode_codes(self, c):
        return self.model.decode_codes(np.asarray(c)[..., self.inv])


def test_dci_analytic_and_channel_permutation(ctx, analytic, oracle, shapes_ds):
    r = dci(ctx)
    assert (r.modularity, r.compactness, r.explicitness) == (pytest.approx(1.0), pytest.approx(1.0), pytest.approx(1.0))
    perm = [3, 0, 4, 1, 2]
    wrapped = _PermutedCodes(analytic, perm)
    fmap = _identity_map(shapes_ds.manifest)
    fmap.groups = {f: [perm.index(d[0])] for f, d in IDENTITY.items()}
    pctx = EvalContext(wrapped, oracle, fmap, shapes_ds.manifest, ctx.x, ctx.y, fit_x=ctx.fit_x, fit_y=ctx.fit_y)
    p = dci(pctx)
    assert p.modularity == pytest.approx(r.modularity)
    assert p.compactness == pytest.approx(r.compactness)
    assert np.allclose(p.relevance, r.relevance)


# intervention metrics on the ground-truth model --------------------------------------


def test_m_swap_analytic_oracle(ctx):
    mat = m_swap(ctx, trials=500, seed=4)
    A, se = mat.A, np.sqrt(ctx.floors * (1 - ctx.floors) / 500)
    assert np.allclose(np.diag(A), 1.0)
    off = ~np.eye(len(A), dtype=bool)
    dev = np.abs(A - ctx.floors[None, :])
    assert np.all(dev[off] <= (3 * np.broadcast_to(se, A.shape))[off] + 1e-12)
    assert mat.summary() >= 0.98


def test_m_gsample_analytic_oracle(ctx):
    mat = m_gsample(ctx, trials=500, seed=4)
    A, se = mat.A, np.sqrt(ctx.floors * (1 - ctx.floors) / 500)
    assert np.allclose(np.diag(A), 1.0)
    off = ~np.eye(len(A), dtype=bool)
    assert np.all(np.abs(A - ctx.floors[None, :])[off] <= (3 * np.broadcast_to(se, A.shape))[off] + 1e-12)


class _ConstantDecoder:
    """Ignores its codes and always renders one fixed sequence."""

    def __init__(self, model, frame):
        self.model, self.frame = model, frame
        self.manifest = model.manifest

    def codes(self, x):
        return self.model.codes(x)

    def code_flags(self, x):
        return self.model.code_flags(x)

    def sample_latent(self, S, n, seed):
        return self.model.sample_latent(S, n, seed)

    def decode_codes(self, c):
        return np.repeat(self.frame[None], len(c), axis=0)


def test_constant_decoder_columns_equal_label_match_rate(ctx, analytic, oracle, shapes_ds):
    const = ctx.x[0]
    label = oracle.judge_all(const[None])[0]
    model = _ConstantDecoder(analytic, const)
    cctx = EvalContext(model, oracle, ctx.fmap, shapes_ds.manifest, ctx.x, ctx.y)
    trials, seed = 200, 9
    mat = m_swap(cctx, trials, seed)
    for i in range(5):
        src, _ = cctx.draw_pairs(Rng(derive_seed(seed, f"m-swap/{i}")), trials)
        assert np.allclose(mat.A[i], (ctx.y[src] == label[None, :]).mean(axis=0))
    gen = m_gsample(cctx, trials, seed)
    for i in range(5):
        src = cctx.draw(Rng(derive_seed(seed, f"m-gsample/{i}")), trials)
        assert np.allclose(gen.A[i], (ctx.y[src] == label[None, :]).mean(axis=0))


def test_single_factor_matrix_is_preservation(ctx):
    mat = m_swap(ctx, trials=50, seed=1)
    sub = summarize_matrix(mat.A[:1, :1], mat.floors[:1])
    assert sub == mat.A[0, 0]


class _FirstLabelJudge:
    def judge_all(self, x):
        return np.zeros((len(x), 5), dtype=np.int64)


def test_two_swap_with_first_label_judge(ctx, analytic, shapes_ds):
    jctx = EvalContext(analytic, _FirstLabelJudge(), ctx.fmap, shapes_ds.manifest, ctx.x, ctx.y)
    seed = 5
    score = two_swap(jctx, 300, seed)
    a, b = jctx.draw_pairs(Rng(derive_seed(seed, "2-swap")), 300)
    static = np.array([f.kind == "static" for f in shapes_ds.manifest.factors])
    truth_a = np.where(static, ctx.y[a], ctx.y[b])
    truth_b = np.where(static, ctx.y[b], ctx.y[a])
    expected = 0.5 * ((truth_a == 0).mean() + (truth_b == 0).mean())
    assert score == pytest.approx(expected)


def test_two_group_metrics_on_analytic(ctx):
    assert two_swap(ctx, 256, 1) == 1.0
    assert two_gsample(ctx, 256, 1) == 1.0
    assert two_gsample(ctx, 256, 1) == two_gsample(ctx, 256, 1)


def test_two_swap_identical_pair_is_perfect(ctx, analytic, oracle, shapes_ds):
    x = np.repeat(ctx.x[:1], 2, axis=0)
    y = np.repeat(ctx.y[:1], 2, axis=0)
    one = EvalContext(analytic, oracle, ctx.fmap, shapes_ds.manifest, x, y)
    assert two_swap(one, 20, 0) == 1.0


def test_consistency_metrics_on_analytic(ctx):
    assert all(v == 1.0 for v in c_swap(ctx, 64, 2).values())
    _, generated = m_gsample(ctx, trials=40, seed=2, keep_outputs=True)
    assert sample_consistency(ctx, generated) == (1.0, 1.0)


def test_empty_group_kind_is_an_error(ctx, analytic, oracle, shapes_ds):
    fmap = _identity_map(shapes_ds.manifest)
    fmap.groups["motion"], fmap.groups["speed"] = [], []
    bad = EvalContext(analytic, oracle, fmap, shapes_ds.manifest, ctx.x, ctx.y)
    with pytest.raises(MetricError):
        two_swap(bad, 10, 0)


def test_valid_metrics_by_modality():
    assert valid_metrics("video") == METRICS
    assert valid_metrics("timeseries") == ("DCI-M", "DCI-C", "DCI-E")


# aggregation and reports ---------------------------------------------------------------


def test_aggregate_examples():
    row = [0.94, 0.97, 0.94, 0.96, 0.89, 0.95, 0.98, 0.95, 0.96, 0.97]
    assert aggregate(dict(zip(METRICS, row))) == pytest.approx(0.951)
    assert aggregate({"DCI-M": 0.4}) == 0.4
    with pytest.raises(MetricError):
        aggregate({})
    assert standard_error([1.0, 1.0, 1.0]) == 0.0
    assert standard_error([0.5]) == 0.0


def _report(model, dataset, values, runs=1):
    return MetricReport(model, dataset, {m: [v] * runs for m, v in values.items()})


def test_report_score_and_roundtrip(tmp_path):
    rep = MetricReport("ae", "shapes", {"DCI-M": [0.2, 0.4], "DCI-C": [0.6, 0.6]})
    assert rep.score == pytest.approx(0.45)
    assert rep.score_se == pytest.approx(standard_error([0.4, 0.5]))
    rep.write(tmp_path)
    back = read_report(tmp_path)
    assert back.runs == rep.runs and back.score == rep.score
    assert (tmp_path / "report.csv").read_text().splitlines()[0].startswith("model,dataset,metric,mean,se")


def test_report_validation():
    with pytest.raises(MetricError):
        MetricReport("ae", "d", {"DCI-M": [1.2]})
    with pytest.raises(MetricError):
        MetricReport("ae", "d", {"DCI-M": [0.2], "DCI-C": [0.1, 0.3]})


def test_duplicate_reports_rejected():
    a = _report("ae", "d", {"DCI-M": 0.3})
    with pytest.raises(MetricError):
        check_unique([a, _report("ae", "d", {"DCI-M": 0.4})])


def test_leaderboard_single_dataset_passthrough():
    reps = [_report("ae", "d", {"DCI-M": 0.3, "DCI-C": 0.5}), _report("skd", "d", {"DCI-M": 0.6, "DCI-C": 0.1})]
    board = leaderboard(reps)
    assert board["DCI-M"] == [("skd", 0.6, 0.0), ("ae", 0.3, 0.0)]
    assert summary_table(reps)["d"]["ae"] == (pytest.approx(0.4), 0.0)


def test_published_fixture_reaggregates(tmp_path):
    pub = json.loads(FIXTURE.read_text())
    reports = []
    for ds, per in pub["per_metric"].items():
        for k, model in enumerate(pub["models"]):
            reports.append(_report(model, ds, {m: vals[k] for m, vals in per.items()}))
    table = summary_table(reports)
    for ds, cells in pub["summary"].items():
        for k, model in enumerate(pub["models"]):
            assert table[ds][model][0] == pytest.approx(cells[k], abs=0.01)
    paths = write_leaderboard(reports, tmp_path)
    assert "| Sprites |" in paths["markdown"].read_text()
