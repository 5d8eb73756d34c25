"""Evaluation pipeline: checkpoint + dataset -> factor map -> metric report."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core.rng import derive_seed
from .datasets.container import Dataset, dump_json, read_container
from .judges.base import Judge, JudgeError
from .judges.oracle import OracleJudge
from .judges.remote import RemoteJudge
from .judges.trained import fit_trained_judge
from .les import FactorMap, predictor_les, swap_les
from .metrics.formulas import MetricError
from .metrics.report import MetricReport
from .metrics.suite import EvalContext, evaluate_once, m_swap, valid_metrics
from .models.checkpoint import load_checkpoint

log = logging.getLogger(__name__)

MAX_JUDGE_FAILURE_RATE = 0.10


class PipelineError(RuntimeError):
    pass


@dataclass
class PipelineSpec:
    dataset: str
    checkpoint: str
    strategy: str = "predictor"
    factor_map: str | None = None
    judge: str = "oracle"
    endpoint: str | None = None
    metrics: list[str] | None = None
    runs: int = 5
    seed: int = 0
    sizes: dict = field(default_factory=dict)
    explore_split: str = "train"
    eval_split: str = "test"

    def __post_init__(self):
        if self.strategy not in ("predictor", "swap"):
            raise ValueError(f"unknown exploration strategy {self.strategy!r}")
        if self.judge not in ("oracle", "trained", "remote"):
            raise ValueError(f"unknown judge kind {self.judge!r}")
        if self.judge == "remote" and not self.endpoint:
            raise ValueError("a remote judge needs an endpoint")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")


def make_judge(kind: str, dataset: Dataset, endpoint: str | None = None, seed: int = 0) -> Judge:
    if kind == "oracle":
        return OracleJudge(dataset.manifest)
    if kind == "trained":
        return fit_trained_judge(dataset, "train")
    if kind == "remote":
        judge = RemoteJudge(endpoint, dataset.manifest, retries=1, invalid_on_error=True)
        if not judge.health():
            raise JudgeError(f"judge at {endpoint} is not healthy")
        return judge
    raise ValueError(f"unknown judge kind {kind!r}")


def explore(model, dataset: Dataset, strategy: str, judge: Judge | None = None, seed: int = 0, split: str = "train", **kw) -> FactorMap:
    x, y = dataset.subset(split)
    if strategy == "predictor":
        return predictor_les(model.latent_vector(x), y, dataset.manifest, **kw)
    if judge is None:
        raise ValueError("swap exploration needs a judge")
    flags = np.asarray(model.code_flags(x), dtype=bool)
    return swap_les(model, model.codes(x[flags]), judge, dataset.manifest, seed=derive_seed(seed, "explore"), **kw)


def _check_judge(judge: Judge) -> None:
    calls = getattr(judge, "calls", 0)
    failures = getattr(judge, "failures", 0)
    if calls and failures / calls > MAX_JUDGE_FAILURE_RATE:
        raise PipelineError(
            f"judge failed on {failures} of {calls} requests ({failures / calls:.1%}); "
            f"limit is {MAX_JUDGE_FAILURE_RATE:.0%}. Check the judge service logs and endpoint."
        )


def evaluate(
    spec: PipelineSpec,
    out_dir=None,
    dataset: Dataset | None = None,
    model=None,
    judge: Judge | None = None,
    fmap: FactorMap | None = None,
) -> MetricReport:
    ds = dataset if dataset is not None else read_container(spec.dataset)
    if model is None:
        model = load_checkpoint(spec.checkpoint).model
    if model.manifest.name != ds.manifest.name or model.frame_shape != tuple(ds.manifest.step_shape):
        raise ValueError(f"checkpoint was trained on {model.manifest.name!r}, not {ds.manifest.name!r}")
    allowed = valid_metrics(ds.manifest.modality)
    metrics = list(spec.metrics) if spec.metrics else list(allowed)
    bad = [m for m in metrics if m not in allowed]
    if bad:
        raise MetricError(f"metrics {bad} are not valid for {ds.manifest.modality} data")
    needs_judge = any(m not in ("DCI-M", "DCI-C", "DCI-E") for m in metrics) or spec.strategy == "swap"
    if judge is None and needs_judge:
        judge = make_judge(spec.judge, ds, spec.endpoint, spec.seed)
    if model.bank is None:
        model.finalize(ds.subset("train")[0])

    if fmap is None and spec.factor_map:
        fmap = FactorMap.from_json(json.loads(Path(spec.factor_map).read_text(encoding="utf-8")))
    if fmap is None:
        fmap = explore(model, ds, spec.strategy, judge, spec.seed, spec.explore_split)
    if judge is not None:
        _check_judge(judge)

    fit_x, fit_y = ds.subset(spec.explore_split)
    x, y = ds.subset(spec.eval_split)
    ctx = EvalContext(model, judge, fmap, ds.manifest, x, y, fit_x=fit_x, fit_y=fit_y)
    runs: dict[str, list[float]] = {}
    for r in range(spec.runs):
        values = evaluate_once(ctx, metrics, derive_seed(spec.seed, f"run/{r}"), spec.sizes)
        if judge is not None:
            _check_judge(judge)
        for k, v in values.items():
            runs.setdefault(k, []).append(float(v))
    extras = {"factor_map": fmap.to_json(), "code_skip_rate": ctx.skip_rate}
    if "M-Swap" in metrics:
        extras["m_swap_matrix"] = m_swap(ctx, spec.sizes.get("trials", 500), derive_seed(derive_seed(spec.seed, "run/0"), "M-Swap")).to_json()
    report = MetricReport(
        model=model.name,
        dataset=ds.manifest.name,
        runs=runs,
        seed=spec.seed,
        skip_rate=ctx.skip_rate,
        warnings=sorted(set(ctx.warnings)),
        extras=extras,
    )
    if out_dir is not None:
        out = Path(out_dir)
        report.write(out)
        (out / "factor_map.json").write_text(dump_json(fmap.to_json()), encoding="utf-8")
    return report
