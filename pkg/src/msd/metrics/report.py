"""Metric reports, per-dataset aggregation and cross-dataset leaderboards."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..datasets.container import dump_json
from .formulas import MetricError, aggregate, standard_error
from .suite import METRICS


@dataclass
class MetricReport:
    model: str
    dataset: str
    runs: dict[str, list[float]]  # metric -> value per evaluation run
    seed: int = 0
    skip_rate: float = 0.0
    warnings: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.runs:
            raise MetricError("report holds no metric values")
        lengths = {len(v) for v in self.runs.values()}
        if len(lengths) != 1 or 0 in lengths:
            raise MetricError("every metric needs the same, non-zero number of runs")
        for name, vals in self.runs.items():
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise MetricError(f"{name} has values outside [0, 1]")

    @property
    def metrics(self) -> list[str]:
        return [m for m in METRICS if m in self.runs] + sorted(m for m in self.runs if m not in METRICS)

    @property
    def n_runs(self) -> int:
        return len(next(iter(self.runs.values())))

    def mean(self, metric: str) -> float:
        return float(np.mean(self.runs[metric]))

    def se(self, metric: str) -> float:
        return standard_error(self.runs[metric])

    @property
    def values(self) -> dict[str, float]:
        return {m: self.mean(m) for m in self.metrics}

    @property
    def score(self) -> float:
        """Dataset-level score: mean of the per-metric means."""
        return aggregate(self.values)

    @property
    def score_se(self) -> float:
        per_run = [aggregate({m: self.runs[m][r] for m in self.metrics}) for r in range(self.n_runs)]
        return standard_error(per_run)

    def to_json(self) -> dict:
        obj = asdict(self)
        obj["summary"] = {
            "values": self.values,
            "se": {m: self.se(m) for m in self.metrics},
            "score": self.score,
            "score_se": self.score_se,
        }
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "MetricReport":
        fields = {k: obj[k] for k in ("model", "dataset", "runs", "seed", "skip_rate", "warnings", "extras") if k in obj}
        return cls(**fields)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "dataset", "metric", "mean", "se", *[f"run{r}" for r in range(self.n_runs)]])
        for m in self.metrics:
            w.writerow([self.model, self.dataset, m, _num(self.mean(m)), _num(self.se(m)), *[_num(v) for v in self.runs[m]]])
        w.writerow([self.model, self.dataset, "S", _num(self.score), _num(self.score_se)])
        return buf.getvalue()

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"json": out / "report.json", "csv": out / "report.csv"}
        paths["json"].write_text(dump_json(self.to_json()), encoding="utf-8")
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        return paths


def _num(v: float) -> str:
    return f"{v:.10g}"


def read_report(path) -> MetricReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return MetricReport.from_json(json.loads(path.read_text(encoding="utf-8")))


def check_unique(reports: list[MetricReport]) -> None:
    seen = set()
    for r in reports:
        key = (r.model, r.dataset)
        if key in seen:
            raise MetricError(f"duplicate report for model {r.model!r} on dataset {r.dataset!r}")
        seen.add(key)


def summary_table(reports: list[MetricReport]) -> dict[str, dict[str, tuple[float, float]]]:
    """dataset -> model -> (score, standard error)."""
    check_unique(reports)
    table: dict[str, dict[str, tuple[float, float]]] = {}
    for r in reports:
        table.setdefault(r.dataset, {})[r.model] = (r.score, r.score_se)
    return table


def leaderboard(reports: list[MetricReport]) -> dict[str, list[tuple[str, float, float]]]:
    """metric -> models ranked by their mean over the datasets where the metric is valid.

    Each entry is (model, mean, sample standard deviation across datasets).
    """
    check_unique(reports)
    per: dict[str, dict[str, list[float]]] = {}
    for r in reports:
        for m, v in r.values.items():
            per.setdefault(m, {}).setdefault(r.model, []).append(v)
    board = {}
    for metric in [m for m in METRICS if m in per] + sorted(m for m in per if m not in METRICS):
        rows = []
        for model, vals in per[metric].items():
            vals = np.asarray(vals)
            sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            rows.append((model, float(vals.mean()), sd))
        board[metric] = sorted(rows, key=lambda t: (-t[1], t[0]))
    return board


def _models_in_order(reports) -> list[str]:
    seen = []
    for r in reports:
        if r.model not in seen:
            seen.append(r.model)
    return seen


def markdown_summary(reports: list[MetricReport]) -> str:
    table = summary_table(reports)
    models = _models_in_order(reports)
    lines = ["| Dataset | " + " | ".join(models) + " |", "|---" * (len(models) + 1) + "|"]
    for ds, row in table.items():
        cells = [f"{row[m][0]:.2f} ± {row[m][1]:.0e}" if m in row else "-" for m in models]
        lines.append(f"| {ds} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def markdown_leaderboard(reports: list[MetricReport]) -> str:
    board = leaderboard(reports)
    metrics = list(board)
    depth = max(len(v) for v in board.values())
    lines = ["| # | " + " | ".join(metrics) + " |", "|---" * (len(metrics) + 1) + "|"]
    for rank in range(depth):
        cells = []
        for m in metrics:
            if rank < len(board[m]):
                name, mean, sd = board[m][rank]
                cells.append(f"{name} ({mean:.2f} ± {sd:.2f})")
            else:
                cells.append("-")
        lines.append(f"| {rank + 1} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_leaderboard(reports: list[MetricReport], out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summary_table(reports)
    board = leaderboard(reports)
    paths = {
        "summary_json": out / "summary.json",
        "leaderboard_json": out / "leaderboard.json",
        "summary_csv": out / "summary.csv",
        "markdown": out / "leaderboard.md",
    }
    paths["summary_json"].write_text(dump_json({d: {m: list(v) for m, v in row.items()} for d, row in summary.items()}), encoding="utf-8")
    paths["leaderboard_json"].write_text(dump_json({k: [list(t) for t in v] for k, v in board.items()}), encoding="utf-8")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "model", "score", "se"])
    for d, row in summary.items():
        for m, (s, se) in row.items():
            w.writerow([d, m, _num(s), _num(se)])
    paths["summary_csv"].write_text(buf.getvalue(), encoding="utf-8")
    paths["markdown"].write_text(markdown_summary(reports) + "\n" + markdown_leaderboard(reports), encoding="utf-8")
    return paths
