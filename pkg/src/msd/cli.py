"""Command-line entry point: ``msd gen | train | explore | serve-judge | eval | report``.

Heavy imports happen inside the handlers so ``--threads`` can set the BLAS
thread environment before numpy loads.

Exit codes: 0 success, 1 bad input or a failed external dependency,
2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "VECLIB_MAXIMUM_THREADS", "NUMEXPR_NUM_THREADS")

log = logging.getLogger("msd")


class UsageError(ValueError):
    pass


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _csv_names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _out(args, required: bool = True) -> Path | None:
    out = args.out or args.global_out
    if out is None and required:
        raise UsageError("an output location is required (--out)")
    return Path(out) if out is not None else None


def _seed(args, default: int = 0) -> int:
    if getattr(args, "sub_seed", None) is not None:
        return args.sub_seed
    return args.seed if args.seed is not None else default


# ----------------------------------------------------------------------
# handlers


def cmd_gen(args) -> int:
    from .datasets.container import write_container
    from .datasets.generate import make_dataset

    ds = make_dataset(args.dataset, seed=_seed(args), ratios=args.ratios, noise=args.noise)
    path = write_container(ds, _out(args))
    print(f"wrote {ds.manifest.name} ({len(ds.data)} sequences) to {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    from dataclasses import replace

    from .training.config import parse_config
    from .training.trainer import train

    cfg = parse_config(args.config)
    if args.seed is not None or args.sub_seed is not None:
        cfg = replace(cfg, seed=_seed(args))
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)
    result = train(cfg, _out(args), resume=not args.fresh)
    print(
        f"trained {cfg.model}: {result.epochs_run} epochs, best val {result.best_val:.6g} "
        f"at epoch {result.best_epoch}{' (early stop)' if result.stopped_early else ''}; best checkpoint {result.best}"
    )
    return EXIT_OK


def _load(args):
    from .datasets.container import read_container
    from .models.checkpoint import load_checkpoint
    from .models.registry import build_model

    ds = read_container(args.dataset)
    if args.checkpoint == "analytic":
        model = build_model("analytic", ds.manifest)
    else:
        model = load_checkpoint(args.checkpoint).model
    return ds, model


def cmd_explore(args) -> int:
    from .datasets.container import dump_json
    from .pipeline import explore, make_judge

    ds, model = _load(args)
    if model.bank is None:
        model.finalize(ds.subset("train")[0])
    judge = make_judge(args.judge, ds, args.endpoint) if args.strategy == "swap" else None
    kw = {"tau": args.tau} if args.strategy == "predictor" else {"lam": args.lam}
    fmap = explore(model, ds, args.strategy, judge, seed=_seed(args), split=args.split, **kw)
    out = _out(args)
    if out.suffix != ".json":
        out = out / "factor_map.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_json(fmap.to_json()), encoding="utf-8")
    print(f"factor map ({fmap.strategy}): {fmap.groups}" + ("  [low confidence]" if fmap.low_confidence else ""))
    return EXIT_OK


def cmd_serve_judge(args) -> int:
    from .datasets.container import read_container
    from .judges.remote import JudgeServer
    from .pipeline import make_judge

    ds = read_container(args.dataset)
    judge = make_judge(args.kind, ds)
    server = JudgeServer(judge, host=args.host, port=args.port, max_concurrent=args.max_concurrent)
    print(f"serving {args.kind} judge for {ds.manifest.name} at {server.endpoint}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def cmd_eval(args) -> int:
    from .pipeline import PipelineSpec, evaluate

    sizes = {k: v for k, v in (("trials", args.trials), ("pairs", args.pairs), ("consistency", args.consistency)) if v is not None}
    spec = PipelineSpec(
        dataset=args.dataset,
        checkpoint=args.checkpoint,
        strategy=args.strategy,
        factor_map=args.factor_map,
        judge=args.judge,
        endpoint=args.endpoint,
        metrics=args.metrics,
        runs=args.runs,
        seed=_seed(args),
        sizes=sizes,
    )
    ds, model = _load(args)
    report = evaluate(spec, _out(args), dataset=ds, model=model)
    for m, v in report.values.items():
        print(f"{m:10s} {v:.4f} ± {report.se(m):.1e}")
    print(f"{'S':10s} {report.score:.4f} ± {report.score_se:.1e}")
    for w in report.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .metrics.report import markdown_leaderboard, markdown_summary, read_report, write_leaderboard

    reports = [read_report(p) for p in args.reports]
    out = _out(args, required=False)
    if out is not None:
        write_leaderboard(reports, out)
    print(markdown_summary(reports))
    print(markdown_leaderboard(reports), end="")
    return EXIT_OK


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msd", description="Multi-factor sequential disentanglement toolkit.")
    p.add_argument("--seed", type=int, default=None, help="root seed for every stage (default 0)")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread count")
    p.add_argument("--out", dest="global_out", default=None, help="output location when a subcommand gives none")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", dest="sub_seed", type=int, default=None, help="overrides the global --seed")
        sp.set_defaults(handler=handler)
        return sp

    g = add("gen", cmd_gen, "generate a dataset container")
    g.add_argument("--dataset", required=True, choices=["shapes2d16", "ts24"])
    g.add_argument("--ratios", type=_csv_floats, default=[0.7, 0.15, 0.15])
    g.add_argument("--noise", type=float, default=0.05)

    t = add("train", cmd_train, "train a model from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--epochs", type=int, default=None, help="override the config's epoch count")
    t.add_argument("--fresh", action="store_true", help="ignore an existing run in the output directory")

    e = add("explore", cmd_explore, "map latent channels to factors")
    e.add_argument("--checkpoint", required=True, help="checkpoint directory, or 'analytic'")
    e.add_argument("--dataset", required=True)
    e.add_argument("--strategy", choices=["predictor", "swap"], default="predictor")
    e.add_argument("--judge", choices=["oracle", "trained", "remote"], default="oracle")
    e.add_argument("--endpoint", default=None)
    e.add_argument("--split", default="train")
    e.add_argument("--tau", type=float, default=0.9)
    e.add_argument("--lam", type=float, default=0.05)

    s = add("serve-judge", cmd_serve_judge, "serve a judge over HTTP")
    s.add_argument("--dataset", required=True)
    s.add_argument("--kind", choices=["oracle", "trained"], default="oracle")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8765)
    s.add_argument("--max-concurrent", type=int, default=8)

    v = add("eval", cmd_eval, "explore and score a checkpoint")
    v.add_argument("--checkpoint", required=True, help="checkpoint directory, or 'analytic'")
    v.add_argument("--dataset", required=True)
    v.add_argument("--strategy", choices=["predictor", "swap"], default="predictor")
    v.add_argument("--factor-map", default=None, help="reuse a saved factor map instead of exploring")
    v.add_argument("--judge", choices=["oracle", "trained", "remote"], default="oracle")
    v.add_argument("--endpoint", default=None)
    v.add_argument("--metrics", type=_csv_names, default=None)
    v.add_argument("--runs", type=int, default=5)
    v.add_argument("--trials", type=int, default=None)
    v.add_argument("--pairs", type=int, default=None)
    v.add_argument("--consistency", type=int, default=None)

    r = add("report", cmd_report, "merge reports into summary and leaderboard tables")
    r.add_argument("reports", nargs="+", help="report.json files or directories holding one")
    return p


def _user_errors() -> tuple[type[BaseException], ...]:
    from .datasets.container import ContainerError
    from .judges.base import JudgeError
    from .pipeline import PipelineError
    from .training.trainer import TrainingError

    return (UsageError, ValueError, KeyError, FileNotFoundError, ContainerError, JudgeError, PipelineError, TrainingError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be at least 1")
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        if isinstance(exc, _user_errors()):
            print(f"msd {args.command}: error: {exc}", file=sys.stderr)
            return EXIT_USER
        log.exception("internal error")
        print(f"msd {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
