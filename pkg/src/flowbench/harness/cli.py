"""Command-line interface.

Subcommands mirror the pipeline stages: ``gen-target``, ``null``, ``train``,
``evaluate``, ``report``, and ``grid`` (the full sweep). Every stochastic
step takes an explicit 64-bit seed. Exit code is 0 only if no stage errored.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import __version__
from ..flows import (ARCHITECTURES, Hyperparams, TrainConfig, build_flow,
                     load_model, save_model, train)
from ..metrics import METRIC_TAGS
from ..rng import child_seed
from ..targets import CMoGSpec, make_cmog, sample_cmog
from .evaluate import evaluate_model
from .nulls import NullDistribution, build_nulls
from .report import (results_rows, write_corner_data, write_results_table,
                     write_summary, write_timings_table)
from .runner import RunConfig, run, table1_grid
from .select import GridPointResult, ReplicaResult, select_best


def _parse_hidden(text: str) -> list[int]:
    return [int(w) for w in text.split(",") if w]


def cmd_gen_target(args) -> int:
    spec = make_cmog(args.dim, args.components, args.seed)
    spec.save(args.out)
    print(f"wrote target spec (D={args.dim}, n={args.components}) to {args.out}")
    return 0


def cmd_null(args) -> int:
    spec = CMoGSpec.load(args.spec)
    tags = METRIC_TAGS if args.metric == "all" else (args.metric,)
    nulls = build_nulls(spec, args.size, args.n_pseudo, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for tag in tags:
        path = out / f"{tag}.json"
        nulls[tag].save(path)
        print(f"wrote {tag} null ({args.n_pseudo} pseudo-experiments) to {path}")
    return 0


def cmd_train(args) -> int:
    spec = CMoGSpec.load(args.spec)
    hyper = Hyperparams(
        n_bijectors=args.bijectors, hidden=_parse_hidden(args.hidden),
        knots=args.knots if args.arch in ("crqs", "arqs") else None,
        bound=args.bound if args.arch in ("crqs", "arqs") else None)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for r in range(args.replicas):
        train_batch = sample_cmog(spec, args.train_size,
                                  child_seed(args.seed, "target-sample", r, 0))
        val_batch = sample_cmog(spec, args.val_size,
                                child_seed(args.seed, "target-sample", r, 1))
        model = build_flow(args.arch, spec.dim, hyper,
                           child_seed(args.seed, "model-init", r))
        tc = TrainConfig.for_arch(
            args.arch, max_epochs=args.max_epochs, init_lr=args.lr,
            seed=child_seed(args.seed, "train", r))
        report = train(model, train_batch.data, val_batch.data, tc)
        stem = out / f"{args.arch}-{hyper.label()}-r{r}"
        Path(f"{stem}.train.json").write_text(
            json.dumps({"tool_version": __version__, "seed": args.seed,
                        "replica": r, **report.to_dict()}, indent=2) + "\n")
        if report.success:
            save_model(model, f"{stem}.json")
            print(f"replica {r}: {report.epochs_run} epochs, "
                  f"val nll {report.best_val_loss:.4f} -> {stem}.json")
        else:
            failures += 1
            print(f"replica {r}: FAILED ({report.failure_reason})")
    return 1 if failures == args.replicas else 0


def _load_nulls(nulls_dir) -> dict[str, NullDistribution]:
    nulls = {}
    for tag in METRIC_TAGS:
        path = Path(nulls_dir) / f"{tag}.json"
        if path.exists():
            nulls[tag] = NullDistribution.load(path)
    return nulls


def cmd_evaluate(args) -> int:
    spec = CMoGSpec.load(args.spec)
    nulls = _load_nulls(args.nulls) if args.nulls else None
    models = [m for m in args.models
              if not m.endswith((".train.json", ".eval.json"))]
    for model_path in models:
        model = load_model(model_path)
        outcomes, timing = evaluate_model(model, spec, args.size, args.repeats,
                                          args.seed, nulls)
        stem = Path(model_path).with_suffix("")
        doc = {
            "tool_version": __version__, "seed": args.seed,
            "model": str(model_path),
            "outcomes": {tag: o.to_dict() for tag, o in outcomes.items()},
            "generation_seconds": timing.generation_seconds,
            "metric_seconds": timing.metric_seconds,
            "prediction_seconds": timing.prediction_seconds,
        }
        out_path = Path(f"{stem}.eval.json")
        out_path.write_text(json.dumps(doc, indent=2) + "\n")
        ks = outcomes["KS"]
        print(f"{model_path}: t_KS {ks.mean:.3f} +- {ks.std:.3f} "
              f"(p={ks.p_value}) -> {out_path}")
    return 0


def _collect_results(run_dir: Path) -> list[GridPointResult]:
    """Rebuild grid results from the *.eval.json / *.train.json files."""
    from .evaluate import TestOutcome

    points: dict[tuple, GridPointResult] = {}
    for eval_path in sorted(run_dir.glob("**/*.eval.json")):
        doc = json.loads(eval_path.read_text())
        model_doc = json.loads(Path(doc["model"]).read_text())
        arch = model_doc["arch"]
        hyper = Hyperparams.from_dict(model_doc["hyper"])
        key = (arch, hyper.label())
        point = points.setdefault(key, GridPointResult(arch=arch, hyper=hyper))
        outcomes = {
            tag: TestOutcome(**d) for tag, d in doc["outcomes"].items()
        }
        train_path = Path(str(eval_path).replace(".eval.json", ".train.json"))
        epochs, seconds = 0, 0.0
        if train_path.exists():
            tdoc = json.loads(train_path.read_text())
            epochs, seconds = tdoc["epochs_run"], tdoc["seconds"]
        points[key].replicas.append(ReplicaResult(
            replica=len(point.replicas), success=True, outcomes=outcomes,
            epochs=epochs, train_seconds=seconds,
            prediction_seconds=doc["prediction_seconds"],
            model_path=doc["model"]))
    return list(points.values())


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    spec = CMoGSpec.load(run_dir / "target.json")
    points = _collect_results(run_dir)
    if not points:
        print("no evaluation results found", file=sys.stderr)
        return 1
    by_arch: dict[str, list[GridPointResult]] = {}
    for p in points:
        by_arch.setdefault(p.arch, []).append(p)
    selections = {arch: select_best(ps) for arch, ps in by_arch.items()}
    rows = []
    for sel in selections.values():
        rows.extend(results_rows(spec.dim, sel))
    write_results_table(run_dir / "results.csv", rows, args.seed)
    write_timings_table(run_dir / "timings.csv", rows, args.seed)
    write_summary(run_dir / "summary.json", spec.dim, selections, args.seed)
    best_arch = min(selections, key=lambda a: selections[a].absolute_best.ks())
    best = selections[best_arch].absolute_best
    if best.model_path:
        model = load_model(best.model_path)
        test = sample_cmog(spec, args.size, child_seed(args.seed, "eval-repeat", 999))
        flow = model.sample(args.size, child_seed(args.seed, "flow-sample", 999))
        write_corner_data(run_dir / "corner", test.data, flow.data, args.seed)
    print(f"wrote {run_dir / 'results.csv'}, {run_dir / 'summary.json'}, "
          f"corner data for {best_arch}")
    return 0


def cmd_grid(args) -> int:
    config = RunConfig(
        dim=args.dim, n_components=args.components, master_seed=args.seed,
        architectures=tuple(args.archs), paper_scale=args.paper_scale,
        n_train=args.train_size, n_val=args.val_size, n_test=args.test_size,
        n_pseudo=args.n_pseudo, replicas=args.replicas, repeats=args.repeats,
        max_epochs=args.max_epochs, out_dir=args.out_dir)
    grids = None
    if args.small_grid:
        grids = {arch: table1_grid(arch)[:1] for arch in config.architectures}
    result = run(config, grids=grids)
    if not result["selections"]:
        print("all trainings failed", file=sys.stderr)
        return 1
    print(f"run complete; outputs in {result['out_dir']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowbench",
        description="Normalizing-flow benchmark with calibrated two-sample tests")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-target", help="draw a mixture target specification")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_target)

    p = sub.add_parser("null", help="build null distributions from pseudo-experiments")
    p.add_argument("--spec", required=True)
    p.add_argument("--metric", choices=[*METRIC_TAGS, "all"], default="all")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--n-pseudo", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_null)

    p = sub.add_parser("train", help="train seeded replicas of one configuration")
    p.add_argument("--spec", required=True)
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p.add_argument("--bijectors", type=int, required=True)
    p.add_argument("--hidden", default="128,128,128",
                   help="comma-separated hidden widths")
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--bound", type=float, default=16.0)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--train-size", type=int, default=10_000)
    p.add_argument("--val-size", type=int, default=3_000)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate trained models against the target")
    p.add_argument("--spec", required=True)
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--nulls", help="directory with {KS,SWD,FN}.json null files")
    p.add_argument("--size", type=int, default=10_000)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate a run directory into tables")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--size", type=int, default=10_000,
                   help="sample size for corner-plot data")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("grid", help="full sweep: target, nulls, trainings, report")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--archs", nargs="+", choices=ARCHITECTURES,
                   default=list(ARCHITECTURES))
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--small-grid", action="store_true",
                   help="first grid point per architecture only")
    p.add_argument("--train-size", type=int)
    p.add_argument("--val-size", type=int)
    p.add_argument("--test-size", type=int)
    p.add_argument("--n-pseudo", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--out-dir", default="runs/latest")
    p.set_defaults(fn=cmd_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # surface stage errors as nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
