"""End-to-end run driver: target, nulls, replica trainings, evaluation,
selection, and report emission.

Desk-scale defaults keep the protocol shape of the full study (10:3
train/validation ratio, pseudo-experiment nulls, replicas and repeats) at
sizes that run on a laptop CPU; ``paper_scale=True`` switches to the original
sizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..flows import (ARCHITECTURES, FlowModel, Hyperparams, TrainConfig,
                     build_flow, save_model, train)
from ..rng import child_seed
from ..targets import CMoGSpec, make_cmog, sample_cmog
from .evaluate import evaluate_model
from .nulls import build_nulls
from .report import (results_rows, write_corner_data, write_results_table,
                     write_summary, write_timings_table)
from .select import GridPointResult, ReplicaResult, Selection, select_best

DESK_SCALE = {"n_train": 10_000, "n_val": 3_000, "n_test": 10_000,
              "n_pseudo": 1_000, "replicas": 3, "repeats": 5}
PAPER_SCALE = {"n_train": 100_000, "n_val": 30_000, "n_test": 100_000,
               "n_pseudo": 10_000, "replicas": 10, "repeats": 10}


@dataclass
class RunConfig:
    dim: int = 4
    n_components: int = 3
    master_seed: int = 0
    architectures: tuple[str, ...] = ARCHITECTURES
    paper_scale: bool = False
    n_train: int | None = None
    n_val: int | None = None
    n_test: int | None = None
    n_pseudo: int | None = None
    replicas: int | None = None
    repeats: int | None = None
    max_epochs: int = 1000
    out_dir: str = "runs/latest"
    save_models: bool = True

    def __post_init__(self):
        scale = PAPER_SCALE if self.paper_scale else DESK_SCALE
        for key, value in scale.items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        for key in ("n_train", "n_val", "n_test", "n_pseudo", "replicas", "repeats"):
            if getattr(self, key) < 1:
                raise ValueError(f"{key} must be >= 1")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self.__dict__.items()}


def table1_grid(arch: str, bound: float = 16.0) -> list[Hyperparams]:
    """The hyperparameter grid of the comparison study."""
    hiddens = [[128] * 3, [256] * 3]
    if arch == "arqs":
        bijectors = [2]
    else:
        bijectors = [5, 10]
    grid = []
    for nb in bijectors:
        for hidden in hiddens:
            if arch in ("crqs", "arqs"):
                for knots in (8, 12):
                    grid.append(Hyperparams(nb, hidden, knots=knots, bound=bound))
            else:
                grid.append(Hyperparams(nb, hidden))
    return grid


def _point_seed(config: RunConfig, arch: str, grid_index: int) -> int:
    return child_seed(config.master_seed, "generic",
                      ARCHITECTURES.index(arch), grid_index)


def run_replica(spec: CMoGSpec, arch: str, hyper: Hyperparams, replica: int,
                config: RunConfig, nulls, point_seed: int,
                model_path: Path | None = None) -> tuple[FlowModel, ReplicaResult]:
    """Train one replica on its own training draw, then evaluate it."""
    train_batch = sample_cmog(spec, config.n_train,
                              child_seed(point_seed, "target-sample", replica, 0))
    val_batch = sample_cmog(spec, config.n_val,
                            child_seed(point_seed, "target-sample", replica, 1))
    model = build_flow(arch, spec.dim, hyper,
                       child_seed(point_seed, "model-init", replica))
    tc = TrainConfig.for_arch(arch, max_epochs=config.max_epochs,
                              seed=child_seed(point_seed, "train", replica))
    report = train(model, train_batch.data, val_batch.data, tc)
    result = ReplicaResult(replica=replica, success=report.success,
                           epochs=report.epochs_run, train_seconds=report.seconds,
                           failure_reason=report.failure_reason)
    if report.success:
        outcomes, timing = evaluate_model(
            model, spec, config.n_test, config.repeats,
            child_seed(point_seed, "eval-repeat", replica), nulls)
        result.outcomes = outcomes
        result.prediction_seconds = timing.prediction_seconds
        if model_path is not None:
            save_model(model, model_path)
            result.model_path = str(model_path)
    return model, result


def run_grid_point(spec: CMoGSpec, arch: str, hyper: Hyperparams,
                   grid_index: int, config: RunConfig, nulls,
                   models_dir: Path | None = None) -> GridPointResult:
    point_seed = _point_seed(config, arch, grid_index)
    point = GridPointResult(arch=arch, hyper=hyper)
    for r in range(config.replicas):
        path = None
        if models_dir is not None:
            path = models_dir / f"{arch}-{hyper.label()}-r{r}.json"
        _, result = run_replica(spec, arch, hyper, r, config, nulls,
                                point_seed, path)
        point.replicas.append(result)
    return point


def run(config: RunConfig,
        grids: dict[str, list[Hyperparams]] | None = None) -> dict:
    """Full pipeline; returns selections and writes the run directory."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")

    spec = make_cmog(config.dim, config.n_components,
                     child_seed(config.master_seed, "target-spec"))
    spec.save(out / "target.json")

    nulls = build_nulls(spec, config.n_test, config.n_pseudo,
                        child_seed(config.master_seed, "pseudo-experiment"))
    nulls_dir = out / "nulls"
    nulls_dir.mkdir(exist_ok=True)
    for tag, null in nulls.items():
        null.save(nulls_dir / f"{tag}.json")

    models_dir = None
    if config.save_models:
        models_dir = out / "models"
        models_dir.mkdir(exist_ok=True)

    selections: dict[str, Selection] = {}
    rows = []
    for arch in config.architectures:
        grid = (grids or {}).get(arch) or table1_grid(arch)
        points = [run_grid_point(spec, arch, hyper, gi, config, nulls, models_dir)
                  for gi, hyper in enumerate(grid)]
        try:
            sel = select_best(points)
        except ValueError:
            continue  # every replica of every grid point failed
        selections[arch] = sel
        rows.extend(results_rows(config.dim, sel))

    write_results_table(out / "results.csv", rows, config.master_seed)
    write_timings_table(out / "timings.csv", rows, config.master_seed)
    write_summary(out / "summary.json", config.dim, selections, config.master_seed)

    # corner data for the overall absolute-best model (lowest replica KS)
    if selections:
        best_arch = min(selections, key=lambda a: selections[a].absolute_best.ks())
        best = selections[best_arch]
        if best.absolute_best.model_path:
            from ..flows import load_model
            model = load_model(best.absolute_best.model_path)
            test = sample_cmog(spec, config.n_test,
                               child_seed(config.master_seed, "eval-repeat", 999))
            flow = model.sample(config.n_test,
                                child_seed(config.master_seed, "flow-sample", 999))
            write_corner_data(out / "corner", test.data, flow.data,
                              config.master_seed)
    return {"spec": spec, "nulls": nulls, "selections": selections,
            "out_dir": out}
