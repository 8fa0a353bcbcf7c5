"""Average-best / absolute-best selection over a hyperparameter grid.

Each grid point carries the outcomes of its training replicas. The KS
statistic ranks: the average-best grid point minimizes the replica-mean
scaled KS value; the absolute-best model is the single replica of that grid
point with the lowest value. Failed replicas are excluded and counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..flows import Hyperparams
from .evaluate import TestOutcome


@dataclass
class ReplicaResult:
    replica: int
    success: bool
    outcomes: dict[str, TestOutcome] = field(default_factory=dict)
    epochs: int = 0
    train_seconds: float = 0.0
    prediction_seconds: float = 0.0
    model_path: str | None = None
    failure_reason: str | None = None

    def ks(self) -> float:
        return self.outcomes["KS"].mean


@dataclass
class GridPointResult:
    arch: str
    hyper: Hyperparams
    replicas: list[ReplicaResult] = field(default_factory=list)

    def successful(self) -> list[ReplicaResult]:
        return [r for r in self.replicas
                if r.success and "KS" in r.outcomes and np.isfinite(r.ks())]

    def n_failed(self) -> int:
        return len(self.replicas) - len(self.successful())

    def mean_ks(self) -> float:
        good = self.successful()
        if not good:
            return np.inf
        return float(np.mean([r.ks() for r in good]))


@dataclass
class Selection:
    average_best: GridPointResult
    absolute_best: ReplicaResult
    excluded_failures: int


def select_best(grid_results: list[GridPointResult]) -> Selection:
    """Pick the average-best grid point and its absolute-best replica."""
    usable = [g for g in grid_results if g.successful()]
    if not usable:
        raise ValueError("no grid point has a successful replica")
    average_best = min(usable, key=lambda g: g.mean_ks())
    absolute_best = min(average_best.successful(), key=lambda r: r.ks())
    excluded = sum(g.n_failed() for g in grid_results)
    return Selection(average_best=average_best, absolute_best=absolute_best,
                     excluded_failures=excluded)
