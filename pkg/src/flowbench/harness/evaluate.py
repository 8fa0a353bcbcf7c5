"""Repeated two-sample evaluation of a trained model against its target.

Each repeat draws a fresh target sample and a fresh model sample, computes
all three scaled statistics, and times generation and metric computation
separately. Aggregation reports mean and standard deviation over repeats plus
the p-value of the mean statistic against the null distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from ..metrics import METRIC_TAGS, all_statistics, sample_directions
from ..rng import child_seed
from ..targets import CMoGSpec, SampleBatch, sample_cmog
from .nulls import NullDistribution, p_value, sigma_level

MAX_NONFINITE_FRACTION = 0.01


@dataclass
class TestOutcome:
    __test__ = False  # not a pytest class despite the name

    tag: str
    values: list[float]          # per kept repeat
    mean: float
    std: float                   # sample std over repeats (ddof=1)
    p_value: float | None = None
    sigma_level: int | None = None
    discarded_repeats: int = 0
    nonfinite_points: int = 0

    def to_dict(self) -> dict:
        return {
            "tag": self.tag, "values": self.values, "mean": self.mean,
            "std": self.std, "p_value": self.p_value,
            "sigma_level": self.sigma_level,
            "discarded_repeats": self.discarded_repeats,
            "nonfinite_points": self.nonfinite_points,
        }


@dataclass
class EvalTiming:
    generation_seconds: float
    metric_seconds: float

    @property
    def prediction_seconds(self) -> float:
        """Documented sum: sample generation plus statistic computation."""
        return self.generation_seconds + self.metric_seconds


class TargetSampler:
    """Adapter that resamples the target itself (null self-test)."""

    def __init__(self, spec: CMoGSpec):
        self.spec = spec

    def sample(self, n_points: int, seed: int) -> SampleBatch:
        batch = sample_cmog(self.spec, n_points, seed)
        return SampleBatch(data=batch.data, source="flow", seed=seed)


def evaluate_model(model, spec: CMoGSpec, sample_size: int, repeats: int,
                   seed: int, nulls: dict[str, NullDistribution] | None = None):
    """Run the repeat protocol; returns (outcomes by tag, timing).

    ``model`` needs only a ``sample(n, seed)`` method. Repeats whose model
    sample contains more than 1% non-finite points are discarded (and
    counted); smaller amounts of non-finite points are dropped row-wise.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    per_tag: dict[str, list[float]] = {tag: [] for tag in METRIC_TAGS}
    discarded = 0
    nonfinite_total = 0
    gen_seconds = 0.0
    metric_seconds = 0.0
    for k in range(repeats):
        target = sample_cmog(spec, sample_size, child_seed(seed, "eval-repeat", k, 0))
        t0 = perf_counter()
        flow = model.sample(sample_size, child_seed(seed, "eval-repeat", k, 1))
        gen_seconds += perf_counter() - t0
        finite = np.all(np.isfinite(flow.data), axis=1)
        n_bad = int(sample_size - finite.sum())
        nonfinite_total += n_bad
        if n_bad > MAX_NONFINITE_FRACTION * sample_size:
            discarded += 1
            continue
        flow_data = flow.data[finite]
        dirs = sample_directions(spec.dim, child_seed(seed, "eval-repeat", k, 2))
        t0 = perf_counter()
        stats = all_statistics(target.data, flow_data, dirs)
        metric_seconds += perf_counter() - t0
        for tag in METRIC_TAGS:
            per_tag[tag].append(stats[tag].scaled)

    outcomes: dict[str, TestOutcome] = {}
    for tag in METRIC_TAGS:
        vals = per_tag[tag]
        if not vals:
            outcomes[tag] = TestOutcome(tag, [], np.nan, np.nan,
                                        discarded_repeats=discarded,
                                        nonfinite_points=nonfinite_total)
            continue
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        outcome = TestOutcome(tag, [float(v) for v in vals], mean, std,
                              discarded_repeats=discarded,
                              nonfinite_points=nonfinite_total)
        if nulls is not None and tag in nulls:
            outcome.p_value = p_value(nulls[tag], mean)
            outcome.sigma_level = sigma_level(nulls[tag], mean)
        outcomes[tag] = outcome
    n_kept = repeats - discarded
    timing = EvalTiming(
        generation_seconds=gen_seconds / max(repeats, 1),
        metric_seconds=metric_seconds / max(n_kept, 1),
    )
    return outcomes, timing
