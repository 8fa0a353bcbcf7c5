"""Null distributions of the test statistics from pseudo-experiments.

One pseudo-experiment draws two fresh same-size samples from the target and
evaluates a statistic on them. Sorting the statistic values over many
pseudo-experiments gives the empirical null; sigma thresholds are its 0.68 /
0.95 / 0.99 quantiles and p-values are upper-tail fractions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..metrics import METRIC_TAGS, all_statistics, sample_directions
from ..rng import child_seed
from ..targets import CMoGSpec, sample_cmog

SIGMA_CONFIDENCE = {1: 0.68, 2: 0.95, 3: 0.99}


@dataclass
class NullDistribution:
    tag: str
    target_seed: int
    dim: int
    sample_size: int
    values: np.ndarray   # sorted ascending
    seed: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(np.diff(self.values) < 0):
            raise ValueError("null values must be sorted ascending")

    @property
    def n_pseudo(self) -> int:
        return self.values.size

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "target_seed": self.target_seed,
            "dim": self.dim,
            "sample_size": self.sample_size,
            "seed": self.seed,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NullDistribution":
        return cls(tag=d["tag"], target_seed=d["target_seed"], dim=d["dim"],
                   sample_size=d["sample_size"], values=np.array(d["values"]),
                   seed=d["seed"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "NullDistribution":
        return cls.from_dict(json.loads(Path(path).read_text()))


def pseudo_experiment(spec: CMoGSpec, sample_size: int, seed: int,
                      index: int) -> dict[str, float]:
    """Scaled statistics for one pair of fresh target draws."""
    y = sample_cmog(spec, sample_size, child_seed(seed, "pseudo-experiment", index, 0))
    z = sample_cmog(spec, sample_size, child_seed(seed, "pseudo-experiment", index, 1))
    dirs = sample_directions(spec.dim, child_seed(seed, "pseudo-experiment", index, 2))
    stats = all_statistics(y.data, z.data, dirs)
    return {tag: sv.scaled for tag, sv in stats.items()}


def build_nulls(spec: CMoGSpec, sample_size: int, n_pseudo: int,
                seed: int) -> dict[str, NullDistribution]:
    """Nulls for all three metrics, sharing the pseudo-experiment draws."""
    if n_pseudo < 100:
        raise ValueError("n_pseudo must be >= 100")
    collected: dict[str, list[float]] = {tag: [] for tag in METRIC_TAGS}
    for j in range(n_pseudo):
        stats = pseudo_experiment(spec, sample_size, seed, j)
        for tag in METRIC_TAGS:
            collected[tag].append(stats[tag])
    return {
        tag: NullDistribution(tag=tag, target_seed=spec.seed, dim=spec.dim,
                              sample_size=sample_size,
                              values=np.sort(collected[tag]), seed=seed)
        for tag in METRIC_TAGS
    }


def build_null(tag: str, spec: CMoGSpec, sample_size: int, n_pseudo: int,
               seed: int) -> NullDistribution:
    if tag not in METRIC_TAGS:
        raise ValueError(f"unknown metric tag {tag!r}")
    return build_nulls(spec, sample_size, n_pseudo, seed)[tag]


def threshold(null: NullDistribution, sigma: int) -> float:
    """Empirical quantile of the null at the confidence level for 1/2/3 sigma.

    Uses the Hazen plotting position (h = q*n + 1/2) with linear
    interpolation between order statistics.
    """
    if sigma not in SIGMA_CONFIDENCE:
        raise ValueError("sigma level must be 1, 2, or 3")
    return float(np.quantile(null.values, SIGMA_CONFIDENCE[sigma], method="hazen"))


def p_value(null: NullDistribution, t: float) -> float:
    """Fraction of null values >= t (0 means below 1/n_pseudo resolution)."""
    if not np.isfinite(t):
        return 0.0
    idx = np.searchsorted(null.values, t, side="left")
    return float((null.values.size - idx) / null.values.size)


def sigma_level(null: NullDistribution, t: float) -> int:
    """Highest sigma threshold that t exceeds (0 if below all of them)."""
    level = 0
    for s in (1, 2, 3):
        if t > threshold(null, s):
            level = s
    return level
