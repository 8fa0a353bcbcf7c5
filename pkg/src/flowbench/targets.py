"""Correlated-mixture-of-Gaussians targets and the standard-normal base.

A target is a categorical mixture of diagonal-covariance multivariate normals.
Component means are drawn uniform on [0, 10], standard deviations uniform on
(0, 1] (zero excluded so the density always exists), and the mixture
probabilities are uniform draws normalized to sum to one. The same component
probability applies to every dimension of that component; cross-dimension
correlations arise purely from the mixing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .rng import stream

Array = np.ndarray

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class CMoGSpec:
    dim: int
    n_components: int
    means: Array       # (n, D), values in [0, 10]
    stds: Array        # (n, D), values in (0, 1]
    mixture_probs: Array  # (n,), sums to 1
    seed: int

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stds = np.asarray(self.stds, dtype=np.float64)
        self.mixture_probs = np.asarray(self.mixture_probs, dtype=np.float64)
        n, d = self.n_components, self.dim
        if self.means.shape != (n, d) or self.stds.shape != (n, d):
            raise ValueError("means/stds must have shape (n_components, dim)")
        if self.mixture_probs.shape != (n,):
            raise ValueError("mixture_probs must have shape (n_components,)")
        if np.any(self.mixture_probs < 0) or abs(self.mixture_probs.sum() - 1.0) > 1e-12:
            raise ValueError("mixture_probs must be nonnegative and sum to 1")
        if np.any(self.stds <= 0):
            raise ValueError("stds must be strictly positive")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n_components": self.n_components,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "mixture_probs": self.mixture_probs.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CMoGSpec":
        return cls(
            dim=d["dim"],
            n_components=d["n_components"],
            means=np.array(d["means"]),
            stds=np.array(d["stds"]),
            mixture_probs=np.array(d["mixture_probs"]),
            seed=d["seed"],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "CMoGSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SampleBatch:
    data: Array                 # (N, D)
    source: str = "target"      # target | flow | base
    seed: int = 0
    columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("sample data must be 2-D (points x dimensions)")
        if not self.columns:
            self.columns = [f"x{i}" for i in range(self.data.shape[1])]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.data:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, source: str = "target", seed: int = 0) -> "SampleBatch":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            columns = next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
        return cls(data=data, source=source, seed=seed, columns=columns)


def make_cmog(dim: int, n_components: int, seed: int) -> CMoGSpec:
    """Draw a target specification deterministically from a seed."""
    if dim < 1 or n_components < 1:
        raise ValueError("dim and n_components must be >= 1")
    rng = stream(seed, "target-spec")
    means = rng.uniform(0.0, 10.0, size=(n_components, dim))
    stds = 1.0 - rng.random(size=(n_components, dim))  # uniform on (0, 1]
    raw = rng.random(size=n_components)
    probs = raw / raw.sum()
    return CMoGSpec(dim=dim, n_components=n_components, means=means,
                    stds=stds, mixture_probs=probs, seed=seed)


def sample_cmog(spec: CMoGSpec, n_points: int, seed: int) -> SampleBatch:
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = stream(seed, "target-sample")
    comp = rng.choice(spec.n_components, size=n_points, p=spec.mixture_probs)
    noise = rng.standard_normal(size=(n_points, spec.dim))
    data = spec.means[comp] + spec.stds[comp] * noise
    return SampleBatch(data=data, source="target", seed=seed)


def log_prob_cmog(spec: CMoGSpec, x: Array) -> Array:
    """Exact mixture log-density, stabilized with log-sum-exp."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.dim:
        raise ValueError(f"points must have shape (N, {spec.dim})")
    # (N, n): per-component diagonal Gaussian log densities
    z = (x[:, None, :] - spec.means[None, :, :]) / spec.stds[None, :, :]
    comp_lp = -0.5 * (z * z).sum(axis=2) \
        - np.log(spec.stds).sum(axis=1)[None, :] \
        - 0.5 * spec.dim * LOG_2PI
    return logsumexp(comp_lp + np.log(spec.mixture_probs)[None, :], axis=1)


def sample_base(dim: int, n_points: int, seed: int) -> SampleBatch:
    rng = stream(seed, "target-sample")
    data = rng.standard_normal(size=(n_points, dim))
    return SampleBatch(data=data, source="base", seed=seed)


def log_prob_base(x: Array) -> Array:
    x = np.asarray(x, dtype=np.float64)
    dim = x.shape[1]
    return -0.5 * dim * LOG_2PI - 0.5 * (x * x).sum(axis=1)
