"""Scaled two-sample test statistics: dimension-averaged KS, sliced
Wasserstein distance, and the Frobenius norm of the correlation-matrix
difference.

All three are exact sort-based computations (no binning). Each raw statistic
is scaled by sqrt(m*n/(m+n)), which reduces to sqrt(N/2) for equal sample
sizes N; the FN statistic is additionally divided by the dimension to remove
its approximately linear growth with D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .rng import stream

Array = np.ndarray

METRIC_TAGS = ("KS", "SWD", "FN")


@dataclass
class StatValue:
    tag: str          # KS | SWD | FN
    raw: float
    scaled: float
    size_a: int
    size_b: int


def _scale(m: int, n: int) -> float:
    return float(np.sqrt(m * n / (m + n)))


def _check_pair(y: Array, z: Array):
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if y.ndim != 2 or z.ndim != 2:
        raise ValueError("samples must be 2-D (points x dimensions)")
    if y.shape[1] != z.shape[1]:
        raise ValueError(f"dimension mismatch: {y.shape[1]} vs {z.shape[1]}")
    if y.shape[0] < 1 or z.shape[0] < 1:
        raise ValueError("samples must be non-empty")
    return y, z


def ks_1d(a: Array, b: Array) -> float:
    """Exact sup |F_a - F_b| between two 1-D samples."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    return kernels.ks_distance(a, b)


def wasserstein_1d(a: Array, b: Array) -> float:
    """Exact integral of |F_a - F_b| over the merged breakpoints."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    return kernels.wasserstein_1d_sorted(a, b)


def ks_mean(y: Array, z: Array) -> StatValue:
    """Average of the per-marginal KS statistics, scaled."""
    y, z = _check_pair(y, z)
    dim = y.shape[1]
    raw = float(np.mean([ks_1d(y[:, i], z[:, i]) for i in range(dim)]))
    return StatValue("KS", raw, _scale(y.shape[0], z.shape[0]) * raw,
                     y.shape[0], z.shape[0])


@dataclass
class DirectionSet:
    """2D unit vectors for slicing, drawn as normalized standard normals."""
    vectors: Array    # (2D, D), rows unit norm
    seed: int

    def __post_init__(self):
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("direction vectors must have unit norm")


def sample_directions(dim: int, seed: int) -> DirectionSet:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = stream(seed, "directions")
    v = rng.standard_normal(size=(2 * dim, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return DirectionSet(vectors=v, seed=seed)


def swd(y: Array, z: Array, dirs: DirectionSet) -> StatValue:
    """Sliced Wasserstein distance over the direction set, scaled."""
    y, z = _check_pair(y, z)
    if dirs.vectors.shape[1] != y.shape[1]:
        raise ValueError("direction dimension does not match samples")
    proj_y = y @ dirs.vectors.T
    proj_z = z @ dirs.vectors.T
    dists = [wasserstein_1d(proj_y[:, a], proj_z[:, a])
             for a in range(dirs.vectors.shape[0])]
    raw = float(np.mean(dists))
    return StatValue("SWD", raw, _scale(y.shape[0], z.shape[0]) * raw,
                     y.shape[0], z.shape[0])


def _correlation(x: Array) -> Array:
    std = x.std(axis=0)
    bad = np.nonzero(std == 0.0)[0]
    if bad.size:
        raise ValueError(f"zero-variance column {bad[0]}: correlation undefined")
    c = (x - x.mean(axis=0)) / std
    return (c.T @ c) / x.shape[0]


def frobenius_corr(y: Array, z: Array) -> StatValue:
    """Frobenius norm of the correlation-matrix difference, scaled and
    divided by the dimension."""
    y, z = _check_pair(y, z)
    if y.shape[0] < 2 or z.shape[0] < 2:
        raise ValueError("need at least 2 points per sample")
    diff = _correlation(y) - _correlation(z)
    # raw carries the 1/D normalization; scaled = sqrt(mn/(m+n)) * raw
    raw = float(np.sqrt(np.sum(diff * diff))) / y.shape[1]
    return StatValue("FN", raw, _scale(y.shape[0], z.shape[0]) * raw,
                     y.shape[0], z.shape[0])


def all_statistics(y: Array, z: Array, dirs: DirectionSet) -> dict[str, StatValue]:
    return {
        "KS": ks_mean(y, z),
        "SWD": swd(y, z, dirs),
        "FN": frobenius_corr(y, z),
    }
