"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from flowbench import autodiff as ad


def central_difference(fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar fn at flat point x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = fn(x)
        flat[i] = orig - step
        fm = fn(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def numeric_jacobian(fn, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Dense Jacobian of a vector map fn: R^D -> R^D at a single point."""
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    jac = np.zeros((d, d))
    for j in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        jac[:, j] = (fn(xp) - fn(xm)) / (2.0 * step)
    return jac


def randomize_heads(obj, seed: int, scale: float = 0.5) -> None:
    """Give zero-initialized conditioner heads random weights in place.

    Accepts a single bijector layer or a FlowModel; layers without a
    conditioner (permutations) are skipped. Fresh layers are exact identity
    maps, so tests that need a nontrivial transform call this first.
    """
    rng = np.random.default_rng(seed)
    layers = getattr(obj, "layers", [obj])
    for layer in layers:
        mlp = getattr(layer, "cond", None) or getattr(layer, "net", None)
        if mlp is None:
            continue
        for name in mlp.head_weights:
            w = mlp.head_weights[name]
            w.value = rng.standard_normal(w.value.shape) * scale / np.sqrt(
                w.value.shape[0])
            b = mlp.head_biases[name]
            b.value = rng.standard_normal(b.value.shape) * 0.1


def rel_err(a: float, b: float) -> float:
    denom = max(abs(a), abs(b), 1e-12)
    return abs(a - b) / denom


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
