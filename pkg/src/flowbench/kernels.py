"""Hot evaluation kernels with a numba fast path and a pure-numpy fallback.

The kernels here are the per-element inner loops that dominate evaluation
runtime: exact two-sample ECDF statistics (KS supremum, 1-D Wasserstein
integral) and rational-quadratic spline evaluation. Every kernel has a
pure-numpy implementation; when numba is importable and the environment
variable ``FLOWBENCH_DISABLE_NUMBA`` is unset, a jitted twin is compiled and
used instead. Both paths are kept test-covered and must agree to float64
round-off.

Gradient-carrying code (the training path) lives in the autodiff modules and
does not route through here.
"""

from __future__ import annotations

import os

import numpy as np

Array = np.ndarray

_DISABLE = os.environ.get("FLOWBENCH_DISABLE_NUMBA", "") not in ("", "0")

try:
    if _DISABLE:
        raise ImportError("numba disabled by FLOWBENCH_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def deco(fn):
            return fn
        return deco


# ---------------------------------------------------------------------------
# two-sample ECDF statistics (inputs must be sorted ascending)


def ks_distance_numpy(a: Array, b: Array) -> float:
    m, n = a.size, b.size
    allv = np.concatenate([a, b])
    fa = np.searchsorted(a, allv, side="right") / m
    fb = np.searchsorted(b, allv, side="right") / n
    return float(np.abs(fa - fb).max())


@njit(cache=True)
def ks_distance_numba(a: Array, b: Array) -> float:
    m, n = a.size, b.size
    i, j = 0, 0
    d = 0.0
    while i < m or j < n:
        if j >= n or (i < m and a[i] <= b[j]):
            x = a[i]
        else:
            x = b[j]
        while i < m and a[i] <= x:
            i += 1
        while j < n and b[j] <= x:
            j += 1
        diff = abs(i / m - j / n)
        if diff > d:
            d = diff
    return d


def wasserstein_1d_numpy(a: Array, b: Array) -> float:
    m, n = a.size, b.size
    allv = np.sort(np.concatenate([a, b]), kind="mergesort")
    fa = np.searchsorted(a, allv[:-1], side="right") / m
    fb = np.searchsorted(b, allv[:-1], side="right") / n
    return float(np.sum(np.abs(fa - fb) * np.diff(allv)))


@njit(cache=True)
def wasserstein_1d_numba(a: Array, b: Array) -> float:
    m, n = a.size, b.size
    i, j = 0, 0
    total = 0.0
    prev = 0.0
    first = True
    while i < m or j < n:
        if j >= n or (i < m and a[i] <= b[j]):
            x = a[i]
        else:
            x = b[j]
        if not first and x > prev:
            total += abs(i / m - j / n) * (x - prev)
        while i < m and a[i] <= x:
            i += 1
        while j < n and b[j] <= x:
            j += 1
        prev = x
        first = False
    return total


# ---------------------------------------------------------------------------
# rational-quadratic spline evaluation (no gradients)
#
# Flattened layout: x has shape (M,), each element carries its own knot row
# kx/ky of shape (M, K+1) and derivative row dv of shape (M, K+1) with the
# boundary entries already set to 1. Outside [-B, B] the map is the identity.


def spline_forward_numpy(x: Array, kx: Array, ky: Array, dv: Array, bound: float):
    num_bins = kx.shape[1] - 1
    inside = (x >= -bound) & (x <= bound)
    xc = np.clip(x, -bound, bound)
    k = np.clip(
        np.sum(kx[:, :-1] <= xc[:, None], axis=1) - 1, 0, num_bins - 1)
    rows = np.arange(x.size)
    x0, x1 = kx[rows, k], kx[rows, k + 1]
    y0, y1 = ky[rows, k], ky[rows, k + 1]
    d0, d1 = dv[rows, k], dv[rows, k + 1]
    h = x1 - x0
    height = y1 - y0
    slope = height / h
    th = (xc - x0) / h
    omt = 1.0 - th
    den = slope + (d1 + d0 - 2.0 * slope) * th * omt
    y = y0 + height * (slope * th * th + d0 * th * omt) / den
    deriv = slope * slope * (d1 * th * th + 2.0 * slope * th * omt + d0 * omt * omt) / (den * den)
    y = np.where(inside, y, x)
    logd = np.where(inside, np.log(deriv), 0.0)
    return y, logd


def spline_inverse_numpy(y: Array, kx: Array, ky: Array, dv: Array, bound: float):
    num_bins = kx.shape[1] - 1
    inside = (y >= -bound) & (y <= bound)
    yc = np.clip(y, -bound, bound)
    k = np.clip(
        np.sum(ky[:, :-1] <= yc[:, None], axis=1) - 1, 0, num_bins - 1)
    rows = np.arange(y.size)
    x0, x1 = kx[rows, k], kx[rows, k + 1]
    y0, y1 = ky[rows, k], ky[rows, k + 1]
    d0, d1 = dv[rows, k], dv[rows, k + 1]
    h = x1 - x0
    height = y1 - y0
    slope = height / h
    t = yc - y0
    w = d1 + d0 - 2.0 * slope
    qa = height * (slope - d0) + t * w
    qb = height * d0 - t * w
    qc = -slope * t
    disc = qb * qb - 4.0 * qa * qc
    if np.any(disc[inside] < 0.0):
        raise ArithmeticError("negative discriminant in spline inversion")
    th = 2.0 * qc / (-qb - np.sqrt(np.maximum(disc, 0.0)))
    omt = 1.0 - th
    den = slope + w * th * omt
    deriv = slope * slope * (d1 * th * th + 2.0 * slope * th * omt + d0 * omt * omt) / (den * den)
    x = np.where(inside, x0 + th * h, y)
    logd = np.where(inside, -np.log(deriv), 0.0)
    return x, logd


@njit(cache=True)
def _spline_forward_nb(x, kx, ky, dv, bound, y_out, logd_out):
    num_bins = kx.shape[1] - 1
    for i in range(x.size):
        xi = x[i]
        if xi < -bound or xi > bound:
            y_out[i] = xi
            logd_out[i] = 0.0
            continue
        k = 0
        while k < num_bins - 1 and kx[i, k + 1] <= xi:
            k += 1
        x0 = kx[i, k]
        h = kx[i, k + 1] - x0
        y0 = ky[i, k]
        height = ky[i, k + 1] - y0
        d0 = dv[i, k]
        d1 = dv[i, k + 1]
        slope = height / h
        th = (xi - x0) / h
        omt = 1.0 - th
        den = slope + (d1 + d0 - 2.0 * slope) * th * omt
        y_out[i] = y0 + height * (slope * th * th + d0 * th * omt) / den
        deriv = slope * slope * (d1 * th * th + 2.0 * slope * th * omt + d0 * omt * omt) \
            / (den * den)
        logd_out[i] = np.log(deriv)
    return 0


@njit(cache=True)
def _spline_inverse_nb(y, kx, ky, dv, bound, x_out, logd_out):
    num_bins = kx.shape[1] - 1
    for i in range(y.size):
        yi = y[i]
        if yi < -bound or yi > bound:
            x_out[i] = yi
            logd_out[i] = 0.0
            continue
        k = 0
        while k < num_bins - 1 and ky[i, k + 1] <= yi:
            k += 1
        x0 = kx[i, k]
        h = kx[i, k + 1] - x0
        y0 = ky[i, k]
        height = ky[i, k + 1] - y0
        d0 = dv[i, k]
        d1 = dv[i, k + 1]
        slope = height / h
        t = yi - y0
        w = d1 + d0 - 2.0 * slope
        qa = height * (slope - d0) + t * w
        qb = height * d0 - t * w
        qc = -slope * t
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            return 1
        th = 2.0 * qc / (-qb - np.sqrt(disc))
        omt = 1.0 - th
        den = slope + w * th * omt
        deriv = slope * slope * (d1 * th * th + 2.0 * slope * th * omt + d0 * omt * omt) \
            / (den * den)
        x_out[i] = x0 + th * h
        logd_out[i] = -np.log(deriv)
    return 0


def spline_forward_numba(x, kx, ky, dv, bound):
    y = np.empty_like(x)
    logd = np.empty_like(x)
    _spline_forward_nb(x, kx, ky, dv, bound, y, logd)
    return y, logd


def spline_inverse_numba(y, kx, ky, dv, bound):
    x = np.empty_like(y)
    logd = np.empty_like(y)
    status = _spline_inverse_nb(y, kx, ky, dv, bound, x, logd)
    if status != 0:
        raise ArithmeticError("negative discriminant in spline inversion")
    return x, logd


# ---------------------------------------------------------------------------
# dispatch

if HAVE_NUMBA:
    ks_distance = ks_distance_numba
    wasserstein_1d_sorted = wasserstein_1d_numba
    spline_forward = spline_forward_numba
    spline_inverse = spline_inverse_numba
else:
    ks_distance = ks_distance_numpy
    wasserstein_1d_sorted = wasserstein_1d_numpy
    spline_forward = spline_forward_numpy
    spline_inverse = spline_inverse_numpy
