"""Monotonic rational-quadratic spline transforms.

A spline on [-B, B] is parameterized by an unconstrained vector of length
3K-1 per transformed element: K raw bin widths, K raw bin heights, and K-1
raw internal derivatives. Widths and heights go through a softmax (with a
small floor so no bin can collapse) and are accumulated into knot
coordinates; internal derivatives go through an offset softplus so that a
raw-zero vector yields derivative exactly 1 and, together with the uniform
bins, an exact identity map. Boundary derivatives are pinned to 1 to match
the identity tails.

Two code paths exist: plain numpy (evaluation; dispatches to the jitted
kernels) and autodiff-node (the training path, where gradients must flow into
the conditioner that produced the raw parameters).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Node

Array = np.ndarray

MIN_BIN_FRACTION = 1e-3   # of the total 2B extent, spread over K bins
MIN_DERIVATIVE = 1e-3


def _softplus_offset() -> float:
    # softplus(0 + offset) + MIN_DERIVATIVE == 1 exactly
    return float(np.log(np.expm1(1.0 - MIN_DERIVATIVE)))


def build_spline_params(theta_raw: Array, num_bins: int, bound: float):
    """Raw (..., 3K-1) parameters -> knot abscissae/ordinates and derivatives.

    Returns (kx, ky, dv), each of shape (..., K+1). Construction is total:
    any finite input yields strictly increasing knots and positive
    derivatives.
    """
    theta_raw = np.asarray(theta_raw, dtype=np.float64)
    if theta_raw.shape[-1] != 3 * num_bins - 1:
        raise ValueError(f"last axis must have length {3 * num_bins - 1}")
    tw = theta_raw[..., :num_bins]
    th = theta_raw[..., num_bins:2 * num_bins]
    td = theta_raw[..., 2 * num_bins:]

    def knots(raw):
        e = np.exp(raw - raw.max(axis=-1, keepdims=True))
        sm = e / e.sum(axis=-1, keepdims=True)
        widths = 2.0 * bound * (sm * (1.0 - MIN_BIN_FRACTION)
                                + MIN_BIN_FRACTION / num_bins)
        inner = -bound + np.cumsum(widths, axis=-1)[..., :-1]
        lo = np.full((*raw.shape[:-1], 1), -bound)
        hi = np.full((*raw.shape[:-1], 1), bound)
        return np.concatenate([lo, inner, hi], axis=-1)

    kx = knots(tw)
    ky = knots(th)
    d_inner = MIN_DERIVATIVE + np.logaddexp(0.0, td + _softplus_offset())
    ones = np.ones((*theta_raw.shape[:-1], 1))
    dv = np.concatenate([ones, d_inner, ones], axis=-1)
    return kx, ky, dv


def build_spline_params_ad(theta_raw: Node, num_bins: int, bound: float):
    """Autodiff twin of :func:`build_spline_params`; same arithmetic."""
    if theta_raw.value.shape[-1] != 3 * num_bins - 1:
        raise ValueError(f"last axis must have length {3 * num_bins - 1}")
    tw = theta_raw[..., :num_bins]
    th = theta_raw[..., num_bins:2 * num_bins]
    td = theta_raw[..., 2 * num_bins:]

    lead = theta_raw.value.shape[:-1]
    lo = ad.constant(np.full((*lead, 1), -bound))
    hi = ad.constant(np.full((*lead, 1), bound))
    ones = ad.constant(np.ones((*lead, 1)))

    def knots(raw):
        sm = ad.softmax(raw)
        widths = (sm * (1.0 - MIN_BIN_FRACTION) + MIN_BIN_FRACTION / num_bins) \
            * (2.0 * bound)
        inner = ad.cumsum(widths)[..., :-1] - bound
        return ad.concat([lo, inner, hi], axis=-1)

    kx = knots(tw)
    ky = knots(th)
    d_inner = ad.softplus(td + _softplus_offset()) + MIN_DERIVATIVE
    dv = ad.concat([ones, d_inner, ones], axis=-1)
    return kx, ky, dv


# ---------------------------------------------------------------------------
# numpy evaluation (dispatches to numba kernels when enabled)


def _flatten(values: Array, kx: Array, ky: Array, dv: Array):
    flat = values.reshape(-1)
    cols = kx.shape[-1]
    return flat, kx.reshape(-1, cols), ky.reshape(-1, cols), dv.reshape(-1, cols)


def spline_forward(x: Array, kx: Array, ky: Array, dv: Array, bound: float):
    """Elementwise forward map and log-derivative; identity outside [-B, B]."""
    xf, kxf, kyf, dvf = _flatten(np.asarray(x, dtype=np.float64), kx, ky, dv)
    y, logd = kernels.spline_forward(xf, kxf, kyf, dvf, bound)
    return y.reshape(x.shape), logd.reshape(x.shape)


def spline_inverse(y: Array, kx: Array, ky: Array, dv: Array, bound: float):
    yf, kxf, kyf, dvf = _flatten(np.asarray(y, dtype=np.float64), kx, ky, dv)
    x, logd = kernels.spline_inverse(yf, kxf, kyf, dvf, bound)
    return x.reshape(y.shape), logd.reshape(y.shape)


# ---------------------------------------------------------------------------
# autodiff path (normalizing direction during training)


def _bin_index(knots: Array, values: Array) -> Array:
    num_bins = knots.shape[-1] - 1
    k = np.sum(knots[..., :-1] <= values[..., None], axis=-1) - 1
    return np.clip(k, 0, num_bins - 1)


def _gather_bin(kx: Node, ky: Node, dv: Node, k: Array):
    x0 = ad.take_last(kx, k)
    x1 = ad.take_last(kx, k + 1)
    y0 = ad.take_last(ky, k)
    y1 = ad.take_last(ky, k + 1)
    d0 = ad.take_last(dv, k)
    d1 = ad.take_last(dv, k + 1)
    return x0, x1, y0, y1, d0, d1


def _log_derivative(slope: Node, d0: Node, d1: Node, th: Node, den: Node) -> Node:
    omt = 1.0 - th
    num = ad.square(slope) * (d1 * ad.square(th) + 2.0 * slope * th * omt
                              + d0 * ad.square(omt))
    return ad.log(num) - 2.0 * ad.log(den)


def spline_inverse_ad(y: Node, kx: Node, ky: Node, dv: Node, bound: float):
    """Differentiable inverse spline; gradients flow into y and the knots.

    The bin assignment is taken from current values (piecewise constant, so
    it carries no gradient); out-of-range elements pass through unchanged.
    """
    inside = (y.value >= -bound) & (y.value <= bound)
    yc = ad.clip(y, -bound, bound)
    k = _bin_index(ky.value, yc.value)
    x0, x1, y0, y1, d0, d1 = _gather_bin(kx, ky, dv, k)
    h = x1 - x0
    height = y1 - y0
    slope = height / h
    t = yc - y0
    w = d1 + d0 - 2.0 * slope
    qa = height * (slope - d0) + t * w
    qb = height * d0 - t * w
    qc = -1.0 * slope * t
    disc = ad.square(qb) - 4.0 * qa * qc
    if np.any(disc.value[inside] < 0.0):
        raise ArithmeticError("negative discriminant in spline inversion")
    th = 2.0 * qc / (-1.0 * qb - ad.sqrt(ad.clip(disc, 0.0, np.inf)))
    den = slope + w * th * (1.0 - th)
    x = ad.where(inside, x0 + th * h, y)
    logd = ad.where(inside, -1.0 * _log_derivative(slope, d0, d1, th, den),
                    ad.constant(np.zeros_like(y.value)))
    return x, logd


def spline_forward_ad(x: Node, kx: Node, ky: Node, dv: Node, bound: float):
    """Differentiable forward spline (used in gradient checks)."""
    inside = (x.value >= -bound) & (x.value <= bound)
    xc = ad.clip(x, -bound, bound)
    k = _bin_index(kx.value, xc.value)
    x0, x1, y0, y1, d0, d1 = _gather_bin(kx, ky, dv, k)
    h = x1 - x0
    height = y1 - y0
    slope = height / h
    th = (xc - x0) / h
    omt = 1.0 - th
    den = slope + (d1 + d0 - 2.0 * slope) * th * omt
    y = y0 + height * (slope * ad.square(th) + d0 * th * omt) / den
    out = ad.where(inside, y, x)
    logd = ad.where(inside, _log_derivative(slope, d0, d1, th, den),
                    ad.constant(np.zeros_like(x.value)))
    return out, logd
