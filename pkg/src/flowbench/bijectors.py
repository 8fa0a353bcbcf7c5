"""Invertible layers: affine coupling, masked affine autoregressive, spline
coupling, spline autoregressive, and column permutations.

Every layer exposes three views of the same map:

* ``forward_np(x)``  -- generative direction, plain numpy, returns
  ``(y, log|det J_g|)`` per point. Autoregressive layers use the D-pass
  iterative procedure here.
* ``inverse_np(y)``  -- normalizing direction, plain numpy, single pass,
  returns ``(x, log|det J_f|)``.
* ``inverse_ad(y)``  -- normalizing direction on autodiff nodes, used to
  build the training graph.

Conventions: the untransformed block of a coupling layer is the first
``d = D // 2`` dimensions; autoregressive layers leave dimension 1 unchanged.

Conditioner output heads are zero-initialized, so every freshly built layer
(and hence a freshly built flow) is exactly the identity map: the affine
scale head is tanh-bounded with tanh(0) = 0, and the spline parameterization
maps all-zero raw outputs to uniform bins with unit derivatives. Training
therefore starts from the base density and deforms it, which is markedly
more stable than starting from a random invertible map.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import splines
from .autodiff import Node
from .nets import MLP, Head, made_masks

Array = np.ndarray


class Permutation:
    """Fixed column shuffle; volume preserving."""

    def __init__(self, perm: Array):
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(perm.size)):
            raise ValueError("not a permutation")
        self.dim = perm.size
        self.perm = perm
        self.inv_perm = np.empty_like(perm)
        self.inv_perm[perm] = np.arange(perm.size)

    def parameters(self):
        return []

    def reinitialize(self, rng):
        pass

    def forward_np(self, x: Array):
        return x[:, self.perm], np.zeros(x.shape[0])

    def inverse_np(self, y: Array):
        return y[:, self.inv_perm], np.zeros(y.shape[0])

    def inverse_ad(self, y: Node):
        return ad.permute_cols(y, self.inv_perm), ad.constant(np.zeros(y.value.shape[0]))


def swap_halves_perm(dim: int) -> Array:
    d = dim // 2
    return np.concatenate([np.arange(d, dim), np.arange(d)])


class AffineCoupling:
    """Scale-and-shift coupling: transformed block gets x*exp(s) + t with
    s, t conditioned on the untouched first half. The scale head has a tanh
    output (bounded log-scale), the shift head is linear."""

    def __init__(self, dim: int, hidden: list[int], rng: np.random.Generator):
        if dim < 2:
            raise ValueError("coupling needs dim >= 2")
        self.dim = dim
        self.split = dim // 2
        out = dim - self.split
        self.cond = MLP(
            [self.split, *hidden],
            [Head("s", out, "tanh"), Head("t", out, "linear")],
            rng,
            zero_heads=True,
        )

    def parameters(self):
        return self.cond.parameters()

    def reinitialize(self, rng):
        self.cond.reinitialize(rng)

    def forward_np(self, x: Array):
        d = self.split
        outs = self.cond.forward_np(x[:, :d])
        s, t = outs["s"], outs["t"]
        y = np.concatenate([x[:, :d], x[:, d:] * np.exp(s) + t], axis=1)
        return y, s.sum(axis=1)

    def inverse_np(self, y: Array):
        d = self.split
        outs = self.cond.forward_np(y[:, :d])
        s, t = outs["s"], outs["t"]
        x = np.concatenate([y[:, :d], (y[:, d:] - t) * np.exp(-s)], axis=1)
        return x, -s.sum(axis=1)

    def inverse_ad(self, y: Node):
        d = self.split
        y1 = y[:, :d]
        outs = self.cond.forward(y1)
        s, t = outs["s"], outs["t"]
        x2 = (y[:, d:] - t) * ad.exp(-s)
        x = ad.concat([y1, x2], axis=1)
        return x, -ad.nsum(s, axis=1)


class MaskedAffine:
    """Affine autoregressive layer (MADE-masked conditioner).

    Dimension 1 passes through; dimension i is scaled and shifted by heads
    that, thanks to the masks, depend only on dimensions 1..i-1 of the
    output-side variable. Density evaluation is a single pass; generation
    iterates D passes.
    """

    def __init__(self, dim: int, hidden: list[int], rng: np.random.Generator):
        if dim < 2:
            raise ValueError("autoregressive layer needs dim >= 2")
        self.dim = dim
        hidden_masks, out_mask, _ = made_masks(dim, hidden, 1, rng)
        self.net = MLP(
            [dim, *hidden],
            [Head("s", dim - 1, "tanh", out_mask), Head("t", dim - 1, "linear", out_mask)],
            rng,
            hidden_masks=hidden_masks,
            zero_heads=True,
        )

    def parameters(self):
        return self.net.parameters()

    def reinitialize(self, rng):
        self.net.reinitialize(rng)

    def _heads_np(self, y: Array):
        outs = self.net.forward_np(y)
        return outs["s"], outs["t"]

    def forward_np(self, x: Array):
        y = x.copy()
        s = t = None
        for _ in range(self.dim):
            s, t = self._heads_np(y)
            y = np.concatenate([x[:, :1], x[:, 1:] * np.exp(s) + t], axis=1)
        return y, s.sum(axis=1)

    def inverse_np(self, y: Array):
        s, t = self._heads_np(y)
        x = np.concatenate([y[:, :1], (y[:, 1:] - t) * np.exp(-s)], axis=1)
        return x, -s.sum(axis=1)

    def inverse_ad(self, y: Node):
        outs = self.net.forward(y)
        s, t = outs["s"], outs["t"]
        x = ad.concat([y[:, :1], (y[:, 1:] - t) * ad.exp(-s)], axis=1)
        return x, -ad.nsum(s, axis=1)


class CouplingRQS:
    """Rational-quadratic spline coupling layer."""

    def __init__(self, dim: int, hidden: list[int], num_bins: int, bound: float,
                 rng: np.random.Generator):
        if dim < 2:
            raise ValueError("coupling needs dim >= 2")
        self.dim = dim
        self.split = dim // 2
        self.num_bins = num_bins
        self.bound = float(bound)
        self.n_transformed = dim - self.split
        width = self.n_transformed * (3 * num_bins - 1)
        self.cond = MLP([self.split, *hidden], [Head("theta", width, "linear")],
                        rng, zero_heads=True)

    def parameters(self):
        return self.cond.parameters()

    def reinitialize(self, rng):
        self.cond.reinitialize(rng)

    def _params_np(self, cond_in: Array):
        theta = self.cond.forward_np(cond_in)["theta"]
        theta = theta.reshape(cond_in.shape[0], self.n_transformed, 3 * self.num_bins - 1)
        return splines.build_spline_params(theta, self.num_bins, self.bound)

    def forward_np(self, x: Array):
        d = self.split
        kx, ky, dv = self._params_np(x[:, :d])
        y2, logd = splines.spline_forward(x[:, d:], kx, ky, dv, self.bound)
        return np.concatenate([x[:, :d], y2], axis=1), logd.sum(axis=1)

    def inverse_np(self, y: Array):
        d = self.split
        kx, ky, dv = self._params_np(y[:, :d])
        x2, logd = splines.spline_inverse(y[:, d:], kx, ky, dv, self.bound)
        return np.concatenate([y[:, :d], x2], axis=1), logd.sum(axis=1)

    def inverse_ad(self, y: Node):
        d = self.split
        y1 = y[:, :d]
        theta = self.cond.forward(y1)["theta"]
        theta = ad.reshape(theta, (y.value.shape[0], self.n_transformed,
                                   3 * self.num_bins - 1))
        kx, ky, dv = splines.build_spline_params_ad(theta, self.num_bins, self.bound)
        x2, logd = splines.spline_inverse_ad(y[:, d:], kx, ky, dv, self.bound)
        return ad.concat([y1, x2], axis=1), ad.nsum(logd, axis=1)


class AutoregressiveRQS:
    """Rational-quadratic spline autoregressive layer (MADE-masked)."""

    def __init__(self, dim: int, hidden: list[int], num_bins: int, bound: float,
                 rng: np.random.Generator):
        if dim < 2:
            raise ValueError("autoregressive layer needs dim >= 2")
        self.dim = dim
        self.num_bins = num_bins
        self.bound = float(bound)
        group = 3 * num_bins - 1
        hidden_masks, out_mask, _ = made_masks(dim, hidden, group, rng)
        self.net = MLP(
            [dim, *hidden],
            [Head("theta", (dim - 1) * group, "linear", out_mask)],
            rng,
            hidden_masks=hidden_masks,
            zero_heads=True,
        )

    def parameters(self):
        return self.net.parameters()

    def reinitialize(self, rng):
        self.net.reinitialize(rng)

    def _params_np(self, y: Array):
        theta = self.net.forward_np(y)["theta"]
        theta = theta.reshape(y.shape[0], self.dim - 1, 3 * self.num_bins - 1)
        return splines.build_spline_params(theta, self.num_bins, self.bound)

    def forward_np(self, x: Array):
        y = x.copy()
        for _ in range(self.dim):
            kx, ky, dv = self._params_np(y)
            y2, _ = splines.spline_forward(x[:, 1:], kx, ky, dv, self.bound)
            y = np.concatenate([x[:, :1], y2], axis=1)
        kx, ky, dv = self._params_np(y)
        _, logd = splines.spline_forward(x[:, 1:], kx, ky, dv, self.bound)
        return y, logd.sum(axis=1)

    def inverse_np(self, y: Array):
        kx, ky, dv = self._params_np(y)
        x2, logd = splines.spline_inverse(y[:, 1:], kx, ky, dv, self.bound)
        return np.concatenate([y[:, :1], x2], axis=1), logd.sum(axis=1)

    def inverse_ad(self, y: Node):
        theta = self.net.forward(y)["theta"]
        theta = ad.reshape(theta, (y.value.shape[0], self.dim - 1,
                                   3 * self.num_bins - 1))
        kx, ky, dv = splines.build_spline_params_ad(theta, self.num_bins, self.bound)
        x2, logd = splines.spline_inverse_ad(y[:, 1:], kx, ky, dv, self.bound)
        return ad.concat([y[:, :1], x2], axis=1), ad.nsum(logd, axis=1)
