"""Conditioner networks: plain and MADE-masked multilayer perceptrons.

An :class:`MLP` is a stack of dense hidden layers (rectifier activation)
followed by one or more output heads, each with its own width and activation
(linear or tanh). Optional binary masks are applied multiplicatively to the
weight matrices, which is how the autoregressive property is enforced for
masked flows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node

Array = np.ndarray

_ACTIVATIONS = ("linear", "tanh")


@dataclass
class Head:
    name: str
    width: int
    activation: str = "linear"
    mask: Array | None = None  # (last_hidden, width), binary

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown head activation {self.activation!r}")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> Array:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class MLP:
    """Dense network with rectifier hidden layers and per-head output layers."""

    def __init__(
        self,
        widths: list[int],
        heads: list[Head],
        rng: np.random.Generator,
        hidden_masks: list[Array] | None = None,
        zero_heads: bool = False,
    ):
        if len(widths) < 1:
            raise ValueError("need at least the input width")
        self.widths = list(widths)
        self.heads = list(heads)
        if hidden_masks is not None and len(hidden_masks) != len(widths) - 1:
            raise ValueError("one hidden mask per hidden layer required")
        self.hidden_masks = hidden_masks
        self.zero_heads = zero_heads
        self.weights: list[Node] = []
        self.biases: list[Node] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            self.weights.append(ad.parameter(glorot_uniform(rng, fan_in, fan_out)))
            self.biases.append(ad.parameter(np.zeros(fan_out)))
        last = widths[-1]
        self.head_weights: dict[str, Node] = {}
        self.head_biases: dict[str, Node] = {}
        for head in heads:
            w = (np.zeros((last, head.width)) if zero_heads
                 else glorot_uniform(rng, last, head.width))
            self.head_weights[head.name] = ad.parameter(w)
            self.head_biases[head.name] = ad.parameter(np.zeros(head.width))

    def parameters(self) -> list[Node]:
        params = [*self.weights, *self.biases]
        for head in self.heads:
            params.append(self.head_weights[head.name])
            params.append(self.head_biases[head.name])
        return params

    def reinitialize(self, rng: np.random.Generator) -> None:
        """Redraw all weights in place (used by the nan-retry logic)."""
        for i, (fan_in, fan_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            self.weights[i].value = glorot_uniform(rng, fan_in, fan_out)
            self.biases[i].value = np.zeros(fan_out)
        last = self.widths[-1]
        for head in self.heads:
            self.head_weights[head.name].value = (
                np.zeros((last, head.width)) if self.zero_heads
                else glorot_uniform(rng, last, head.width))
            self.head_biases[head.name].value = np.zeros(head.width)

    # -- graph-building path (training) -------------------------------------

    def forward(self, x: Node) -> dict[str, Node]:
        if x.value.shape[-1] != self.widths[0]:
            raise ValueError(
                f"input width {x.value.shape[-1]} != first layer width {self.widths[0]}")
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if self.hidden_masks is not None:
                w = ad.mul(w, self.hidden_masks[i])
            h = ad.relu(ad.matmul(h, w) + b)
        outs: dict[str, Node] = {}
        for head in self.heads:
            w = self.head_weights[head.name]
            if head.mask is not None:
                w = ad.mul(w, head.mask)
            z = ad.matmul(h, w) + self.head_biases[head.name]
            outs[head.name] = ad.tanh(z) if head.activation == "tanh" else z
        return outs

    # -- evaluation-only path (sampling, diagnostics) ------------------------

    def forward_np(self, x: Array) -> dict[str, Array]:
        if x.shape[-1] != self.widths[0]:
            raise ValueError(
                f"input width {x.shape[-1]} != first layer width {self.widths[0]}")
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            wv = w.value if self.hidden_masks is None else w.value * self.hidden_masks[i]
            h = np.maximum(h @ wv + b.value, 0.0)
        outs: dict[str, Array] = {}
        for head in self.heads:
            wv = self.head_weights[head.name].value
            if head.mask is not None:
                wv = wv * head.mask
            z = h @ wv + self.head_biases[head.name].value
            outs[head.name] = np.tanh(z) if head.activation == "tanh" else z
        return outs


# ---------------------------------------------------------------------------
# MADE mask construction


def made_degrees(dim: int, hidden_widths: list[int], rng: np.random.Generator):
    """Degree assignment: inputs 1..D sequential, hidden degrees in 1..D-1."""
    if dim < 2:
        raise ValueError("autoregressive masking needs dim >= 2")
    input_deg = np.arange(1, dim + 1)
    hidden_degs = [rng.integers(1, dim, size=w) for w in hidden_widths]
    return input_deg, hidden_degs


def made_masks(dim: int, hidden_widths: list[int], out_group: int,
               rng: np.random.Generator):
    """Binary masks enforcing the strict autoregressive property.

    The output carries one group of ``out_group`` values per dimension
    2..dim; the group for dimension i (degree i-1) may depend only on inputs
    1..i-1. Hidden connections keep degree(prev) <= degree(next); output
    connections keep degree(hidden) <= degree(out).

    Returns (hidden_masks, out_mask, out_degrees_per_group).
    """
    input_deg, hidden_degs = made_degrees(dim, hidden_widths, rng)
    hidden_masks = []
    prev = input_deg
    for deg in hidden_degs:
        hidden_masks.append((prev[:, None] <= deg[None, :]).astype(np.float64))
        prev = deg
    group_deg = np.arange(1, dim)                      # degree i-1 for dimension i
    out_deg = np.repeat(group_deg, out_group)
    out_mask = (prev[:, None] <= out_deg[None, :]).astype(np.float64)
    return hidden_masks, out_mask, group_deg
