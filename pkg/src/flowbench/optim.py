"""Adaptive-moment gradient optimizer."""

from __future__ import annotations

import numpy as np

from .autodiff import Node


class Adam:
    """Standard Adam with bias correction.

    Defaults: beta1=0.9, beta2=0.999, eps=1e-7. The learning rate can be
    changed between steps (plateau schedule); it must stay positive.
    """

    def __init__(self, params: list[Node], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        """Apply one update from the gradients stored on the parameters.

        Raises FloatingPointError on a non-finite gradient so the caller can
        run its learning-rate retry logic.
        """
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / b1t
            v_hat = self.v[i] / b2t
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
