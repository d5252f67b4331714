"""Adam with bias-corrected moments."""
from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        """Update every parameter in place from its ``.grad``."""
        missing = [p.name or f"#{k}" for k, p in enumerate(self.params) if p.grad is None]
        if missing:
            raise ValueError(f"no gradient for parameter(s): {', '.join(missing)}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            p.data -= update.astype(p.dtype, copy=False)


def adam_step(state: Adam, params=None, grads=None) -> None:
    """Functional form; ``grads`` (if given) are written into ``.grad`` first."""
    if params is not None:
        state_params = list(params)
        if [id(p) for p in state_params] != [id(p) for p in state.params]:
            raise ValueError("parameters do not match the optimizer state")
    if grads is not None:
        grads = list(grads)
        if len(grads) != len(state.params) or any(g is None for g in grads):
            raise ValueError("missing gradient for a parameter")
        for p, g in zip(state.params, grads):
            p.grad = np.asarray(g, dtype=p.dtype).reshape(p.shape)
    state.step()
