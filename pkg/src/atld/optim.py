"""Plain optimizers over requires-grad leaf tensors.

Both read ``leaf.grad`` as left by the last backward pass and mutate
``leaf.data`` in place. State (momentum/moment buffers) is exposed as named
arrays so training can checkpoint and resume exactly.
"""

from __future__ import annotations

import numpy as np

from atld.tensor import Tensor


class MomentumSGD:
    """SGD with classical momentum and L2 weight decay."""

    def __init__(self, params: list[Tensor], lr: float, momentum: float = 0.9, weight_decay: float = 5e-4):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data
            v *= self.momentum
            v += g
            p.data = p.data - self.lr * v

    def state_dict(self) -> dict[str, np.ndarray]:
        return {f"moment.{p.name}": v.copy() for p, v in zip(self.params, self.velocity)}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for i, p in enumerate(self.params):
            self.velocity[i] = np.asarray(state[f"moment.{p.name}"], dtype=np.float64).reshape(p.shape)


class Adam:
    """Adam with bias correction; used where self-tuning step sizes matter."""

    def __init__(
        self,
        params: list[Tensor],
        lr: float = 1e-2,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad**2
            p.data = p.data - self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
