"""SGD with momentum and the cosine learning-rate schedule."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor


def sgd_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
             lr: float, momentum: float) -> None:
    """In-place update: v <- momentum*v + g; p <- p - lr*v."""
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    if param.shape != grad.shape:
        raise ValueError(f"param shape {param.shape} does not match grad shape {grad.shape}")
    velocity *= momentum
    velocity += grad
    param -= lr * velocity


def cosine_lr(step: int, total: int, lr0: float) -> float:
    """Half-cosine decay from lr0 at step 0 to 0 at step == total."""
    if total <= 0:
        raise ValueError(f"total steps must be positive, got {total}")
    t = min(max(step, 0), total)
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total))


class MomentumSGD:
    """Momentum SGD over a fixed list of parameter tensors."""

    def __init__(self, params: list[Tensor], momentum: float = 0.9):
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.params = list(params)
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float) -> None:
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            sgd_step(p.data, p.grad, v, lr, self.momentum)
