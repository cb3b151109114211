"""First-order optimizers over lists of :class:`Tensor` parameters."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor


def clip_grad_norm(params: Sequence[Tensor], max_norm: float | None) -> float:
    """Rescale gradients in place so their joint L2 norm is at most
    ``max_norm``; returns the norm before clipping."""
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params)))
    if max_norm is not None and total > max_norm > 0:
        factor = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * factor
    return total


class SGD:
    def __init__(self, params: Sequence[Tensor], lr: float, clip: float | None = None):
        self.params = list(params)
        self.lr = float(lr)
        self.clip = clip

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        norm = clip_grad_norm(self.params, self.clip)
        for p in self.params:
            p.data = p.data - self.lr * p.grad
        return norm


class Adam:
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        clip: float | None = None,
    ):
        self.params = list(params)
        self.lr = float(lr)
        self.b1, self.b2 = betas
        self.eps = eps
        self.clip = clip
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        norm = clip_grad_norm(self.params, self.clip)
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return norm


def make_optimizer(name: str, params: Sequence[Tensor], lr: float, clip: float | None):
    if name == "adam":
        return Adam(params, lr, clip=clip)
    if name == "sgd":
        return SGD(params, lr, clip=clip)
    raise ValueError(f"unknown optimizer {name!r}")
