"""Adam optimizer and the stepped learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor

__all__ = ["adam_step", "Adam", "lr_at_epoch"]


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[list[np.ndarray], dict]:
    """One Adam update; ``params`` are modified in place.

    ``state`` starts as an empty dict and carries the step counter and the
    first/second moment accumulators between calls.
    """
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params but {len(grads)} grads")
    if not state:
        state["t"] = 0
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


class Adam:
    """Adam over a list of parameter Tensors."""

    def __init__(self, tensors: list[Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.tensors = tensors
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state: dict = {}

    def zero_grad(self):
        for t in self.tensors:
            t.grad = None

    def step(self, lr: float):
        grads = []
        for t in self.tensors:
            grads.append(np.zeros_like(t.data) if t.grad is None else t.grad)
        params = [t.data for t in self.tensors]
        adam_step(params, grads, self.state, lr, self.beta1, self.beta2, self.eps)


def lr_at_epoch(epoch: int, lr0: float = 1e-3, decay: float = 0.1, decay_every: int = 10) -> float:
    """Stepped schedule: lr0 * decay^(epoch // decay_every)."""
    if decay_every < 1:
        raise ValueError(f"decay_every must be >= 1, got {decay_every}")
    return lr0 * decay ** (epoch // decay_every)
