"""Adam optimizer with a linear-warmup + cosine-annealing learning rate."""
from __future__ import annotations

import numpy as np

from .autodiff import Node, NumericalError


def lr_at(step: int, total_steps: int, base_lr: float = 1e-3, min_lr: float = 1e-5,
          warmup_frac: float = 0.05) -> float:
    """Learning rate at ``step``: linear ramp from 0 to ``base_lr`` over the
    warmup window, then cosine decay reaching ``min_lr`` at ``total_steps``."""
    if step < 0:
        raise ValueError("step must be >= 0")
    warmup = max(1, int(round(warmup_frac * total_steps)))
    if step < warmup:
        return base_lr * step / warmup
    if step >= total_steps:
        return min_lr
    t = (step - warmup) / (total_steps - warmup)
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + np.cos(np.pi * t))


class Adam:
    """Adaptive-moment gradient descent over a fixed parameter list.

    Moment buffers are keyed by position, so the parameter list order must be
    stable across steps (and across checkpoint save/load).
    """

    def __init__(self, params: list[Node], total_steps: int, base_lr: float = 1e-3,
                 min_lr: float = 1e-5, warmup_frac: float = 0.05,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.total_steps = total_steps
        self.base_lr = base_lr
        self.min_lr = min_lr
        self.warmup_frac = warmup_frac
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def lr(self) -> float:
        return lr_at(self.step_count, self.total_steps, self.base_lr, self.min_lr,
                     self.warmup_frac)

    def step(self) -> None:
        """One update from the accumulated ``grad`` of every parameter.

        The i-th call uses the schedule at position i (1-based), so the final
        call of a run lands exactly on ``min_lr``.
        """
        self.step_count += 1
        t = self.step_count
        lr = self.lr()
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"NaN/Inf gradient in parameter {i} at step {t}")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            mhat = self.m[i] / (1 - self.beta1 ** t)
            vhat = self.v[i] / (1 - self.beta2 ** t)
            p.value = p.value - lr * mhat / (np.sqrt(vhat) + self.eps)

    def state(self) -> dict:
        return {
            "step_count": self.step_count,
            "m": [a.copy() for a in self.m],
            "v": [a.copy() for a in self.v],
        }

    def load_state(self, state: dict) -> None:
        self.step_count = int(state["step_count"])
        self.m = [np.array(a) for a in state["m"]]
        self.v = [np.array(a) for a in state["v"]]


def clip_global_norm(params: list[Node], max_norm: float) -> float:
    """Scale all gradients so their joint l2 norm is at most ``max_norm``."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm
