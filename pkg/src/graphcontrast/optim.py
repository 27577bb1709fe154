"""Adam, gradient clipping, and the warmup/linear-decay schedule.

Parameters and gradients travel as name -> float64 array dicts. Weight
decay is the classic L2 form, added to the gradient before the moment
updates. All updates are elementwise, so results do not depend on how
parameters are grouped or flattened.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to peak_lr, then linear decay to zero at total_steps."""

    peak_lr: float
    warmup_steps: int
    total_steps: int

    def __post_init__(self):
        if self.peak_lr <= 0:
            raise ValueError(f"peak_lr must be positive, got {self.peak_lr}")
        if not 0 < self.warmup_steps <= self.total_steps:
            raise ValueError(
                f"need 0 < warmup_steps <= total_steps, got {self.warmup_steps}/{self.total_steps}")


def lr_at(schedule: LrSchedule, step: int) -> float:
    """Learning rate applied at a 0-based optimizer step."""
    if not 0 <= step <= schedule.total_steps:
        raise ValueError(f"step {step} outside [0, {schedule.total_steps}]")
    if step < schedule.warmup_steps:
        return schedule.peak_lr * (step + 1) / schedule.warmup_steps
    return schedule.peak_lr * (schedule.total_steps - step) / (schedule.total_steps - schedule.warmup_steps)


def global_norm(grads: dict) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most
    max_norm. Returns the pre-clip norm."""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m: dict
    v: dict
    step_count: int = 0

    @classmethod
    def init_like(cls, params: dict) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> None:
    """One bias-corrected Adam update, in place."""
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ValueError("params, grads, and optimizer state must share the same keys")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for k, p in params.items():
        g = grads[k]
        if weight_decay:
            g = g + weight_decay * p
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
