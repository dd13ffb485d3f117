"""Huber loss, Adam and Polyak averaging."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HUBER_DELTA = 1.0


def huber_loss(pred, target, delta: float = HUBER_DELTA):
    """Elementwise Huber loss and its derivative with respect to ``pred``."""
    err = np.asarray(pred, dtype=float) - np.asarray(target, dtype=float)
    abs_err = np.abs(err)
    quadratic = abs_err <= delta
    loss = np.where(quadratic, 0.5 * err ** 2, delta * (abs_err - 0.5 * delta))
    grad = np.clip(err, -delta, delta)
    return loss, grad


@dataclass
class AdamState:
    lr: float = 0.0002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def ensure(self, params):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]


def adam_step(params, grads, state: AdamState, names=None) -> None:
    """One bias-corrected Adam update, in place on every array in ``params``."""
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            name = names[i] if names else f"#{i}"
            raise FloatingPointError(f"non-finite gradient in parameter {name} at Adam step {state.t + 1}")
    state.ensure(params)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    lr_t = state.lr * np.sqrt(1.0 - b2 ** state.t) / (1.0 - b1 ** state.t)
    eps_t = state.eps * np.sqrt(1.0 - b2 ** state.t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr_t * m / (np.sqrt(v) + eps_t)


def polyak_update(target_params, online_params, tau: float = 0.0005) -> None:
    for t, o in zip(target_params, online_params):
        if t.shape != o.shape:
            raise ValueError(f"polyak shape mismatch {t.shape} vs {o.shape}")
        t *= 1.0 - tau
        t += tau * o
