"""Adadelta update rule: adaptive per-parameter steps without a learning rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdadeltaState:
    """Decaying accumulators of squared gradients and squared updates."""

    rho: float = 0.95
    eps: float = 1e-6
    acc_grad: dict = field(default_factory=dict)
    acc_delta: dict = field(default_factory=dict)


def adadelta_step(state: AdadeltaState, params: dict, grads: dict):
    """Apply one update in place to every parameter named in grads.

    E[g2] <- rho E[g2] + (1-rho) g^2
    delta  = -sqrt(E[dx2]+eps) / sqrt(E[g2]+eps) * g
    E[dx2] <- rho E[dx2] + (1-rho) delta^2
    """
    rho, eps = state.rho, state.eps
    for name, grad in grads.items():
        if name not in state.acc_grad:
            state.acc_grad[name] = np.zeros_like(params[name])
            state.acc_delta[name] = np.zeros_like(params[name])
        acc_g = state.acc_grad[name]
        acc_d = state.acc_delta[name]
        acc_g *= rho
        acc_g += (1.0 - rho) * grad * grad
        delta = -np.sqrt(acc_d + eps) / np.sqrt(acc_g + eps) * grad
        params[name] += delta
        acc_d *= rho
        acc_d += (1.0 - rho) * delta * delta
    return params, state
