"""Adam with decoupled weight decay, plus global gradient-norm clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .autodiff import Tensor
from .errors import ContractError


@dataclass
class AdamState:
    """Optimizer state; moment buffers are keyed by parameter name."""

    lr: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> None:
    """One update over all parameters, reading gradients from their buffers.

    Weight decay is decoupled: parameters shrink toward zero directly and the
    decay never enters the moment estimates.
    """
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"adam_step: parameter {name!r} has no gradient")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t

    for name, p in params.items():
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]

        if state.weight_decay != 0.0:
            p.data -= state.lr * state.weight_decay * p.data

        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


def clip_gradients_norm(params: Mapping[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``.

    Returns the factor applied (1.0 when no clipping happened). The tiny
    relative slack on the comparison makes a second application a no-op.
    """
    total = 0.0
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"clip_gradients_norm: parameter {name!r} has no gradient")
        total += float(np.sum(p.grad * p.grad))
    norm = math.sqrt(total)
    if norm <= max_norm * (1.0 + 1e-12):
        return 1.0
    factor = max_norm / norm
    for p in params.values():
        p.grad *= factor
    return factor
