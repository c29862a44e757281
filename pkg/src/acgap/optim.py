"""Adam and plain SGD for flat parameter vectors."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

ASCEND = "ascend"
DESCEND = "descend"


@dataclass(frozen=True)
class AdamState:
    step_count: int
    first_moment: np.ndarray
    second_moment: np.ndarray
    alpha: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, dim: int, alpha: float, **kwargs) -> "AdamState":
        if alpha < 0:
            raise ValueError("learning rate must be non-negative")
        return cls(0, np.zeros(dim), np.zeros(dim), alpha, **kwargs)


def _sign(direction: str) -> float:
    if direction == ASCEND:
        return 1.0
    if direction == DESCEND:
        return -1.0
    raise ValueError(f"direction must be {ASCEND!r} or {DESCEND!r}")


def adam_step(state: AdamState, params, gradient, direction: str = DESCEND):
    """One bias-corrected Adam step; returns ``(new_state, new_params)``."""
    params = np.asarray(params, dtype=float)
    g = np.asarray(gradient, dtype=float)
    if params.shape != g.shape or g.shape != state.first_moment.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, gradient {g.shape}, "
                         f"state {state.first_moment.shape}")
    sign = _sign(direction)
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params + sign * state.alpha * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return replace(state, step_count=t, first_moment=m, second_moment=v), new_params


def sgd_step(params, gradient, alpha: float, direction: str = DESCEND) -> np.ndarray:
    return np.asarray(params, dtype=float) + _sign(direction) * alpha * np.asarray(gradient, dtype=float)


class Optimizer:
    """Owns the state for one parameter vector; ``kind`` is ``"adam"`` or ``"sgd"``."""

    def __init__(self, dim: int, alpha: float, direction: str, kind: str = "adam"):
        if kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {kind!r}")
        _sign(direction)
        self.kind = kind
        self.alpha = float(alpha)
        self.direction = direction
        self.state = AdamState.zeros(dim, alpha)

    def step(self, params, gradient) -> np.ndarray:
        if self.kind == "sgd":
            return sgd_step(params, gradient, self.alpha, self.direction)
        self.state, new = adam_step(self.state, params, gradient, self.direction)
        return new
