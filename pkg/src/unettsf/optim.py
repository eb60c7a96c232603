"""Adam with bias correction, one state record per parameter."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError


@dataclass
class AdamState:
    """Moment accumulators for one named parameter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    name: str = "param"

    @classmethod
    def for_param(cls, param: np.ndarray, name: str = "param") -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param), name=name)


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    """One update; mutates state in place and returns the new parameter.

    m_t = b1 m + (1-b1) g, v_t = b2 v + (1-b2) g^2, with the standard
    1/(1-b^t) bias corrections before the lr * m_hat / (sqrt(v_hat)+eps)
    step. With lr=0 the returned array is bitwise equal to the input.
    """
    if grad.shape != param.shape:
        raise TrainingError(
            f"gradient shape {grad.shape} does not match parameter "
            f"'{state.name}' shape {param.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise TrainingError(f"non-finite gradient for parameter '{state.name}'")
    state.step += 1
    t = state.step
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** t)
    v_hat = state.v / (1.0 - beta2 ** t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps)
