"""Adam optimizer over flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OptimizerError


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def for_size(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))

    def copy(self) -> "AdamState":
        return AdamState(m=self.m.copy(), v=self.v.copy(), step=self.step)


def adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new params and new state.

    Inputs are left untouched so a caller can discard the result to roll a
    step back. Non-finite gradients reject the update.
    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.ndim != 1:
        raise OptimizerError(
            f"params and grad must be equal-length vectors: {params.shape} vs {grad.shape}"
        )
    if state.m.shape != params.shape:
        raise OptimizerError("optimizer state does not match parameter vector")
    if not np.all(np.isfinite(grad)):
        raise OptimizerError("non-finite gradient, update rejected")
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m=m, v=v, step=t)
