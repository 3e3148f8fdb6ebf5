"""Optimiser steps operating on named parameter tensors in place.

Both steps take the gradients dict produced by model.backward, keyed
exactly like ManeuverModelParams.tensors().
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CompatibilityError, ConfigError
from .params import ManeuverModelParams


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0


def init_adam_state(params: ManeuverModelParams) -> AdamState:
    """Zero moments shaped like every tensor of the model."""
    tensors = params.tensors()
    return AdamState(
        m={k: np.zeros_like(t) for k, t in tensors.items()},
        v={k: np.zeros_like(t) for k, t in tensors.items()},
        steps=0,
    )


def _check_grads(tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
    missing = sorted(set(tensors) - set(grads))
    if missing:
        raise CompatibilityError(f"gradients missing for tensors: {', '.join(missing)}")
    for key, tensor in tensors.items():
        if grads[key].shape != tensor.shape:
            raise CompatibilityError(
                f"gradient shape {grads[key].shape} does not match tensor "
                f"{key} of shape {tensor.shape}"
            )


def adam_step(
    params: ManeuverModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    t: int | None = None,
) -> None:
    """One bias-corrected Adam update applied in place.

    t is the 1-based step used for bias correction; when omitted the
    state counter advances and supplies it.
    """
    if t is None:
        state.steps += 1
        t = state.steps
    elif t < 1:
        raise ConfigError("adam step index t must be >= 1")
    else:
        state.steps = t
    tensors = params.tensors()
    _check_grads(tensors, grads)
    for key, tensor in tensors.items():
        g = grads[key]
        state.m[key] = beta1 * state.m[key] + (1.0 - beta1) * g
        state.v[key] = beta2 * state.v[key] + (1.0 - beta2) * (g * g)
        m_hat = state.m[key] / (1.0 - beta1**t)
        v_hat = state.v[key] / (1.0 - beta2**t)
        tensor -= lr * m_hat / (np.sqrt(v_hat) + eps)


def sgd_step(
    params: ManeuverModelParams,
    grads: dict[str, np.ndarray],
    lr: float,
) -> None:
    """Plain gradient descent update applied in place."""
    tensors = params.tensors()
    _check_grads(tensors, grads)
    for key, tensor in tensors.items():
        tensor -= lr * grads[key]
