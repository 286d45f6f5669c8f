"""SGD, RMSProp and Adam.

`optimizer_step` is the whole update rule; `Optimizer` binds it to a list of
named parameters so training code can call `zero_grad()` / `step()`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Optional

import numpy as np

from app.core.errors import GradientError, ShapeError
from app.numeric.tensor import Tensor

OptimizerKind = Literal["sgd", "rmsprop", "adam"]


@dataclass
class OptimizerState:
    kind: OptimizerKind
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9
    epsilon: float = 1e-8
    step_count: int = 0
    # adam: first moment; rmsprop: unused
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    # adam: second moment; rmsprop: running mean of squared gradients
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def accumulators(self) -> dict[str, np.ndarray]:
        named = {f"m.{k}": v for k, v in self.first_moment.items()}
        named.update({f"v.{k}": v for k, v in self.second_moment.items()})
        return named


def optimizer_step(
    state: OptimizerState,
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, Optional[np.ndarray]],
) -> None:
    """Update `params` in place and advance `state.step_count` by one."""
    missing = [name for name in params if grads.get(name) is None]
    if missing:
        raise GradientError(f"missing gradient for parameter(s): {', '.join(missing)}")
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise ShapeError(f"gradient shape {grads[name].shape} does not match parameter {name} {p.shape}")

    t = state.step_count + 1
    lr = state.learning_rate
    for name, p in params.items():
        g = grads[name]
        if state.kind == "sgd":
            p -= lr * g
        elif state.kind == "rmsprop":
            v = state.second_moment.setdefault(name, np.zeros_like(p))
            v *= state.rho
            v += (1.0 - state.rho) * g * g
            p -= lr * g / (np.sqrt(v) + state.epsilon)
        elif state.kind == "adam":
            m = state.first_moment.setdefault(name, np.zeros_like(p))
            v = state.second_moment.setdefault(name, np.zeros_like(p))
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            m_hat = m / (1.0 - state.beta1 ** t)
            v_hat = v / (1.0 - state.beta2 ** t)
            p -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        else:
            raise ValueError(f"unknown optimizer kind {state.kind!r}")
    state.step_count = t


class Optimizer:
    def __init__(self, parameters: Iterable[tuple[str, Tensor]], state: OptimizerState):
        self.parameters = list(parameters)
        self.state = state

    def zero_grad(self) -> None:
        for _, p in self.parameters:
            p.grad = None

    def clip_grad_norm(self, max_norm: float) -> float:
        """Scale all gradients so their joint L2 norm is at most `max_norm`; returns the norm before scaling."""
        grads = [p.grad for _, p in self.parameters if p.grad is not None]
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > max_norm:
            scale = max_norm / norm
            for _, p in self.parameters:
                if p.grad is not None:
                    p.grad = p.grad * scale
        return norm

    def step(self) -> None:
        optimizer_step(
            self.state,
            {name: p.data for name, p in self.parameters},
            {name: p.grad for name, p in self.parameters},
        )
