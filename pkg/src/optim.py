"""Adam optimizer over named parameter tensors."""
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    """Moment estimates and hyper-parameters of one Adam run."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


def adam_step(params: Dict[str, Tensor], state: AdamState) -> None:
    """
    Apply one bias-corrected Adam update in place.

    Gradients are left untouched; the caller resets them.

    Raises:
        ValueError: If any parameter has no gradient
    """
    missing = [name for name, p in params.items() if p.grad is None]
    if missing:
        raise ValueError(f"parameters without gradient: {', '.join(missing)}")

    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for name, p in params.items():
        g = p.grad
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        if m.shape != p.shape:
            raise ValueError(f"moment shape {m.shape} does not match parameter '{name}' {p.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.first_moment[name] = m
        state.second_moment[name] = v

        update = state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        p.data -= update.astype(p.dtype)


class Adam:
    """Thin stateful wrapper pairing a parameter set with its AdamState."""

    def __init__(self, params: Dict[str, Tensor], learning_rate: float = 1e-4, **kwargs):
        self.params = params
        self.state = AdamState(learning_rate=learning_rate, **kwargs)

    @property
    def learning_rate(self) -> float:
        return self.state.learning_rate

    @learning_rate.setter
    def learning_rate(self, value: float) -> None:
        if value <= 0:
            raise ValueError(f"learning_rate must be > 0, got {value}")
        self.state.learning_rate = value

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
