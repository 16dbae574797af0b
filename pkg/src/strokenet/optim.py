"""Named parameters and SGD with classical momentum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.0001
    momentum: float = 0.5
    epochs: int = 2000

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0,1), got {self.momentum}")
        if not (isinstance(self.epochs, int) and self.epochs >= 0):
            raise ValueError(f"epochs must be a nonnegative integer, got {self.epochs}")

    def to_dict(self) -> dict:
        return {"learning_rate": self.learning_rate, "momentum": self.momentum,
                "epochs": self.epochs}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        return cls(**d)


class Parameter:
    """A named, gradient-tracked tensor plus its momentum buffer."""

    __slots__ = ("name", "value", "velocity")

    def __init__(self, name: str, value):
        self.name = name
        self.value = value if isinstance(value, Tensor) else Tensor(value)
        self.value.requires_grad = True
        self.velocity = np.zeros_like(self.value.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={list(self.value.shape)})"


def sgd_step(params, cfg: OptimizerConfig) -> None:
    """v <- momentum*v + g; w <- w - lr*v (classical momentum)."""
    for p in params:
        g = p.value.grad
        if g is None:
            g = np.zeros_like(p.value.data)
        p.velocity = cfg.momentum * p.velocity + g
        p.value.data = p.value.data - cfg.learning_rate * p.velocity


def zero_grads(params) -> None:
    for p in params:
        p.value.zero_grad()
