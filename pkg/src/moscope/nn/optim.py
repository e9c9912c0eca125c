"""Adam and early stopping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params, grads, state: AdamState, cfg: OptimizerConfig, t: int) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if t != state.t + 1:
        raise ValueError(f"step index {t} does not follow {state.t}")
    for i, g in enumerate(grads):
        if not np.isfinite(g).all():
            raise NonFiniteGradientError(f"non-finite gradient in parameter {i} at step {t}")
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)
    state.t = t


class Adam:
    def __init__(self, params, cfg: OptimizerConfig = OptimizerConfig()):
        self.params = params
        self.cfg = cfg
        self.state = AdamState.zeros_like(params)

    def step(self, grads):
        adam_step(self.params, grads, self.state, self.cfg, self.state.t + 1)


@dataclass(frozen=True)
class EarlyStopConfig:
    patience: int = 10
    max_epochs: int = 200
    min_delta: float = 0.0

    def __post_init__(self):
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be >= 1")
        if self.min_delta < 0:
            raise ValueError("min_delta must be >= 0")


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True when it improved."""

    def __init__(self, cfg: EarlyStopConfig):
        self.cfg = cfg
        self.best = np.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch, val_loss):
        if val_loss < self.best - self.cfg.min_delta:
            self.best, self.best_epoch, self.wait = val_loss, epoch, 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self):
        return self.wait >= self.cfg.patience
