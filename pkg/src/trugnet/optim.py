"""Gradient-ascent optimizers with a separate annealed rate for truncation points."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SGD_MOMENTUM = "sgd-momentum"
RMSPROP = "rmsprop"
RMSPROP_EPS = 1e-8


class NumericalError(FloatingPointError):
    """A non-finite value showed up in a gradient or parameter."""


@dataclass
class AnnealSchedule:
    start: float = 1e-4
    end: float = 1e-6
    horizon: int = 1

    def __post_init__(self):
        if self.start <= 0 or self.end <= 0:
            raise ValueError("annealed rates must be positive")
        if self.end > self.start:
            raise ValueError("annealing must not increase the rate")
        if self.horizon < 1:
            raise ValueError("annealing horizon must be >= 1")


def anneal_rate(schedule: AnnealSchedule, step: int) -> float:
    """Geometric interpolation from ``start`` to ``end`` over ``horizon`` steps."""
    if step < 0:
        raise ValueError("step must be non-negative")
    frac = min(step / schedule.horizon, 1.0)
    return schedule.start * (schedule.end / schedule.start) ** frac


@dataclass
class OptimizerConfig:
    kind: str = RMSPROP
    learning_rate: float = 1e-4
    decay: float = 0.95  # RMSprop delay, or momentum for SGD
    batch_size: int = 100
    trunc_schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    trunc_keys: tuple = ("xi_lower", "xi_upper")

    def __post_init__(self):
        if self.kind not in (SGD_MOMENTUM, RMSPROP):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.decay < 1.0:
            raise ValueError("decay/momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


@dataclass
class OptimizerState:
    accum: dict = field(default_factory=dict)
    step: int = 0


def step(config: OptimizerConfig, state: OptimizerState, params: dict, grads: dict):
    """Apply one ascent step to every parameter that has a gradient.

    Returns new ``(params, state)``; the inputs are not modified.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name!r}")
    trunc_rate = anneal_rate(config.trunc_schedule, state.step)
    new_params = dict(params)
    accum = dict(state.accum)
    for name, g in grads.items():
        g = np.asarray(g, dtype=float)
        theta = np.asarray(params[name], dtype=float)
        if theta.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name!r} {theta.shape}")
        rate = trunc_rate if name in config.trunc_keys else config.learning_rate
        prev = accum.get(name, np.zeros_like(g))
        if config.kind == SGD_MOMENTUM:
            v = config.decay * prev + g
            delta = rate * v
        else:
            v = config.decay * prev + (1.0 - config.decay) * g * g
            delta = rate * g / np.sqrt(v + RMSPROP_EPS)
        accum[name] = v
        # infinite truncation points have zero gradient and stay put
        new_params[name] = np.where(np.isfinite(theta), theta + delta, theta)
    return new_params, OptimizerState(accum=accum, step=state.step + 1)
