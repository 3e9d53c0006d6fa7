"""Minibatch training loops shared by the three models.

Models are flattened into a dict of named arrays for the optimizer: plain
weights keep their field names, precisions and the noise variance are
updated as ``log_d`` / ``log_sigma2``, and truncation points appear as
``xi_lower`` / ``xi_upper``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import optim, rbm, tggm, trbm
from .trug import MIN_GAP, TrugGrad, clamp_after_step

ARRAYS = {
    "rbm": ("W", "b", "c"),
    "trbm": ("W1", "W2", "W3", "W4", "a", "b", "c"),
    "tggm": ("W0", "b0", "W1", "b1"),
}


def model_kind(model) -> str:
    if isinstance(model, rbm.RbmModel):
        return "rbm"
    if isinstance(model, trbm.TrbmModel):
        return "trbm"
    if isinstance(model, tggm.TggmModel):
        return "tggm"
    raise TypeError(f"not a trugnet model: {type(model).__name__}")


@dataclass
class TrainConfig:
    epochs: int = 1
    optimizer: optim.OptimizerConfig = field(default_factory=optim.OptimizerConfig)
    cd_k: int = 1
    persistent: bool = False
    n_cycles: int = tggm.DEFAULT_CYCLES
    filter_mode: str = trbm.SAMPLE
    train_precision: bool = True
    learn_sigma2: bool = True
    anneal_horizon: int = 0  # 0: the total number of steps

    def __post_init__(self):
        if self.epochs < 0 or self.cd_k < 1 or self.n_cycles < 1 or self.anneal_horizon < 0:
            raise ValueError("invalid training configuration")


def pack(model) -> dict:
    kind = model_kind(model)
    out = {k: getattr(model, k).copy() for k in ARRAYS[kind]}
    if kind == "tggm":
        out["log_sigma2"] = np.array(math.log(model.sigma2))
    else:
        out["log_d"] = np.log(model.d)
    out["xi_lower"] = model.trug.lower.copy()
    out["xi_upper"] = model.trug.upper.copy()
    return out


def unpack(model, params: dict, min_gap: float = MIN_GAP):
    """New model from ``params``; truncation points are re-separated if needed."""
    kind = model_kind(model)
    trug = model.trug.copy()
    trug.lower = np.asarray(params["xi_lower"], dtype=float).copy()
    trug.upper = np.asarray(params["xi_upper"], dtype=float).copy()
    trug = clamp_after_step(trug, min_gap)
    arrays = {k: np.asarray(params[k], dtype=float) for k in ARRAYS[kind]}
    if kind == "tggm":
        return replace(model, sigma2=float(np.exp(params["log_sigma2"])), trug=trug, **arrays)
    return replace(model, d=np.exp(params["log_d"]), trug=trug, **arrays)


def grads_to_params(model, cfg: TrainConfig, grads: dict, tgrad: TrugGrad) -> dict:
    """Map model-space gradients onto the packed parameter names."""
    kind = model_kind(model)
    out = {k: grads[k] for k in ARRAYS[kind]}
    if kind == "tggm":
        if cfg.learn_sigma2:
            out["log_sigma2"] = np.array(grads["sigma2"] * model.sigma2)
    elif cfg.train_precision:
        out["log_d"] = grads["d"] * model.d
    if model.trug.train_lower:
        out["xi_lower"] = tgrad.d_lower
    if model.trug.train_upper:
        out["xi_upper"] = tgrad.d_upper
    return out


def _n_examples(data) -> int:
    return len(data[0]) if isinstance(data, tuple) else len(data)


def _batch(data, idx):
    if isinstance(data, tuple):
        return tuple(np.asarray(d)[idx] for d in data)
    return np.asarray(data)[idx]


class Trainer:
    """Holds the model, optimizer state and (persistent) chains across epochs.

    ``data`` is a ``(N, n)`` array for the RBM, a ``(N, T, n)`` array for the
    TRBM and an ``(inputs, targets)`` pair for the TGGM.
    """

    def __init__(self, model, data, cfg: TrainConfig, rng: np.random.Generator):
        self.model = model
        self.kind = model_kind(model)
        self.data = data if self.kind == "tggm" else np.asarray(data, dtype=float)
        self.cfg = cfg
        self.rng = rng
        self.n = _n_examples(self.data)
        if self.n == 0:
            raise ValueError("empty training set")
        bs = cfg.optimizer.batch_size
        self.batches_per_epoch = max(1, math.ceil(self.n / bs))
        horizon = cfg.anneal_horizon or max(1, cfg.epochs * self.batches_per_epoch)
        sched = replace(cfg.optimizer.trunc_schedule, horizon=horizon)
        self.opt_cfg = replace(cfg.optimizer, trunc_schedule=sched)
        self.opt_state = optim.OptimizerState()
        self.chain = None
        self.epoch = 0

    def _gradients(self, batch):
        m, cfg = self.model, self.cfg
        if self.kind == "rbm":
            chain = None
            if cfg.persistent:
                if self.chain is None or self.chain.x.shape != batch.shape:
                    self.chain = rbm.GibbsChain(x=batch.copy())
                chain = self.chain
            grads, tgrad, final = rbm.cd_gradients(m, batch, cfg.cd_k, self.rng, chain=chain)
            if cfg.persistent:
                self.chain = final
            return grads, tgrad
        if self.kind == "trbm":
            return trbm.lower_bound_gradients(m, batch, cfg.cd_k, self.rng, filter_mode=cfg.filter_mode)
        return tggm.ml_gradients(m, batch[0], batch[1], cfg.n_cycles)

    def step(self, batch) -> None:
        grads, tgrad = self._gradients(batch)
        g = grads_to_params(self.model, self.cfg, grads, tgrad)
        params, self.opt_state = optim.step(self.opt_cfg, self.opt_state, pack(self.model), g)
        for name, val in params.items():
            # truncation points may legitimately sit at +-inf
            if name.startswith("xi_"):
                bad = np.isnan(val)
            elif name.startswith("log_"):
                with np.errstate(over="ignore", under="ignore"):
                    pos = np.exp(val)
                bad = ~np.isfinite(val) | (pos == 0) | ~np.isfinite(pos)
            else:
                bad = ~np.isfinite(val)
            if np.any(bad):
                raise optim.NumericalError(f"non-finite value in parameter {name!r}")
        self.model = unpack(self.model, params)

    def run_epoch(self) -> None:
        perm = self.rng.permutation(self.n)
        bs = self.opt_cfg.batch_size
        for start in range(0, self.n, bs):
            self.step(_batch(self.data, perm[start:start + bs]))
        self.epoch += 1

    def fit(self, on_epoch: Callable | None = None):
        for _ in range(self.cfg.epochs - self.epoch):
            self.run_epoch()
            if on_epoch is not None:
                on_epoch(self)
        return self.model


def train(model, data, cfg: TrainConfig, rng: np.random.Generator, on_epoch: Callable | None = None):
    """Train for ``cfg.epochs`` epochs and return the final model."""
    return Trainer(model, data, cfg, rng).fit(on_epoch)
