"""Annealed importance sampling for the TruG-RBM partition function.

The path runs from a base model with visible biases ``base_bias`` and no
visible-hidden coupling (``beta = 0``) to the target RBM (``beta = 1``)
through the geometric averages ``exp(-(1 - beta) E_A - beta E_B)``.  Both
hidden blocks integrate out in closed form, so chains only carry ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit, logsumexp

from . import truncnorm
from .rbm import RbmModel, hidden_log_integral, log_unnorm_prob


@dataclass
class AisConfig:
    n_temps: int = 10_000
    n_chains: int = 100
    schedule: np.ndarray | None = None
    base_bias: np.ndarray | None = None

    def __post_init__(self):
        if self.n_temps < 1 or self.n_chains < 1:
            raise ValueError("n_temps and n_chains must be positive")
        if self.schedule is not None:
            s = np.asarray(self.schedule, dtype=float)
            if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
                raise ValueError("schedule must increase strictly from 0 to 1")
            self.schedule = s
            self.n_temps = s.size - 1

    def betas(self) -> np.ndarray:
        if self.schedule is not None:
            return self.schedule
        return np.linspace(0.0, 1.0, self.n_temps + 1)

    def bias(self, n_visible: int) -> np.ndarray:
        if self.base_bias is None:
            return np.zeros(n_visible)
        return np.broadcast_to(np.asarray(self.base_bias, dtype=float), (n_visible,))


@dataclass
class AisEstimate:
    log_z: float
    log_weights: np.ndarray
    std_err: float
    log_z_base: float
    n_temps: int = 0

    @property
    def ess(self) -> float:
        """Effective sample size of the normalized importance weights."""
        lw = self.log_weights
        return float(np.exp(2 * logsumexp(lw) - logsumexp(2 * lw)))

    def record(self) -> dict:
        return {"K": self.n_temps, "M": int(self.log_weights.size), "log_z": self.log_z,
                "std_err": self.std_err, "ess": self.ess}


def base_bias_from_data(x, eps: float = 1e-3) -> np.ndarray:
    """Per-pixel logit of the (clipped) data marginals."""
    p = np.clip(np.mean(np.asarray(x, dtype=float), axis=0), eps, 1 - eps)
    return logit(p)


def _base_hidden_terms(model: RbmModel, weight: float) -> float:
    """Sum over units of the coupling-free hidden integral at inverse temperature ``weight``."""
    lower, upper = model.bounds()
    return float(np.sum(hidden_log_integral(np.zeros(model.n_hidden), model.d, lower, upper, weight)))


def base_log_partition(config: AisConfig, model: RbmModel) -> float:
    bias = config.bias(model.n_visible)
    return float(np.sum(np.logaddexp(0.0, bias))) + _base_hidden_terms(model, 1.0)


def intermediate_unnorm_log_prob(config: AisConfig, model: RbmModel, beta: float, x) -> np.ndarray:
    """``log p*_beta(x)`` with both hidden blocks integrated out.

    At ``beta = 0`` the target block is absent, at ``beta = 1`` the base
    block is absent, so the endpoints are exactly the base and target models.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    bias = config.bias(model.n_visible)
    if beta == 1.0:
        return log_unnorm_prob(model, x)
    out = (1.0 - beta) * (x @ bias) + beta * (x @ model.b)
    out = out + _base_hidden_terms(model, 1.0 - beta)
    if beta > 0.0:
        lower, upper = model.bounds()
        act = x @ model.W + model.c
        out = out + np.sum(hidden_log_integral(act, model.d, lower, upper, beta), axis=-1)
    return out


class _Path:
    """x-dependent part of ``log p*_beta`` with the x-free constants split off.

    Splitting off the constants makes every weight increment exactly zero
    when target and base coincide.  Summed along the path the constants
    telescope to zero because the base shares ``d`` and the truncation with
    the target.
    """

    def __init__(self, config: AisConfig, model: RbmModel):
        self.model = model
        self.bias = config.bias(model.n_visible)
        self.lower, self.upper = model.bounds()
        self.zero = np.zeros(model.n_hidden)
        self._free = (None, 0.0)  # x-free integral for the last beta seen

    def _free_term(self, beta: float) -> np.ndarray:
        if self._free[0] != beta:
            self._free = (beta, hidden_log_integral(self.zero, self.model.d, self.lower, self.upper, beta))
        return self._free[1]

    def log_f(self, beta: float, x) -> np.ndarray:
        sa = x @ self.bias
        out = sa + beta * (x @ self.model.b - sa)
        if beta > 0.0:
            act = x @ self.model.W + self.model.c
            d = self.model.d
            coupled = hidden_log_integral(act, d, self.lower, self.upper, beta)
            out = out + np.sum(coupled - self._free_term(beta), axis=-1)
        return out

    def step(self, beta: float, x, rng: np.random.Generator):
        """One transition leaving p_beta(x) invariant."""
        m = self.model
        act = x @ m.W + m.c
        h = truncnorm.sample(act / m.d, 1.0 / (beta * m.d), self.lower, self.upper, rng)
        p = expit((1.0 - beta) * self.bias + beta * (h @ m.W.T + m.b))
        return (rng.random(p.shape) < p).astype(float)


def run_ais(config: AisConfig, model: RbmModel, rng: np.random.Generator) -> AisEstimate:
    betas = config.betas()
    path = _Path(config, model)
    p0 = expit(path.bias)
    x = (rng.random((config.n_chains, model.n_visible)) < p0).astype(float)
    log_w = np.zeros(config.n_chains)
    prev = path.log_f(betas[0], x)
    for k in range(1, betas.size):
        cur = path.log_f(betas[k], x)
        log_w += cur - prev
        if k < betas.size - 1:
            x = path.step(betas[k], x, rng)
            prev = path.log_f(betas[k], x)
    # The split-off constants telescope to (target block, beta=1, no coupling)
    # minus (base block, beta=0), which are the same integral: nothing to add.
    log_za = base_log_partition(config, model)
    m = log_w.size
    log_mean = float(logsumexp(log_w) - np.log(m))
    w = np.exp(log_w - log_w.max())
    rel_sd = np.std(w, ddof=1) / np.mean(w) if m > 1 else np.inf
    return AisEstimate(log_z=log_za + log_mean, log_weights=log_w,
                       std_err=float(rel_sd / np.sqrt(m)), log_z_base=log_za,
                       n_temps=betas.size - 1)


@dataclass
class TestLogProb:
    per_example: np.ndarray
    mean: float
    estimates: list

    @property
    def log_z(self) -> float:
        return float(np.mean([e.log_z for e in self.estimates]))

    @property
    def std_err(self) -> float:
        """Spread of the AIS log-partition estimate (shared by every example)."""
        if len(self.estimates) > 1:
            zs = np.array([e.log_z for e in self.estimates])
            return float(np.std(zs, ddof=1) / np.sqrt(zs.size))
        return self.estimates[0].std_err


def test_log_prob(config: AisConfig, model: RbmModel, x_test, rng: np.random.Generator,
                  n_runs: int = 1) -> TestLogProb:
    """Average test log-probability with ``log Z`` averaged over ``n_runs`` AIS runs."""
    estimates = [run_ais(config, model, rng) for _ in range(n_runs)]
    log_z = float(np.mean([e.log_z for e in estimates]))
    per = log_unnorm_prob(model, np.atleast_2d(x_test)) - log_z
    return TestLogProb(per_example=per, mean=float(per.mean()), estimates=estimates)


test_log_prob.__test__ = False  # keep pytest from collecting it
TestLogProb.__test__ = False
