"""TruG-RBM: binary visibles, truncated-Gaussian hiddens.

Energy ``E(x, h) = 1/2 h' diag(d) h - x' W h - b' x - c' h`` on
``x in {0,1}^n`` and ``lower <= h <= upper``.  Gradients returned by this
module are ascent directions on the log-likelihood, i.e. derivatives of
``-E`` averaged under the appropriate conditionals.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logsumexp

from . import truncnorm
from .trug import BoundaryDensities, TrugGrad, TrugParams, accumulate_boundary_grad, boundary_densities

MAX_ENUM_VISIBLE = 20
_ENUM_CHUNK = 1 << 14


@dataclass
class RbmModel:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    trug: TrugParams

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        n, m = self.W.shape
        if self.b.shape != (n,) or self.c.shape != (m,) or self.d.shape != (m,):
            raise ValueError("inconsistent RBM parameter shapes")
        if not np.all(self.d > 0):
            raise ValueError("hidden precisions d must be positive")
        self.trug.bounds(m)

    @classmethod
    def init(cls, n_visible: int, n_hidden: int, rng: np.random.Generator,
             trug: TrugParams | None = None, weight_var: float = 0.01) -> "RbmModel":
        """Gaussian(0, weight_var) weights, zero biases, unit precisions, [0, 1] truncation."""
        return cls(
            W=rng.normal(0.0, np.sqrt(weight_var), size=(n_visible, n_hidden)),
            b=np.zeros(n_visible),
            c=np.zeros(n_hidden),
            d=np.ones(n_hidden),
            trug=trug if trug is not None else TrugParams.shared(0.0, 1.0),
        )

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    def bounds(self):
        return self.trug.bounds(self.n_hidden)

    def copy(self) -> "RbmModel":
        return replace(self, W=self.W.copy(), b=self.b.copy(), c=self.c.copy(),
                       d=self.d.copy(), trug=self.trug.copy())


@dataclass
class GibbsChain:
    x: np.ndarray
    h: np.ndarray | None = None
    step_count: int = 0


class HiddenConditional(NamedTuple):
    """Base Gaussian of each hidden unit before truncation."""

    mean: np.ndarray
    var: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def hidden_conditional(model: RbmModel, x) -> HiddenConditional:
    x = np.asarray(x, dtype=float)
    act = x @ model.W + model.c
    lower, upper = model.bounds()
    return HiddenConditional(act / model.d, np.broadcast_to(1.0 / model.d, act.shape), lower, upper)


def visible_conditional(model: RbmModel, h) -> np.ndarray:
    return expit(np.asarray(h, dtype=float) @ model.W.T + model.b)


def sample_hidden(model: RbmModel, x, rng: np.random.Generator) -> np.ndarray:
    cond = hidden_conditional(model, x)
    return truncnorm.sample(cond.mean, cond.var, cond.lower, cond.upper, rng)


def sample_visible(model: RbmModel, h, rng: np.random.Generator) -> np.ndarray:
    p = visible_conditional(model, h)
    return (rng.random(p.shape) < p).astype(float)


def gibbs_sweep(model: RbmModel, chain: GibbsChain, rng: np.random.Generator) -> GibbsChain:
    """One h | x then x | h alternation."""
    h = sample_hidden(model, chain.x, rng)
    x = sample_visible(model, h, rng)
    return GibbsChain(x=x, h=h, step_count=chain.step_count + 1)


class PhaseStats(NamedTuple):
    x: np.ndarray
    eh: np.ndarray
    eh2: np.ndarray
    boundary: BoundaryDensities


def phase_stats(model: RbmModel, x) -> PhaseStats:
    """Closed-form hidden moments and boundary densities under p(h | x)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    cond = hidden_conditional(model, x)
    mean, var = truncnorm.trunc_moments(cond.mean, cond.var, cond.lower, cond.upper)
    bd = boundary_densities(model.trug, cond.mean, cond.var)
    return PhaseStats(x, mean, var + mean * mean, bd)


def stats_gradient(pos: PhaseStats, neg: PhaseStats, per_example: bool = False) -> dict:
    """Difference of sufficient statistics of ``-E`` between two phases."""
    if per_example:
        return {
            "W": pos.x[:, :, None] * pos.eh[:, None, :] - neg.x[:, :, None] * neg.eh[:, None, :],
            "b": pos.x - neg.x,
            "c": pos.eh - neg.eh,
            "d": -0.5 * (pos.eh2 - neg.eh2),
        }
    n = pos.x.shape[0]
    return {
        "W": (pos.x.T @ pos.eh - neg.x.T @ neg.eh) / n,
        "b": np.mean(pos.x - neg.x, axis=0),
        "c": np.mean(pos.eh - neg.eh, axis=0),
        "d": -0.5 * np.mean(pos.eh2 - neg.eh2, axis=0),
    }


def run_chain(model: RbmModel, x0, k: int, rng: np.random.Generator) -> GibbsChain:
    chain = GibbsChain(x=np.asarray(x0, dtype=float))
    for _ in range(k):
        chain = gibbs_sweep(model, chain, rng)
    return chain


def cd_gradients(model: RbmModel, x_batch, k: int, rng: np.random.Generator,
                 chain: GibbsChain | None = None, per_example: bool = False):
    """CD-k weight and truncation-point gradients from a single set of chains.

    Chains start at the data unless a persistent ``chain`` is passed.
    Returns ``(weight_grads, trug_grad, final_chain)``.
    """
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    if x_batch.shape[0] == 0:
        raise ValueError("empty batch")
    if k < 1:
        raise ValueError("CD needs k >= 1")
    start = x_batch if chain is None else chain.x
    final = run_chain(model, start, k, rng)
    if chain is not None:
        final = replace(final, step_count=chain.step_count + k)
    pos = phase_stats(model, x_batch)
    neg = phase_stats(model, final.x)
    grads = stats_gradient(pos, neg, per_example=per_example)
    tgrad = accumulate_boundary_grad(model.trug, pos.boundary, neg.boundary)
    return grads, tgrad, final


def cd_weight_grad(model, x_batch, k, rng, **kw) -> dict:
    return cd_gradients(model, x_batch, k, rng, **kw)[0]


def cd_trunc_grad(model, x_batch, k, rng, **kw) -> TrugGrad:
    return cd_gradients(model, x_batch, k, rng, **kw)[1]


def hidden_log_integral(act, d, lower, upper, beta=1.0):
    """``log int_lower^upper exp(-beta (d h^2 / 2 - act h)) dh`` per unit."""
    prec = beta * d
    mean = act / d
    return (truncnorm.log_partial_mass(mean, 1.0 / prec, lower, upper)
            + 0.5 * np.log(2.0 * np.pi / prec) + 0.5 * beta * act * act / d)


def log_unnorm_prob(model: RbmModel, x) -> np.ndarray:
    """``log p*(x)``: the hidden units integrated out in closed form."""
    x = np.asarray(x, dtype=float)
    act = x @ model.W + model.c
    lower, upper = model.bounds()
    return x @ model.b + np.sum(hidden_log_integral(act, model.d, lower, upper), axis=-1)


def _enumerate_states(n: int):
    if n > MAX_ENUM_VISIBLE:
        raise ValueError(f"exact enumeration refused for n={n} > {MAX_ENUM_VISIBLE} visible units")
    total = 1 << n
    bits = 1 << np.arange(n - 1, -1, -1)
    for start in range(0, total, _ENUM_CHUNK):
        idx = np.arange(start, min(start + _ENUM_CHUNK, total))
        yield ((idx[:, None] & bits) > 0).astype(float)


def exact_log_partition(model: RbmModel) -> float:
    parts = [logsumexp(log_unnorm_prob(model, xs)) for xs in _enumerate_states(model.n_visible)]
    return float(logsumexp(parts))


def exact_log_prob(model: RbmModel, x) -> np.ndarray:
    return log_unnorm_prob(model, x) - exact_log_partition(model)


def exact_gradients(model: RbmModel, x_batch):
    """Exact log-likelihood gradient with the model phase enumerated.

    Returns ``(weight_grads, trug_grad)`` averaged over ``x_batch``.
    """
    pos = phase_stats(model, x_batch)
    log_z = exact_log_partition(model)
    acc = None
    for xs in _enumerate_states(model.n_visible):
        p = np.exp(log_unnorm_prob(model, xs) - log_z)
        st = phase_stats(model, xs)
        part = (xs.T @ (p[:, None] * st.eh), p @ xs, p @ st.eh, p @ st.eh2,
                p @ st.boundary.lower, p @ st.boundary.upper)
        acc = part if acc is None else tuple(u + v for u, v in zip(acc, part))
    neg_xeh, neg_x, neg_eh, neg_eh2, neg_bl, neg_bu = acc
    n = pos.x.shape[0]
    grads = {
        "W": pos.x.T @ pos.eh / n - neg_xeh,
        "b": pos.x.mean(axis=0) - neg_x,
        "c": pos.eh.mean(axis=0) - neg_eh,
        "d": -0.5 * (pos.eh2.mean(axis=0) - neg_eh2),
    }
    model_bd = BoundaryDensities(neg_bl[None, :], neg_bu[None, :])
    tgrad = accumulate_boundary_grad(model.trug, pos.boundary, model_bd)
    return grads, tgrad


def sample_fantasy(model: RbmModel, n_steps: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Final visible states of independent chains started from uniform noise."""
    x0 = (rng.random((n_samples, model.n_visible)) < 0.5).astype(float)
    return run_chain(model, x0, n_steps, rng).x
