"""TruG-TGGM: a regression network with one truncated-Gaussian hidden layer.

    p(y, h | x) = N(y | W1 h + b1, s2 I) * N_[lower, upper](h | W0 x + b0, s2 I)

The clamped posterior p(h | x, y) is a correlated truncated Gaussian and is
approximated by a factorized mean-field distribution.  Gradients are ascent
directions on ``log p(y | x)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import truncnorm
from .trug import BoundaryDensities, TrugGrad, TrugParams, accumulate_boundary_grad, boundary_densities

DEFAULT_CYCLES = 10


@dataclass
class TggmModel:
    W0: np.ndarray  # (m, p)
    b0: np.ndarray
    W1: np.ndarray  # (q, m)
    b1: np.ndarray
    sigma2: float
    trug: TrugParams

    def __post_init__(self):
        self.W0 = np.asarray(self.W0, dtype=float)
        self.b0 = np.asarray(self.b0, dtype=float)
        self.W1 = np.asarray(self.W1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.sigma2 = float(self.sigma2)
        m, _ = self.W0.shape
        q = self.W1.shape[0]
        if self.b0.shape != (m,) or self.W1.shape != (q, m) or self.b1.shape != (q,):
            raise ValueError("inconsistent TGGM parameter shapes")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError("sigma2 must be positive")
        self.trug.bounds(m)

    @classmethod
    def init(cls, n_inputs: int, n_hidden: int, n_outputs: int, rng: np.random.Generator,
             trug: TrugParams | None = None, weight_var: float = 0.01, sigma2: float = 1.0) -> "TggmModel":
        sd = np.sqrt(weight_var)
        return cls(
            W0=rng.normal(0.0, sd, (n_hidden, n_inputs)), b0=np.zeros(n_hidden),
            W1=rng.normal(0.0, sd, (n_outputs, n_hidden)), b1=np.zeros(n_outputs),
            sigma2=sigma2, trug=trug if trug is not None else TrugParams.shared(0.0, np.inf),
        )

    @property
    def n_hidden(self) -> int:
        return self.W0.shape[0]

    def bounds(self):
        return self.trug.bounds(self.n_hidden)

    def prior_mean(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.W0.T + self.b0

    def copy(self) -> "TggmModel":
        return replace(self, W0=self.W0.copy(), b0=self.b0.copy(), W1=self.W1.copy(),
                       b1=self.b1.copy(), trug=self.trug.copy())


@dataclass
class MeanFieldState:
    q_mean: np.ndarray
    q_var: np.ndarray
    cycles_run: int
    base_mean: np.ndarray  # untruncated per-unit means of the last sweep
    base_var: np.ndarray


def predict(model: TggmModel, x) -> np.ndarray:
    """``E[y | x]``: the hidden layer acts through its truncated means."""
    mu = model.prior_mean(x)
    lower, upper = model.bounds()
    eh = truncnorm.trunc_mean(mu, model.sigma2, lower, upper)
    return eh @ model.W1.T + model.b1


def _mean_field(model: TggmModel, x, y, n_cycles: int, init: np.ndarray | None = None) -> MeanFieldState:
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    lower, upper = model.bounds()
    mu0 = model.prior_mean(x)
    W1 = model.W1
    norms = np.sum(W1 * W1, axis=0)  # (m,)
    prec = 1.0 + norms
    base_var = model.sigma2 / prec
    if init is None:
        q = truncnorm.trunc_mean(mu0, model.sigma2, lower, upper)
    else:
        q = np.array(np.broadcast_to(init, mu0.shape), dtype=float)
    qv = np.empty_like(q)
    base_mean = np.empty_like(q)
    resid = y - model.b1 - q @ W1.T  # (B, q)
    for _ in range(n_cycles):
        for j in range(model.n_hidden):
            w = W1[:, j]
            r = resid + np.outer(q[:, j], w)  # residual without unit j
            mj = (r @ w + mu0[:, j]) / prec[j]
            new_m, new_v = truncnorm.unit_moments(mj, base_var[j], lower[j], upper[j])
            resid = r - np.outer(new_m, w)
            q[:, j], qv[:, j], base_mean[:, j] = new_m, new_v, mj
    return MeanFieldState(q, qv, n_cycles, base_mean, np.broadcast_to(base_var, q.shape).copy())


def mean_field_posterior(model: TggmModel, x, y, n_cycles: int = DEFAULT_CYCLES,
                         init: np.ndarray | None = None) -> MeanFieldState:
    """Coordinate-ascent mean field for ``p(h | x, y)``, ascending unit order.

    ``x``/``y`` may be single vectors or batches; the sweeps are vectorized
    over the batch.  ``init`` warm-starts the means (prior means otherwise).
    """
    single = np.ndim(x) == 1
    st = _mean_field(model, x, y, n_cycles, init)
    if single:
        return MeanFieldState(st.q_mean[0], st.q_var[0], st.cycles_run, st.base_mean[0], st.base_var[0])
    return st


def ml_gradients(model: TggmModel, x_batch, y_batch, n_cycles: int = DEFAULT_CYCLES):
    """Ascent direction on mean ``log p(y | x)`` over the batch.

    Returns ``(grads, trug_grad)`` where ``grads`` has keys
    ``W0, b0, W1, b1, sigma2``.  The clamped phase uses mean-field moments
    with a diagonal second-moment correction; the free phase is exact.
    """
    x = np.atleast_2d(np.asarray(x_batch, dtype=float))
    y = np.atleast_2d(np.asarray(y_batch, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    n = x.shape[0]
    s2 = model.sigma2
    lower, upper = model.bounds()
    mu0 = model.prior_mean(x)
    st = _mean_field(model, x, y, n_cycles)
    q, qv = st.q_mean, st.q_var
    fm, fv = truncnorm.trunc_moments(mu0, s2, lower, upper)
    r = y - q @ model.W1.T - model.b1
    grads = {
        # E[(y - W1 h - b1) h'] with E[h h'] = q q' + diag(qv); the free phase is 0
        "W1": (r.T @ q - model.W1 * qv.sum(axis=0)) / (n * s2),
        "b1": r.mean(axis=0) / s2,
        "W0": (q - fm).T @ x / (n * s2),
        "b0": (q - fm).mean(axis=0) / s2,
    }
    # E||y - W1 h - b1||^2 under the factorized posterior
    clamped_out = np.sum(r * r, axis=1) + qv @ np.sum(model.W1 ** 2, axis=0)
    clamped_hid = np.sum((q - mu0) ** 2 + qv, axis=1)
    free_hid = np.sum((fm - mu0) ** 2 + fv, axis=1)
    free_out = y.shape[1] * s2
    grads["sigma2"] = np.mean(clamped_out + clamped_hid - free_out - free_hid) / (2.0 * s2 * s2)
    post = boundary_densities(model.trug, st.base_mean, st.base_var)
    prior = boundary_densities(model.trug, mu0, np.broadcast_to(s2, mu0.shape))
    return grads, accumulate_boundary_grad(model.trug, post, prior)


def ml_weight_grad(model, x_batch, y_batch, n_cycles: int = DEFAULT_CYCLES) -> dict:
    return ml_gradients(model, x_batch, y_batch, n_cycles)[0]


def ml_trunc_grad(model, x_batch, y_batch, n_cycles: int = DEFAULT_CYCLES) -> TrugGrad:
    return ml_gradients(model, x_batch, y_batch, n_cycles)[1]


def rmse(model: TggmModel, x_test, y_test, target_scale=1.0) -> float:
    """Root mean squared error of ``predict``.

    ``target_scale`` (per-output std of the training targets) converts
    standardized predictions back to original units; offsets cancel.
    """
    err = (predict(model, x_test) - np.atleast_2d(y_test)) * np.asarray(target_scale, dtype=float)
    return float(np.sqrt(np.mean(err * err)))


__all__ = ["BoundaryDensities", "MeanFieldState", "TggmModel", "ml_gradients", "ml_trunc_grad",
           "ml_weight_grad", "mean_field_posterior", "predict", "rmse"]
