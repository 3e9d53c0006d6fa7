"""Temporal TruG-RBM over binary frame sequences.

Each step is a TruG-RBM over ``(x_t, h_t)`` whose biases are shifted by the
previous frame and hidden state::

    visible logit  = W1 h_t + b - a/2 + W3 x_{t-1}
    hidden input   = W1' x_t + c + W2 x_{t-1} + W4 h_{t-1}

The ``a/2`` shift comes from the diagonal visible term, since ``x^2 = x`` on
binary units.  The first step uses the same ``W1, b, c, d, a`` and no history.
Sequences in a batch share their length ``T`` and are processed together.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from . import truncnorm
from .rbm import HiddenConditional, RbmModel, exact_gradients
from .trug import BoundaryDensities, TrugGrad, TrugParams, accumulate_boundary_grad, boundary_densities

SAMPLE = "sample"
MEAN = "mean"


@dataclass
class TrbmModel:
    W1: np.ndarray  # (n, m)
    W2: np.ndarray  # (m, n): x_{t-1} -> h_t
    W3: np.ndarray  # (n, n): x_{t-1} -> x_t
    W4: np.ndarray  # (m, m): h_{t-1} -> h_t
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    trug: TrugParams

    def __post_init__(self):
        for name in ("W1", "W2", "W3", "W4", "a", "b", "c", "d"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n, m = self.W1.shape
        want = {"W2": (m, n), "W3": (n, n), "W4": (m, m), "a": (n,), "b": (n,), "c": (m,), "d": (m,)}
        for name, shape in want.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if not np.all(self.d > 0):
            raise ValueError("hidden precisions d must be positive")
        self.trug.bounds(m)

    @classmethod
    def init(cls, n_visible: int, n_hidden: int, rng: np.random.Generator,
             trug: TrugParams | None = None, weight_var: float = 0.01) -> "TrbmModel":
        sd = np.sqrt(weight_var)
        n, m = n_visible, n_hidden
        return cls(
            W1=rng.normal(0.0, sd, (n, m)), W2=rng.normal(0.0, sd, (m, n)),
            W3=rng.normal(0.0, sd, (n, n)), W4=rng.normal(0.0, sd, (m, m)),
            a=np.zeros(n), b=np.zeros(n), c=np.zeros(m), d=np.ones(m),
            trug=trug if trug is not None else TrugParams.shared(0.0, 1.0),
        )

    @property
    def n_visible(self) -> int:
        return self.W1.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[1]

    def bounds(self):
        return self.trug.bounds(self.n_hidden)

    def copy(self) -> "TrbmModel":
        arrays = {k: getattr(self, k).copy() for k in ("W1", "W2", "W3", "W4", "a", "b", "c", "d")}
        return replace(self, trug=self.trug.copy(), **arrays)


class StepBiases(NamedTuple):
    """History-shifted biases of one step, one row per sequence."""

    vis: np.ndarray  # (B, n)
    hid: np.ndarray  # (B, m)


def step_biases(model: TrbmModel, x_prev=None, h_prev=None) -> StepBiases:
    """Effective visible and hidden biases given the history (``None`` at t = 1)."""
    vis = model.b - 0.5 * model.a
    hid = model.c
    if x_prev is not None:
        x_prev = np.asarray(x_prev, dtype=float)
        vis = vis + x_prev @ model.W3.T
        hid = hid + x_prev @ model.W2.T
    if h_prev is not None:
        hid = hid + np.asarray(h_prev, dtype=float) @ model.W4.T
    return StepBiases(np.atleast_2d(vis), np.atleast_2d(hid))


def step_rbm(model: TrbmModel, x_prev=None, h_prev=None) -> RbmModel:
    """The conditional TruG-RBM of one step for a single history."""
    bias = step_biases(model, x_prev, h_prev)
    if bias.vis.shape[0] != 1:
        raise ValueError("step_rbm takes a single history")
    return RbmModel(W=model.W1, b=bias.vis[0], c=bias.hid[0], d=model.d, trug=model.trug)


def hidden_filter_conditional(model: TrbmModel, x_prev, h_prev, x_t) -> HiddenConditional:
    """Per-unit truncated normal ``p(h_t | x_{t-1}, h_{t-1}, x_t)``; pass ``None`` history at t = 1."""
    bias = step_biases(model, x_prev, h_prev)
    act = np.asarray(x_t, dtype=float) @ model.W1 + bias.hid
    if np.ndim(x_t) == 1:
        act = act[0]
    lower, upper = model.bounds()
    return HiddenConditional(act / model.d, np.broadcast_to(1.0 / model.d, act.shape), lower, upper)


def _draw_hidden(cond: HiddenConditional, rng, mode):
    if mode == MEAN:
        return truncnorm.trunc_mean(*cond)
    return truncnorm.sample(*cond, rng)


def _as_batch(seqs) -> np.ndarray:
    """Stack sequences into a (B, T, n) float array."""
    if isinstance(seqs, np.ndarray) and seqs.ndim == 3:
        return seqs.astype(float, copy=False)
    if isinstance(seqs, np.ndarray) and seqs.ndim == 2:
        return seqs[None].astype(float)
    arr = [np.asarray(s, dtype=float) for s in seqs]
    if len({s.shape for s in arr}) > 1:
        raise ValueError("sequences in a batch must share their (T, n) shape")
    return np.stack(arr)


def filter_posterior_sample(model: TrbmModel, sequence, rng: np.random.Generator | None = None,
                            mode: str = SAMPLE) -> np.ndarray:
    """Forward filtering pass ``h_t ~ p(h_t | x_{t-1}, h_{t-1}, x_t)``.

    Accepts one ``(T, n)`` sequence or a ``(B, T, n)`` batch and returns
    hidden states of matching leading shape.  ``mode="mean"`` propagates the
    truncated means instead of samples and needs no generator.
    """
    if mode not in (SAMPLE, MEAN):
        raise ValueError(f"unknown filter mode {mode!r}")
    if mode == SAMPLE and rng is None:
        raise ValueError("sampling mode needs a random generator")
    single = np.asarray(sequence).ndim == 2
    X = _as_batch(sequence)
    B, T, _ = X.shape
    if T < 1:
        raise ValueError("sequence needs at least one frame")
    H = np.empty((B, T, model.n_hidden))
    x_prev = h_prev = None
    for t in range(T):
        base = hidden_filter_conditional(model, x_prev, h_prev, X[:, t])
        H[:, t] = _draw_hidden(base, rng, mode)
        x_prev, h_prev = X[:, t], H[:, t]
    return H[0] if single else H


class _Moments(NamedTuple):
    x: np.ndarray
    eh: np.ndarray
    eh2: np.ndarray
    boundary: BoundaryDensities


def _moments(model: TrbmModel, x, hid_bias) -> _Moments:
    act = x @ model.W1 + hid_bias
    mean, var = act / model.d, np.broadcast_to(1.0 / model.d, act.shape)
    lower, upper = model.bounds()
    m, v = truncnorm.trunc_moments(mean, var, lower, upper)
    return _Moments(x, m, v + m * m, boundary_densities(model.trug, mean, var))


def _cd_chain(model: TrbmModel, x0, bias: StepBiases, k: int, rng) -> np.ndarray:
    lower, upper = model.bounds()
    x = x0
    for _ in range(k):
        act = x @ model.W1 + bias.hid
        h = truncnorm.sample(act / model.d, np.broadcast_to(1.0 / model.d, act.shape), lower, upper, rng)
        p = expit(h @ model.W1.T + bias.vis)
        x = (rng.random(p.shape) < p).astype(float)
    return x


def _outer_mean(u, v):
    return u.T @ v / u.shape[0]


def _stat_diff(pos: _Moments, neg: _Moments, x_prev, h_prev) -> dict:
    n_vis, n_hid = pos.x.shape[1], pos.eh.shape[1]
    g = {
        "W1": _outer_mean(pos.x, pos.eh) - _outer_mean(neg.x, neg.eh),
        "a": -0.5 * np.mean(pos.x - neg.x, axis=0),
        "b": np.mean(pos.x - neg.x, axis=0),
        "c": np.mean(pos.eh - neg.eh, axis=0),
        "d": -0.5 * np.mean(pos.eh2 - neg.eh2, axis=0),
    }
    if x_prev is None:
        g["W2"] = np.zeros((n_hid, n_vis))
        g["W3"] = np.zeros((n_vis, n_vis))
    else:
        g["W2"] = _outer_mean(pos.eh - neg.eh, x_prev)
        g["W3"] = _outer_mean(pos.x - neg.x, x_prev)
    g["W4"] = np.zeros((n_hid, n_hid)) if h_prev is None else _outer_mean(pos.eh - neg.eh, h_prev)
    return g


def lower_bound_gradients(model: TrbmModel, batch, k: int, rng: np.random.Generator,
                          filter_mode: str = SAMPLE):
    """Ascent direction on the filtering lower bound, summed over steps.

    The history at every step is one filtering trajectory per sequence.  The
    data term uses closed-form moments at ``x_t``; the model term uses a CD-k
    chain started at ``x_t`` with the history held fixed.  Returns
    ``(weight_grads, trug_grad)`` averaged over sequences.
    """
    if k < 1:
        raise ValueError("CD needs k >= 1")
    X = _as_batch(batch)
    B, T, _ = X.shape
    if T < 2:
        raise ValueError("training sequences need T >= 2")
    H = filter_posterior_sample(model, X, rng, mode=filter_mode)
    grads = None
    tgrad = TrugGrad.zeros_like(model.trug)
    for t in range(T):
        x_prev = X[:, t - 1] if t > 0 else None
        h_prev = H[:, t - 1] if t > 0 else None
        bias = step_biases(model, x_prev, h_prev)
        bias = StepBiases(np.broadcast_to(bias.vis, (B, model.n_visible)),
                          np.broadcast_to(bias.hid, (B, model.n_hidden)))
        pos = _moments(model, X[:, t], bias.hid)
        x_neg = _cd_chain(model, X[:, t], bias, k, rng)
        neg = _moments(model, x_neg, bias.hid)
        g = _stat_diff(pos, neg, x_prev, h_prev)
        grads = g if grads is None else {name: grads[name] + g[name] for name in grads}
        tgrad = tgrad + accumulate_boundary_grad(model.trug, pos.boundary, neg.boundary)
    return grads, tgrad


def lower_bound_weight_grad(model, batch, k, rng, **kw) -> dict:
    return lower_bound_gradients(model, batch, k, rng, **kw)[0]


def lower_bound_trunc_grad(model, batch, k, rng, **kw) -> TrugGrad:
    return lower_bound_gradients(model, batch, k, rng, **kw)[1]


def exact_step_gradients(model: TrbmModel, x_prev, h_prev, x_t):
    """Exact gradient of ``log p(x_t | x_{t-1}, h_{t-1})`` for one history.

    The model term is enumerated over ``x_t``, so this is only for small
    ``n``.  ``x_prev``/``h_prev`` may be ``None`` for the first step.
    """
    rbm = step_rbm(model, x_prev, h_prev)
    g, tg = exact_gradients(rbm, np.atleast_2d(x_t))
    n, m = model.n_visible, model.n_hidden
    out = {"W1": g["W"], "a": -0.5 * g["b"], "b": g["b"], "c": g["c"], "d": g["d"],
           "W2": np.zeros((m, n)), "W3": np.zeros((n, n)), "W4": np.zeros((m, m))}
    if x_prev is not None:
        out["W2"] = np.outer(g["c"], x_prev)
        out["W3"] = np.outer(g["b"], x_prev)
    if h_prev is not None:
        out["W4"] = np.outer(g["c"], h_prev)
    return out, tg


def predict_sequence(model: TrbmModel, batch) -> np.ndarray:
    """``E[x_{t+1} | x_1..x_t]`` for every prefix; shape ``(B, T-1, n)``.

    History is filtered in mean mode.  The next hidden state's input drops
    the unknown ``x_{t+1}`` term.
    """
    X = _as_batch(batch)
    H = filter_posterior_sample(model, X, mode=MEAN)
    lower, upper = model.bounds()
    x_prev, h_prev = X[:, :-1], H[:, :-1]
    act = x_prev @ model.W2.T + h_prev @ model.W4.T + model.c
    eh = truncnorm.trunc_mean(act / model.d, np.broadcast_to(1.0 / model.d, act.shape), lower, upper)
    return expit(eh @ model.W1.T + x_prev @ model.W3.T + model.b - 0.5 * model.a)


def predict_next_frame(model: TrbmModel, history) -> np.ndarray:
    """Probability vector for the frame after ``history`` (a ``(t, n)`` matrix)."""
    history = np.atleast_2d(np.asarray(history, dtype=float))
    if history.shape[0] < 1:
        raise ValueError("history needs at least one frame")
    padded = np.vstack([history, np.zeros((1, history.shape[1]))])
    return predict_sequence(model, padded[None])[0, -1]


def prediction_error(model: TrbmModel, batch, normalize: bool = False) -> float:
    """Squared error of one-step predictions, summed over pixels of a frame.

    Averaged over sequences and predicted frames ``t = 2..T``.  With
    ``normalize`` the per-frame sum is divided by the number of pixels.
    """
    X = _as_batch(batch)
    if X.shape[1] < 2:
        raise ValueError("prediction error needs T >= 2")
    err = np.sum((predict_sequence(model, X) - X[:, 1:]) ** 2, axis=-1)
    val = float(err.mean())
    return val / X.shape[2] if normalize else val


def generate(model: TrbmModel, n_sequences: int, n_frames: int, rng: np.random.Generator,
             gibbs_steps: int = 30) -> np.ndarray:
    """Sample sequences by running ``gibbs_steps`` sweeps of each step's conditional RBM."""
    n = model.n_visible
    X = np.zeros((n_sequences, n_frames, n))
    x_prev = h_prev = None
    for t in range(n_frames):
        bias = step_biases(model, x_prev, h_prev)
        bias = StepBiases(np.broadcast_to(bias.vis, (n_sequences, n)),
                          np.broadcast_to(bias.hid, (n_sequences, model.n_hidden)))
        x0 = (rng.random((n_sequences, n)) < 0.5).astype(float) if x_prev is None else x_prev
        x = _cd_chain(model, x0, bias, gibbs_steps, rng)
        base = hidden_filter_conditional(model, x_prev, h_prev, x)
        h_prev = _draw_hidden(base, rng, SAMPLE)
        X[:, t], x_prev = x, x
    return X
