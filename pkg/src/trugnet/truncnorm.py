"""Univariate doubly truncated Gaussian kernel.

All functions broadcast over numpy arrays.  A distribution is described by
the mean ``z`` and variance ``sigma2`` of the untruncated Gaussian plus the
interval ``[lower, upper]``; either endpoint may be ``-inf`` / ``+inf``.

Mass and moment arithmetic is done on standardized endpoints
``a = (lower - z) / sigma`` and ``b = (upper - z) / sigma``.  Three regimes
are handled separately:

* ``a > 0``: the interval sits in the upper tail; it is reflected onto the
  lower tail (``a, b -> -b, -a``).
* ``b <= 0``: lower tail.  Every quantity is written in terms of the inverse
  Mills ratio ``phi(t) / Phi(t)`` so that nothing is formed as a ratio of
  two underflowing numbers.
* ``a <= 0 < b``: the interval contains the mode; the mass is a sum of two
  non-negative ``erf`` terms and there is no cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "GaussianBase",
    "SamplerError",
    "TruncationInterval",
    "log_partial_mass",
    "sample",
    "stable_ratio",
    "trunc_density_at",
    "trunc_log_density_at",
    "trunc_mean",
    "trunc_moments",
    "trunc_var",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_SQRT2 = np.sqrt(2.0)

#: Below this argument :func:`stable_ratio` switches to the algebraic form.
RATIO_SWITCH = -38.0

#: Intervals holding at least this much standard-normal mass are sampled by
#: plain rejection from the untruncated Gaussian (<= 1/0.3 proposals expected).
NAIVE_MASS = 0.3

#: Per-element cap on rejection proposals before :class:`SamplerError`.
MAX_PROPOSALS = 1_000_000


class SamplerError(RuntimeError):
    """A rejection sampler exceeded its proposal budget."""


@dataclass(frozen=True)
class TruncationInterval:
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if np.isnan(lo) or np.isnan(hi):
            raise ValueError("truncation points must not be NaN")
        if not lo < hi:
            raise ValueError(f"need lower < upper, got ({lo}, {hi})")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __iter__(self):
        yield self.lower
        yield self.upper

    @property
    def is_untruncated(self) -> bool:
        return np.isneginf(self.lower) and np.isposinf(self.upper)


@dataclass(frozen=True)
class GaussianBase:
    mean: float
    variance: float

    def __post_init__(self):
        if not np.isfinite(self.mean):
            raise ValueError("mean must be finite")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise ValueError("variance must be positive and finite")

    def __iter__(self):
        yield self.mean
        yield self.variance


def _log_norm_pdf(t):
    return -0.5 * t * t - _LOG_SQRT_2PI


def stable_ratio(z):
    """``phi(z) / Phi(z)`` with the algebraic tail form below ``z = -38``.

    For ``z < -38`` the ratio is replaced by ``(sqrt(z**2 + 4) - z) / 2``,
    whose relative error there is below 4.8e-7.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("stable_ratio requires finite arguments")
    deep = z < RATIO_SWITCH
    zs = np.where(deep, 0.0, z)
    direct = np.exp(_log_norm_pdf(zs) - special.log_ndtr(zs))
    gamma = 0.5 * (np.sqrt(z * z + 4.0) - z)
    out = np.where(deep, gamma, direct)
    return out[()] if out.ndim == 0 else out


def _mills(t):
    # exact phi(t)/Phi(t) for t <= 0 (erfcx is well scaled for positive args)
    return _SQRT_2_OVER_PI / special.erfcx(-t / _SQRT2)


def _log1mexp(x):
    """log(1 - exp(x)) for x <= 0."""
    return np.where(x > -np.log(2.0), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def _standard_terms(a, b):
    """Return ``(log_mass, A, B)`` for standardized endpoints.

    ``A = phi(a) / mass`` and ``B = phi(b) / mass``; an infinite endpoint
    contributes exactly 0.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a.shape
    a = a.ravel()
    b = b.ravel()
    log_mass = np.zeros(a.shape)
    A = np.zeros(a.shape)
    B = np.zeros(a.shape)

    upper_tail = a > 0
    lower_tail = b <= 0
    middle = ~(upper_tail | lower_tail)

    if np.any(middle):
        am, bm = a[middle], b[middle]
        mass = 0.5 * (special.erf(bm / _SQRT2) - special.erf(am / _SQRT2))
        log_mass[middle] = np.log(mass)
        fin_a = np.isfinite(am)
        fin_b = np.isfinite(bm)
        A[middle] = np.where(fin_a, np.exp(_log_norm_pdf(np.where(fin_a, am, 0.0))) / mass, 0.0)
        B[middle] = np.where(fin_b, np.exp(_log_norm_pdf(np.where(fin_b, bm, 0.0))) / mass, 0.0)

    tails = upper_tail | lower_tail
    if np.any(tails):
        flip = upper_tail[tails]
        lo = np.where(flip, -b[tails], a[tails])
        hi = np.where(flip, -a[tails], b[tails])
        # interval [lo, hi] with hi <= 0
        r_hi = _mills(hi)
        fin_lo = np.isfinite(lo)
        lo_s = np.where(fin_lo, lo, hi)
        r_lo = _mills(lo_s)
        # q = Phi(lo) / Phi(hi)
        log_q = np.where(
            fin_lo,
            0.5 * (hi - lo_s) * (hi + lo_s) + np.log(r_hi) - np.log(r_lo),
            -np.inf,
        )
        log_1mq = _log1mexp(log_q)
        lm = _log_norm_pdf(hi) - np.log(r_hi) + log_1mq
        b_term = r_hi * np.exp(-log_1mq)
        a_term = np.where(fin_lo, r_lo * np.exp(log_q - log_1mq), 0.0)
        log_mass[tails] = lm
        # undo the reflection: phi(lo) belongs to the original upper endpoint
        A[tails] = np.where(flip, b_term, a_term)
        B[tails] = np.where(flip, a_term, b_term)

    return log_mass.reshape(shape), A.reshape(shape), B.reshape(shape)


def _standardize(z, sigma2, lower, upper):
    z, sigma2, lower, upper = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (z, sigma2, lower, upper))
    )
    sigma = np.sqrt(sigma2)
    a = np.where(np.isneginf(lower), -np.inf, (lower - z) / sigma)
    b = np.where(np.isposinf(upper), np.inf, (upper - z) / sigma)
    return z, sigma, lower, upper, a, b


def _scalar(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


def log_partial_mass(z, sigma2, lower, upper):
    """``log(Phi(b) - Phi(a))``; exactly 0 for the untruncated interval."""
    *_, a, b = _standardize(z, sigma2, lower, upper)
    log_mass, _, _ = _standard_terms(a, b)
    return _scalar(log_mass)


def _assemble(z, sigma, lower, upper, a, b):
    _, A, B = _standard_terms(a, b)
    shift = A - B
    aA = np.where(np.isfinite(a), np.where(np.isfinite(a), a, 0.0) * A, 0.0)
    bB = np.where(np.isfinite(b), np.where(np.isfinite(b), b, 0.0) * B, 0.0)
    var_std = 1.0 + aA - bB - shift * shift

    mean = np.clip(z + sigma * shift, lower, upper)
    var = sigma * sigma * var_std
    width = upper - lower
    cap = np.minimum(sigma * sigma, np.where(np.isfinite(width), 0.25 * width * width, np.inf))
    var = np.clip(var, np.finfo(float).tiny, cap)
    return mean, var


def trunc_moments(z, sigma2, lower, upper):
    """Mean and variance of the truncated Gaussian, computed together."""
    z, sigma, lower, upper, a, b = _standardize(z, sigma2, lower, upper)
    mean, var = _assemble(z, sigma, lower, upper, a, b)
    return _scalar(mean), _scalar(var)


def unit_moments(z, sigma2: float, lower: float, upper: float):
    """``trunc_moments`` for a vector of means sharing one variance and interval.

    Skips broadcasting and validation; meant for tight per-unit loops.
    """
    z = np.asarray(z, dtype=float)
    sigma = float(np.sqrt(sigma2))
    a = (lower - z) / sigma if np.isfinite(lower) else np.full(z.shape, -np.inf)
    b = (upper - z) / sigma if np.isfinite(upper) else np.full(z.shape, np.inf)
    return _assemble(z, sigma, lower, upper, a, b)


def trunc_mean(z, sigma2, lower, upper):
    return trunc_moments(z, sigma2, lower, upper)[0]


def trunc_var(z, sigma2, lower, upper):
    return trunc_moments(z, sigma2, lower, upper)[1]


def trunc_log_density_at(z, sigma2, lower, upper, point):
    """Log density at ``point``; ``-inf`` outside ``[lower, upper]``."""
    point = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(point)):
        raise ValueError("density point must be finite")
    z, sigma, lower, upper, a, b = _standardize(z, sigma2, lower, upper)
    log_mass, _, _ = _standard_terms(a, b)
    t = (point - z) / sigma
    logp = _log_norm_pdf(t) - np.log(sigma) - log_mass
    inside = (point >= lower) & (point <= upper)
    return _scalar(np.where(inside, logp, -np.inf))


def trunc_density_at(z, sigma2, lower, upper, point):
    return _scalar(np.exp(trunc_log_density_at(z, sigma2, lower, upper, point)))


def _sample_standard(a, b, rng):
    """One draw per element from N(0, 1) truncated to [a, b] (1-d inputs)."""
    n = a.size
    out = np.empty(n)
    log_mass, _, _ = _standard_terms(a, b)
    naive = np.exp(log_mass) >= NAIVE_MASS

    flip = ~naive & (b <= 0)
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    straddle = ~naive & (lo < 0)
    lo_pos = np.maximum(lo, 0.0)
    rate = 0.5 * (lo_pos + np.sqrt(lo_pos * lo_pos + 4.0))
    expo = ~naive & ~straddle & ((hi - lo) > 1.0 / rate)
    unif = ~naive & ~expo
    # log of the envelope height for uniform proposals
    peak = np.where(straddle, 0.0, lo_pos)

    pending = np.ones(n, dtype=bool)
    proposals = 0
    while True:
        idx = np.flatnonzero(pending)
        if idx.size == 0:
            break
        proposals += 1
        if proposals > MAX_PROPOSALS:
            raise SamplerError(f"{idx.size} truncated-normal draws exceeded {MAX_PROPOSALS} proposals")

        sel = idx[naive[idx]]
        if sel.size:
            t = rng.standard_normal(sel.size)
            ok = (t >= a[sel]) & (t <= b[sel])
            out[sel[ok]] = t[ok]
            pending[sel[ok]] = False

        sel = idx[expo[idx]]
        if sel.size:
            lam = rate[sel]
            t = lo[sel] + rng.standard_exponential(sel.size) / lam
            u = rng.random(sel.size)
            ok = (t <= hi[sel]) & (np.log(u) <= -0.5 * (t - lam) ** 2)
            res = np.where(flip[sel[ok]], -t[ok], t[ok])
            out[sel[ok]] = res
            pending[sel[ok]] = False

        sel = idx[unif[idx]]
        if sel.size:
            t = lo[sel] + (hi[sel] - lo[sel]) * rng.random(sel.size)
            u = rng.random(sel.size)
            pk = peak[sel]
            ok = np.log(u) <= 0.5 * (pk * pk - t * t)
            res = np.where(flip[sel[ok]], -t[ok], t[ok])
            out[sel[ok]] = res
            pending[sel[ok]] = False
    return out


def sample(z, sigma2, lower, upper, rng: np.random.Generator, size=None):
    """Exact draws from the truncated Gaussian.

    ``size`` defaults to the broadcast shape of the parameters.  Plain
    rejection is used for intervals of mass >= ``NAIVE_MASS``; otherwise the
    interval is reflected onto the positive half-line and sampled by
    exponential-envelope rejection (wide tail intervals) or uniform-envelope
    rejection (narrow intervals).
    """
    z, sigma, lower, upper, a, b = _standardize(z, sigma2, lower, upper)
    if size is not None:
        shape = tuple(np.atleast_1d(size))
        z, sigma, lower, upper, a, b = (np.broadcast_to(v, shape) for v in (z, sigma, lower, upper, a, b))
    shape = z.shape
    t = _sample_standard(a.ravel().copy(), b.ravel().copy(), rng).reshape(shape)
    return _scalar(np.clip(z + sigma * t, lower, upper))
