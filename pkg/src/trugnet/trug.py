"""TruG nonlinearity parameters shared by the RBM, TRBM and TGGM models."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import truncnorm

SHARED = "shared"
PER_UNIT = "per_unit"

#: Smallest gap kept between a unit's two truncation points after a step.
MIN_GAP = 1e-3


@dataclass
class TrugParams:
    """Truncation points for a layer of TruG units.

    In ``shared`` mode ``lower``/``upper`` have length 1 and broadcast over
    every unit; in ``per_unit`` mode they hold one entry per unit.  An
    infinite endpoint is never trained.
    """

    mode: str
    lower: np.ndarray
    upper: np.ndarray
    train_lower: bool = True
    train_upper: bool = True

    def __post_init__(self):
        if self.mode not in (SHARED, PER_UNIT):
            raise ValueError(f"unknown truncation mode {self.mode!r}")
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if self.mode == SHARED and self.lower.size != 1:
            raise ValueError("shared mode holds a single truncation pair")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("truncation points must not be NaN")
        if not np.all(self.lower < self.upper):
            raise ValueError("every unit needs lower < upper")

    @classmethod
    def shared(cls, lower=0.0, upper=1.0, **kw) -> "TrugParams":
        return cls(SHARED, [lower], [upper], **kw)

    @classmethod
    def per_unit(cls, n_units: int, lower=0.0, upper=1.0, **kw) -> "TrugParams":
        return cls(PER_UNIT, np.broadcast_to(lower, n_units), np.broadcast_to(upper, n_units), **kw)

    @property
    def n_params(self) -> int:
        return self.lower.size

    def bounds(self, n_units: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-unit ``(lower, upper)`` vectors of length ``n_units``."""
        if self.mode == PER_UNIT and self.lower.size != n_units:
            raise ValueError(f"per-unit parameters hold {self.lower.size} units, not {n_units}")
        return (np.broadcast_to(self.lower, (n_units,)), np.broadcast_to(self.upper, (n_units,)))

    def copy(self) -> "TrugParams":
        return replace(self, lower=self.lower.copy(), upper=self.upper.copy())


@dataclass
class TrugGrad:
    d_lower: np.ndarray
    d_upper: np.ndarray

    def __add__(self, other: "TrugGrad") -> "TrugGrad":
        return TrugGrad(self.d_lower + other.d_lower, self.d_upper + other.d_upper)

    def scaled(self, factor: float) -> "TrugGrad":
        return TrugGrad(self.d_lower * factor, self.d_upper * factor)

    @classmethod
    def zeros_like(cls, params: TrugParams) -> "TrugGrad":
        return cls(np.zeros_like(params.lower), np.zeros_like(params.upper))


class BoundaryDensities(NamedTuple):
    """Truncated-normal densities evaluated at the two endpoints, (batch, units)."""

    lower: np.ndarray
    upper: np.ndarray


def activate(params: TrugParams, z, sigma2):
    """Element-wise truncated-Gaussian mean and variance.

    ``z`` and ``sigma2`` broadcast against each other; the last axis indexes
    units.
    """
    z = np.asarray(z, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    try:
        shape = np.broadcast_shapes(z.shape, sigma2.shape)
    except ValueError as exc:
        raise ValueError(f"z {z.shape} and sigma2 {sigma2.shape} do not broadcast") from exc
    lower, upper = params.bounds(shape[-1] if shape else 1)
    return truncnorm.trunc_moments(z, sigma2, lower, upper)


def boundary_densities(params: TrugParams, z, sigma2) -> BoundaryDensities:
    """Densities ``p(h = lower)`` and ``p(h = upper)``; 0 at infinite endpoints."""
    z = np.asarray(z, dtype=float)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), z.shape)
    lower, upper = params.bounds(z.shape[-1])
    lower = np.broadcast_to(lower, z.shape)
    upper = np.broadcast_to(upper, z.shape)
    out = []
    for point, finite in ((lower, np.isfinite(lower)), (upper, np.isfinite(upper))):
        safe = np.where(finite, point, 0.0)
        dens = truncnorm.trunc_density_at(z, sigma2, lower, upper, safe)
        out.append(np.where(finite, dens, 0.0))
    return BoundaryDensities(*out)


def accumulate_boundary_grad(params: TrugParams, data: BoundaryDensities, model: BoundaryDensities) -> TrugGrad:
    """Truncation-point gradient from data-phase and model-phase boundary densities.

    Batch-averaged; in shared mode the per-unit contributions are summed.
    Endpoints that are infinite or frozen get a zero gradient.
    """
    for dens in (*data, *model):
        if np.any(np.asarray(dens) < 0):
            raise ValueError("boundary densities must be non-negative")
    d_upper = np.mean(np.atleast_2d(data.upper) - np.atleast_2d(model.upper), axis=0)
    d_lower = np.mean(np.atleast_2d(model.lower) - np.atleast_2d(data.lower), axis=0)
    if params.mode == SHARED:
        d_upper = d_upper.sum(keepdims=True)
        d_lower = d_lower.sum(keepdims=True)
    lower, upper = params.lower, params.upper
    d_lower = np.where(np.isfinite(lower) & params.train_lower, d_lower, 0.0)
    d_upper = np.where(np.isfinite(upper) & params.train_upper, d_upper, 0.0)
    return TrugGrad(d_lower, d_upper)


def clamp_after_step(params: TrugParams, min_gap: float = MIN_GAP) -> TrugParams:
    """Restore ``upper >= lower + min_gap`` after a gradient step.

    A violating pair is pushed apart symmetrically about its midpoint.  When
    only one endpoint may move (the other is infinite or frozen) only that
    one is moved.
    """
    lower = params.lower.copy()
    upper = params.upper.copy()
    bad = upper < lower + min_gap
    if np.any(bad):
        move_lo = bad & np.isfinite(lower) & params.train_lower
        move_hi = bad & np.isfinite(upper) & params.train_upper
        both = move_lo & move_hi
        mid = 0.5 * (lower + upper)
        lower = np.where(both, mid - 0.5 * min_gap, lower)
        upper = np.where(both, mid + 0.5 * min_gap, upper)
        upper = np.where(move_hi & ~both, lower + min_gap, upper)
        lower = np.where(move_lo & ~both, upper - min_gap, lower)
    return replace(params, lower=lower, upper=upper)
