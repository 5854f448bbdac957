"""
Scaling fits for oracle calls and peak probabilities.

All power-law fits use base-2 logarithms: ``log2(value) = intercept + slope*log2(N)``.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from fractal_search.core.errors import FitError
from fractal_search.core.lattice import hausdorff_dimension, spectral_dimension

logger = logging.getLogger(__name__)

MIN_POWER_LAW_POINTS = 3
MIN_DECAY_POINTS = 4


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through ``(log2 N, log2 value)``."""

    slope: float
    intercept: float
    rms_err: float
    n_points: int
    fit_range: Tuple[int, ...] = ()
    systematic_err: Optional[float] = None
    intercept_err: Optional[float] = None

    @property
    def prefactor(self) -> float:
        return 2.0 ** self.intercept

    def predict(self, n: float) -> float:
        return self.prefactor * n ** self.slope

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "rms": self.rms_err,
            "systematic_err": self.systematic_err,
            "intercept_err": self.intercept_err,
            "range": list(self.fit_range),
            "n_points": self.n_points,
            "prefactor": self.prefactor,
        }


def _sorted_points(points: Sequence[Tuple[float, float]]) -> np.ndarray:
    data = np.asarray(sorted((float(x), float(y)) for x, y in points), dtype=np.float64)
    return data.reshape(-1, 2)


def fit_power_law(
    points: Sequence[Tuple[float, float]], fit_range: Sequence[int] = ()
) -> ScalingFit:
    """
    Ordinary least squares of ``log2(value)`` on ``log2(N)``.

    Points are sorted first, so the result does not depend on input order.

    Raises:
        FitError: fewer than three points, or a non-positive coordinate.
    """
    data = _sorted_points(points)
    if data.shape[0] < MIN_POWER_LAW_POINTS:
        raise FitError(f"power-law fit needs at least {MIN_POWER_LAW_POINTS} points, got {data.shape[0]}")
    if (data <= 0).any():
        raise FitError("power-law fit needs positive N and values")

    x, y = np.log2(data[:, 0]), np.log2(data[:, 1])
    design = np.column_stack([np.ones_like(x), x])
    (intercept, slope), *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - (intercept + slope * x)
    return ScalingFit(
        slope=float(slope),
        intercept=float(intercept),
        rms_err=float(np.sqrt(np.mean(residual ** 2))),
        n_points=int(data.shape[0]),
        fit_range=tuple(fit_range),
    )


@dataclass(frozen=True)
class SystematicError:
    slope: float
    intercept: float
    prefactor: float


def systematic_error(fit_full: ScalingFit, fit_trimmed: ScalingFit) -> SystematicError:
    """Differences between fits over two ranges, used as the error on the asymptotic values."""
    return SystematicError(
        slope=abs(fit_full.slope - fit_trimmed.slope),
        intercept=abs(fit_full.intercept - fit_trimmed.intercept),
        prefactor=abs(fit_full.prefactor - fit_trimmed.prefactor),
    )


def with_systematic(fit: ScalingFit, other: ScalingFit) -> ScalingFit:
    err = systematic_error(fit, other)
    return replace(fit, systematic_err=err.slope, intercept_err=err.intercept)


def exponent_relation_check(a: float, b: float) -> float:
    """Residual of ``a = 2b - 1``."""
    return a - (2.0 * b - 1.0)


class DimensionLabel(str, Enum):
    SPECTRAL = "spectral"
    HAUSDORFF = "hausdorff"
    HALF = "half"


@dataclass(frozen=True)
class DimensionComparison:
    """Distance of a fitted exponent from ``1/d_s``, ``1/d`` and ``1/2``."""

    b: float
    inverse_spectral: float
    inverse_hausdorff: float
    to_spectral: float
    to_hausdorff: float
    to_half: float
    nearest: DimensionLabel

    @property
    def spectral_wins(self) -> bool:
        return self.to_spectral < min(self.to_hausdorff, self.to_half)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "b": self.b,
            "inverse_spectral": self.inverse_spectral,
            "inverse_hausdorff": self.inverse_hausdorff,
            "to_spectral": self.to_spectral,
            "to_hausdorff": self.to_hausdorff,
            "to_half": self.to_half,
            "nearest": self.nearest.value,
        }


def dimension_comparison(b: float, d_e: int) -> DimensionComparison:
    inv_ds = 1.0 / spectral_dimension(d_e)
    inv_d = 1.0 / hausdorff_dimension(d_e)
    distances = {
        DimensionLabel.SPECTRAL: abs(b - inv_ds),
        DimensionLabel.HAUSDORFF: abs(b - inv_d),
        DimensionLabel.HALF: abs(b - 0.5),
    }
    # min() keeps the first of equal distances, so ties favour the listed order.
    nearest = min(distances, key=distances.get)
    return DimensionComparison(
        b=b,
        inverse_spectral=inv_ds,
        inverse_hausdorff=inv_d,
        to_spectral=distances[DimensionLabel.SPECTRAL],
        to_hausdorff=distances[DimensionLabel.HAUSDORFF],
        to_half=distances[DimensionLabel.HALF],
        nearest=nearest,
    )


@dataclass(frozen=True)
class DecayFit:
    """``value = c0 + c1 * exp(-c2 * L)``."""

    c0: float
    c1: float
    c2: float
    rms: float

    def predict(self, L: float) -> float:
        return self.c0 + self.c1 * math.exp(-self.c2 * L)

    def to_dict(self) -> Dict[str, float]:
        return {"c0": self.c0, "c1": self.c1, "c2": self.c2, "rms": self.rms}


def _linear_given_rate(x: np.ndarray, y: np.ndarray, rate: float) -> Tuple[float, float, float]:
    design = np.column_stack([np.ones_like(x), np.exp(-rate * x)])
    (c0, c1), *_ = np.linalg.lstsq(design, y, rcond=None)
    rms = float(np.sqrt(np.mean((y - design @ np.array([c0, c1])) ** 2)))
    return float(c0), float(c1), rms


def fit_constant_plus_decay(
    points: Sequence[Tuple[float, float]], rate_bounds: Tuple[float, float] = (0.0, 1.0)
) -> DecayFit:
    """
    Fit ``c0 + c1 exp(-c2 L)`` by a grid over ``c2`` refined with a bounded
    scalar search, solving ``(c0, c1)`` by linear least squares at each ``c2``.
    """
    data = _sorted_points(points)
    if data.shape[0] < MIN_DECAY_POINTS:
        raise FitError(f"decay fit needs at least {MIN_DECAY_POINTS} points, got {data.shape[0]}")
    x, y = data[:, 0], data[:, 1]

    if np.ptp(y) == 0.0:
        return DecayFit(c0=float(y[0]), c1=0.0, c2=0.0, rms=0.0)

    lo, hi = rate_bounds
    grid = np.concatenate([[lo], np.geomspace(max(lo, 1e-7), hi, 400)])
    scores = [_linear_given_rate(x, y, rate)[2] for rate in grid]
    best = int(np.argmin(scores))
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    rate = float(grid[best])
    if right > left:
        refined = minimize_scalar(
            lambda r: _linear_given_rate(x, y, r)[2],
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if refined.success and refined.fun <= scores[best]:
            rate = float(refined.x)
    c0, c1, rms = _linear_given_rate(x, y, rate)
    return DecayFit(c0=c0, c1=c1, c2=rate, rms=rms)


@dataclass(frozen=True)
class ConstantFit:
    c0: float
    rms: float

    def to_dict(self) -> Dict[str, float]:
        return {"c0": self.c0, "rms": self.rms}


def fit_constant(values: Sequence[float]) -> ConstantFit:
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise FitError("constant fit needs at least one value")
    c0 = float(np.mean(data))
    return ConstantFit(c0=c0, rms=float(np.sqrt(np.mean((data - c0) ** 2))))
