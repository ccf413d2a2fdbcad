"""Closed-form statistical intervals for normal samples.

Provides two-sided beta-content prediction intervals, beta-content /
gamma-coverage tolerance intervals (Howe's factor), the constant-width
interval built from a z quantile and an RMSE, and the tolerance-to-
prediction size ratio used to certify that tolerance intervals dominate
prediction intervals for moderate sample sizes.

Quantile conventions are always two-sided: a beta-content interval puts
tail probability (1 - beta) / 2 on each side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .distributions import (
    DomainError,
    chi_square_quantile,
    std_normal_quantile,
    student_t_quantile,
)

__all__ = [
    "Interval",
    "IntervalBand",
    "SampleSummary",
    "prediction_factor",
    "normal_prediction_interval",
    "tolerance_factor",
    "normal_tolerance_interval",
    "tolerance_prediction_ratio",
    "min_n_for_containment",
    "conventional_interval",
    "two_sided_upper",
]


def two_sided_upper(beta: float) -> float:
    """Upper-tail probability 1 - (1 - beta) / 2 of a two-sided interval."""
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")
    return 1.0 - (1.0 - beta) / 2.0


@dataclass(frozen=True)
class Interval:
    """A closed interval [lower, upper] in response units."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"interval bounds out of order: {self.lower} > {self.upper}")

    @property
    def size(self) -> float:
        return self.upper - self.lower

    def contains(self, y: float) -> bool:
        # Boundary values count as covered.
        return self.lower <= y <= self.upper

    def shift(self, offset: float) -> "Interval":
        return Interval(self.lower + offset, self.upper + offset)


class IntervalBand:
    """A per-query collection of intervals, stored as two aligned arrays."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be equal-length 1-D arrays")
        if np.any(self.lower > self.upper):
            raise ValueError("interval bounds out of order")

    def __len__(self) -> int:
        return self.lower.size

    def __getitem__(self, i: int) -> Interval:
        return Interval(float(self.lower[i]), float(self.upper[i]))

    def sizes(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (y >= self.lower) & (y <= self.upper)

    @classmethod
    def from_intervals(cls, intervals: Iterable[Interval]) -> "IntervalBand":
        ivs = list(intervals)
        return cls([iv.lower for iv in ivs], [iv.upper for iv in ivs])


@dataclass(frozen=True)
class SampleSummary:
    """Mean, standard deviation (n-1 denominator) and size of a sample."""

    mean: float
    sd: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"sample size must be at least 2, got {self.n}")
        if not self.sd >= 0.0:
            raise DomainError(f"standard deviation must be nonnegative, got {self.sd}")

    @classmethod
    def from_sample(cls, values) -> "SampleSummary":
        v = np.asarray(values, dtype=float)
        return cls(float(v.mean()), float(v.std(ddof=1)), int(v.size))


def _check_n(n: int) -> int:
    if n != int(n) or int(n) < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")
    return int(n)


def prediction_factor(n: int, beta: float) -> float:
    """Half-width multiplier of the two-sided normal prediction interval.

    Equals t_{1-(1-beta)/2, n-1} * sqrt(1 + 1/n): the coefficient of the
    sample standard deviation in the interval for one future observation.
    """
    n = _check_n(n)
    t = student_t_quantile(two_sided_upper(beta), n - 1)
    return t * math.sqrt(1.0 + 1.0 / n)


def normal_prediction_interval(s: SampleSummary, beta: float) -> Interval:
    """Two-sided beta-content prediction interval for a normal sample."""
    half = prediction_factor(s.n, beta) * s.sd
    return Interval(s.mean - half, s.mean + half)


def tolerance_factor(n: int, beta: float, gamma: float) -> float:
    """Howe's half-width multiplier of the normal tolerance interval.

    c = sqrt( (n-1) (1 + 1/n) Z^2_{1-(1-beta)/2} / chi2_{1-gamma, n-1} ),
    giving an interval that contains a beta proportion of the population
    with confidence gamma. Strictly increasing in beta and in gamma.
    """
    n = _check_n(n)
    z = std_normal_quantile(two_sided_upper(beta))
    chi = chi_square_quantile(1.0 - gamma, n - 1)
    return math.sqrt((n - 1) * (1.0 + 1.0 / n) * z * z / chi)


def normal_tolerance_interval(s: SampleSummary, beta: float, gamma: float) -> Interval:
    """Two-sided beta-content, gamma-coverage normal tolerance interval."""
    half = tolerance_factor(s.n, beta, gamma) * s.sd
    return Interval(s.mean - half, s.mean + half)


def tolerance_prediction_ratio(n: int, beta: float, gamma: float) -> float:
    """Size ratio of the tolerance interval to the prediction interval.

    Z_{1-(1-beta)/2} * sqrt(n-1) / ( t_{1-(1-beta)/2, n-1} *
    sqrt(chi2_{1-gamma, n-1}) ). A ratio >= 1 means the tolerance
    interval contains the prediction interval built from the same
    sample summary.
    """
    n = _check_n(n)
    p = two_sided_upper(beta)
    z = std_normal_quantile(p)
    t = student_t_quantile(p, n - 1)
    chi = chi_square_quantile(1.0 - gamma, n - 1)
    return z * math.sqrt(n - 1) / (t * math.sqrt(chi))


def min_n_for_containment(
    beta: float, gamma: float, grid: Optional[Sequence[int]] = None
) -> Optional[int]:
    """Smallest grid sample size whose tolerance interval contains the
    prediction interval, or None if no grid value qualifies.

    ``grid`` must be nonempty and ascending; by default a step-5 sweep
    of [20, 10000] is searched.
    """
    grid = list(grid) if grid is not None else list(range(20, 10_001, 5))
    if not grid:
        raise ValueError("grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly ascending")
    for n in grid:
        if tolerance_prediction_ratio(n, beta, gamma) >= 1.0:
            return n
    return None


def conventional_interval(fhat: float, rmse: float, beta: float) -> Interval:
    """Constant-width interval fhat +/- Z_{1-(1-beta)/2} * rmse.

    The width ignores the sample size; contrast with
    :func:`normal_prediction_interval`.
    """
    if rmse < 0:
        raise DomainError(f"rmse must be nonnegative, got {rmse}")
    half = std_normal_quantile(two_sided_upper(beta)) * rmse
    return Interval(fhat - half, fhat + half)
