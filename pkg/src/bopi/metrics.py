"""Measures and tests for ranking interval-prediction models: coverage,
mean interval size, equivalent Gaussian standard deviation (EGSD), the
binomial reliability critical value, and paired t-tests on interval
sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import DomainError, std_normal_quantile, student_t_cdf
from .intervals import IntervalBand, two_sided_upper

__all__ = [
    "coverage",
    "mis",
    "egsd",
    "normalize_egsd",
    "wilson_critical",
    "TTestResult",
    "paired_t_test",
    "stars_for_p",
    "EvaluationReport",
    "summarize_methods",
]


def coverage(band: IntervalBand, y) -> float:
    """Fraction of responses inside their intervals (bounds inclusive)."""
    y = np.asarray(y, dtype=float)
    if y.shape != band.lower.shape:
        raise ValueError(f"need one response per interval, got {y.shape} vs {band.lower.shape}")
    return float(band.contains(y).mean())


def mis(band: IntervalBand):
    """Mean and sample standard deviation (n-1) of the interval sizes."""
    if len(band) == 0:
        raise ValueError("cannot summarize an empty band")
    sizes = band.sizes()
    sd = float(sizes.std(ddof=1)) if len(band) > 1 else 0.0
    return float(sizes.mean()), sd


def egsd(mis_value: float, cover: float) -> float:
    """Equivalent Gaussian standard deviation: MIS / (2 Z_{1-(1-c)/2}).

    The standard deviation of the normal distribution whose central
    ``cover``-content interval has width ``mis_value``; smaller values
    mean a more efficient interval model. Undefined at coverage 0 or 1.
    """
    if not 0.0 < cover < 1.0:
        raise DomainError(f"coverage must lie strictly in (0, 1), got {cover}")
    if mis_value < 0:
        raise DomainError(f"mean interval size must be nonnegative, got {mis_value}")
    return mis_value / (2.0 * std_normal_quantile(two_sided_upper(cover)))


def normalize_egsd(values: Sequence[float]) -> list:
    """Each EGSD divided by the largest one (NaNs pass through)."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("no EGSD values to normalize")
    finite = arr[np.isfinite(arr)]
    if finite.size == 0:
        return [math.nan] * arr.size
    top = finite.max()
    return [v / top if math.isfinite(v) else math.nan for v in arr]


def wilson_critical(beta: float, n: int, alpha: float = 0.05) -> float:
    """Critical coverage of the one-sided binomial score test.

    Tests H0: true content >= beta against H1: content < beta at level
    ``alpha``; observed coverage below the returned value rejects H0 and
    marks the model unreliable. The score statistic uses the null value
    in its variance, so the critical coverage is
    beta - Z_{1-alpha} * sqrt(beta (1-beta) / n).
    """
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    z = std_normal_quantile(1.0 - alpha)
    return beta - z * math.sqrt(beta * (1.0 - beta) / n)


def stars_for_p(p: float) -> str:
    """Significance stars at the 0.05 / 0.01 / 0.001 levels."""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    stars: str


def paired_t_test(sizes_a, sizes_b) -> TTestResult:
    """Two-sided paired t-test on per-point interval sizes.

    Zero-variance differences are treated as exact outcomes: identical
    inputs give p = 1, a constant nonzero shift gives p = 0.
    """
    a = np.asarray(sizes_a, dtype=float)
    b = np.asarray(sizes_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("paired t-test needs two equal-length vectors of length >= 2")
    diff = a - b
    n = diff.size
    sd = diff.std(ddof=1)
    mean = diff.mean()
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, "")
        return TTestResult(math.copysign(math.inf, mean), 0.0, "***")
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * (1.0 - student_t_cdf(abs(t), n - 1))
    p = min(max(p, 0.0), 1.0)
    return TTestResult(float(t), float(p), stars_for_p(p))


@dataclass(frozen=True)
class EvaluationReport:
    """One method's row in a reliability/efficiency comparison."""

    method: str
    beta: float
    coverage: float
    mis: float
    sigma_is: float
    wilson_critical: float
    reliable: bool
    egsd: float
    egsd_normalized: float
    stars: str


def summarize_methods(
    bands: dict, y, beta: float, alpha: float = 0.05
) -> list:
    """Score a set of method bands against held-out responses.

    ``bands`` maps method name to its IntervalBand over the same points.
    Every method gets coverage, MIS, the reliability flag from
    :func:`wilson_critical`, and EGSD (NaN at degenerate coverage 0 or
    1, excluded from normalization). The two reliable methods with the
    smallest MIS are compared by a paired t-test; the winner's row
    carries the significance stars.
    """
    if not bands:
        raise ValueError("no methods to summarize")
    y = np.asarray(y, dtype=float)
    n = y.size
    crit = wilson_critical(beta, n, alpha)
    rows = {}
    for name, band in bands.items():
        cov = coverage(band, y)
        mean_size, sd_size = mis(band)
        try:
            e = egsd(mean_size, cov)
        except DomainError:
            e = math.nan
        rows[name] = dict(
            coverage=cov,
            mis=mean_size,
            sigma_is=sd_size,
            reliable=cov >= crit,
            egsd=e,
        )
    normalized = normalize_egsd([rows[name]["egsd"] for name in bands])
    for name, norm in zip(bands, normalized):
        rows[name]["egsd_normalized"] = norm

    stars = {name: "" for name in bands}
    reliable_sorted = sorted(
        (name for name in bands if rows[name]["reliable"]),
        key=lambda name: rows[name]["mis"],
    )
    if len(reliable_sorted) >= 2:
        first, second = reliable_sorted[0], reliable_sorted[1]
        test = paired_t_test(bands[first].sizes(), bands[second].sizes())
        stars[first] = test.stars

    return [
        EvaluationReport(
            method=name,
            beta=beta,
            coverage=rows[name]["coverage"],
            mis=rows[name]["mis"],
            sigma_is=rows[name]["sigma_is"],
            wilson_critical=crit,
            reliable=rows[name]["reliable"],
            egsd=rows[name]["egsd"],
            egsd_normalized=rows[name]["egsd_normalized"],
            stars=stars[name],
        )
        for name in bands
    ]
