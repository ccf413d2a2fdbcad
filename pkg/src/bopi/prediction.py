"""Bounded-oscillation prediction intervals on top of a loess model.

A prediction interval at a query x is the loess estimate fhat(x) plus a
normal tolerance interval computed on the cross-validated prediction
errors of the k training points nearest to x (the local error
neighborhood). Centering on the local mean error corrects the local
regression bias; the tolerance factor widens the interval enough to keep
beta-content with confidence gamma.

Two neighborhood policies exist: a fixed k, and an adaptive scan over
[k_min, k_max] that keeps the narrowest tolerance interval. The
hyper-parameter tuner alternates between growing the neighborhood and
lowering gamma while a training-set coverage constraint holds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .intervals import Interval, IntervalBand, tolerance_factor, two_sided_upper
from .distributions import std_normal_quantile
from .llr import DataError, Dataset, ErrorSet, LoessModel, cv_prediction_errors, knn, predict, predict_many
from .verify import gamma_floor

__all__ = [
    "MIN_NEIGHBORHOOD",
    "MAX_NEIGHBORHOOD",
    "GAMMA_LADDER",
    "FixedNeighborhood",
    "AdaptiveNeighborhood",
    "eset",
    "error_tolerance_interval",
    "f_bopi_interval",
    "a_bopi_interval",
    "conventional_band",
    "f_bopi_band",
    "a_bopi_band",
    "NeighborErrorTable",
    "TuningStep",
    "TuningResult",
    "tune_hyperparams",
]

# Error neighborhoods below 20 points give tolerance factors too unstable
# to certify; above 10000 the containment guarantee is unverified.
MIN_NEIGHBORHOOD = 20
MAX_NEIGHBORHOOD = 10_000

# Confidence levels the tuner walks down, highest first.
GAMMA_LADDER = (0.99, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.65, 0.60, 0.55, 0.50)


@dataclass(frozen=True)
class FixedNeighborhood:
    """Fixed-size local error neighborhood: k errors, confidence gamma."""

    k: int
    gamma: float

    def __post_init__(self):
        if self.k < MIN_NEIGHBORHOOD:
            raise DataError(f"neighborhood size must be >= {MIN_NEIGHBORHOOD}, got {self.k}")
        if not 0.0 < self.gamma < 1.0:
            raise DataError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class AdaptiveNeighborhood:
    """Adaptive neighborhood scanned over [k_min, k_max] in steps of
    ``step``; the narrowest tolerance interval wins, ties to smaller k.

    By default k_max may not exceed the regression bandwidth; set
    ``allow_beyond_regression`` to search past it.
    """

    k_min: int
    k_max: int
    gamma: float
    step: int = 1
    allow_beyond_regression: bool = False

    def __post_init__(self):
        if self.k_min < MIN_NEIGHBORHOOD:
            raise DataError(f"k_min must be >= {MIN_NEIGHBORHOOD}, got {self.k_min}")
        if self.k_max < self.k_min:
            raise DataError(f"k_max must be >= k_min, got ({self.k_min}, {self.k_max})")
        if self.step < 1:
            raise DataError(f"step must be >= 1, got {self.step}")
        if not 0.0 < self.gamma < 1.0:
            raise DataError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def sizes(self) -> tuple:
        return tuple(range(self.k_min, self.k_max + 1, self.step))


NeighborhoodConfig = Union[FixedNeighborhood, AdaptiveNeighborhood]


def _clamped(k: int, n: int, what: str) -> int:
    if k > MAX_NEIGHBORHOOD:
        warnings.warn(
            f"{what} {k} exceeds the verified maximum {MAX_NEIGHBORHOOD}; clamping"
        )
        k = MAX_NEIGHBORHOOD
    if not MIN_NEIGHBORHOOD <= k <= n:
        raise DataError(f"{what} must lie in [{MIN_NEIGHBORHOOD}, {n}], got {k}")
    return k


def eset(error_set: ErrorSet, d: Dataset, x, k: int) -> np.ndarray:
    """Prediction errors of the k training points nearest to x.

    Ordering matches :func:`bopi.llr.knn`; a training point used as the
    query contributes its own error at rank one.
    """
    if len(error_set) != d.n:
        raise DataError("error set and dataset sizes differ")
    k = _clamped(k, d.n, "error neighborhood size")
    idx, _ = knn(d, x, k)
    return error_set.errors[idx]


def error_tolerance_interval(errors, beta: float, gamma: float) -> Interval:
    """Normal tolerance interval of a sample of prediction errors.

    Centered on the sample mean (the local bias estimate, negated) with
    half-width tolerance_factor(k, beta, gamma) times the sample
    standard deviation (k-1 denominator).
    """
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.size < MIN_NEIGHBORHOOD:
        raise DataError(
            f"tolerance interval needs at least {MIN_NEIGHBORHOOD} errors, got {e.size}"
        )
    theta = float(e.mean())
    sd = float(e.std(ddof=1))
    half = tolerance_factor(e.size, beta, gamma) * sd
    return Interval(theta - half, theta + half)


def _check_config(cfg: NeighborhoodConfig, m: LoessModel) -> None:
    if isinstance(cfg, FixedNeighborhood):
        if cfg.k > m.k_loess:
            raise DataError(
                f"fixed neighborhood {cfg.k} exceeds the regression bandwidth {m.k_loess}"
            )
        if cfg.k > m.data.n:
            raise DataError(f"neighborhood {cfg.k} exceeds the training size {m.data.n}")
    else:
        cap = m.data.n if cfg.allow_beyond_regression else min(m.data.n, m.k_loess)
        if cfg.k_max > cap:
            raise DataError(
                f"adaptive neighborhood bound {cfg.k_max} exceeds its cap {cap}"
            )


def f_bopi_interval(
    m: LoessModel, es: ErrorSet, x, beta: float, cfg: FixedNeighborhood
) -> Interval:
    """Fixed-neighborhood interval: fhat(x) plus the tolerance interval
    of the k nearest prediction errors."""
    if not isinstance(cfg, FixedNeighborhood):
        raise DataError("f_bopi_interval expects a FixedNeighborhood config")
    _check_config(cfg, m)
    tol = error_tolerance_interval(eset(es, m.data, x, cfg.k), beta, cfg.gamma)
    return tol.shift(predict(m, x))


def a_bopi_interval(
    m: LoessModel, es: ErrorSet, x, beta: float, cfg: AdaptiveNeighborhood
):
    """Adaptive-neighborhood interval plus the neighborhood size chosen.

    Scans k = k_min, k_min+step, ..., k_max and keeps the narrowest
    tolerance interval (ties to the smallest k).
    """
    if not isinstance(cfg, AdaptiveNeighborhood):
        raise DataError("a_bopi_interval expects an AdaptiveNeighborhood config")
    _check_config(cfg, m)
    errors = eset(es, m.data, x, cfg.sizes[-1])
    best = None
    for k in cfg.sizes:
        tol = error_tolerance_interval(errors[:k], beta, cfg.gamma)
        if best is None or tol.size < best[0].size:
            best = (tol, k)
    interval, chosen = best
    return interval.shift(predict(m, x)), chosen


def conventional_band(m: LoessModel, es: ErrorSet, queries, beta: float) -> IntervalBand:
    """Constant-width band fhat +/- z * rmse of the cross-validated errors."""
    fhat = predict_many(m, queries)
    half = std_normal_quantile(two_sided_upper(beta)) * es.rmse
    return IntervalBand(fhat - half, fhat + half)


class NeighborErrorTable:
    """Ordered neighbor errors per query with prefix sums, so the mean
    and standard deviation of the first k errors cost O(1) per query."""

    def __init__(self, d: Dataset, error_set: ErrorSet, queries, k_cap: int):
        if len(error_set) != d.n:
            raise DataError("error set and dataset sizes differ")
        X = d.features
        Q = np.asarray(queries, dtype=float)
        if Q.ndim == 1:
            Q = Q[None, :]
        k_cap = min(k_cap, d.n)
        m = Q.shape[0]
        order = np.empty((m, k_cap), dtype=np.intp)
        chunk = max(1, int(4_000_000 // max(d.n * d.n_features, 1)))
        for start in range(0, m, chunk):
            q = Q[start : start + chunk]
            d2 = ((q[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
            order[start : start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k_cap]
        E = error_set.errors[order]
        self.k_cap = k_cap
        self._cs = np.cumsum(E, axis=1)
        self._cs2 = np.cumsum(E * E, axis=1)

    def __len__(self) -> int:
        return self._cs.shape[0]

    def mean(self, k: int) -> np.ndarray:
        return self._cs[:, k - 1] / k

    def sd(self, k: int) -> np.ndarray:
        var = (self._cs2[:, k - 1] - self._cs[:, k - 1] ** 2 / k) / (k - 1)
        return np.sqrt(np.maximum(var, 0.0))

    def tolerance_halves(self, k: int, beta: float, gamma: float):
        """(center, half-width) arrays of the k-neighbor tolerance intervals."""
        c = tolerance_factor(k, beta, gamma)
        return self.mean(k), c * self.sd(k)


def f_bopi_band(
    m: LoessModel, es: ErrorSet, queries, beta: float, cfg: FixedNeighborhood
) -> IntervalBand:
    """Fixed-neighborhood intervals at many queries (fast path)."""
    if not isinstance(cfg, FixedNeighborhood):
        raise DataError("f_bopi_band expects a FixedNeighborhood config")
    _check_config(cfg, m)
    k = _clamped(cfg.k, m.data.n, "error neighborhood size")
    fhat = predict_many(m, queries)
    table = NeighborErrorTable(m.data, es, queries, k)
    center, half = table.tolerance_halves(k, beta, cfg.gamma)
    return IntervalBand(fhat + center - half, fhat + center + half)


def a_bopi_band(
    m: LoessModel, es: ErrorSet, queries, beta: float, cfg: AdaptiveNeighborhood
):
    """Adaptive intervals at many queries, plus the chosen sizes."""
    if not isinstance(cfg, AdaptiveNeighborhood):
        raise DataError("a_bopi_band expects an AdaptiveNeighborhood config")
    _check_config(cfg, m)
    _clamped(cfg.sizes[-1], m.data.n, "error neighborhood bound")
    fhat = predict_many(m, queries)
    table = NeighborErrorTable(m.data, es, queries, cfg.sizes[-1])
    center, half, chosen = _adaptive_scan(table, cfg.sizes, beta, cfg.gamma)
    return IntervalBand(fhat + center - half, fhat + center + half), chosen


def _adaptive_scan(table: NeighborErrorTable, sizes, beta: float, gamma: float):
    best_half = None
    for k in sizes:
        center_k, half_k = table.tolerance_halves(k, beta, gamma)
        if best_half is None:
            best_center, best_half = center_k, half_k
            chosen = np.full(len(table), k)
        else:
            better = half_k < best_half
            best_center = np.where(better, center_k, best_center)
            best_half = np.where(better, half_k, best_half)
            chosen = np.where(better, k, chosen)
    return best_center, best_half, chosen


# ---------------------------------------------------------------------------
# Hyper-parameter tuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TuningStep:
    """One evaluated candidate during tuning."""

    gamma: float
    k_lo: int
    k_hi: int
    coverage: float
    mis: float
    accepted: bool


@dataclass
class TuningResult:
    config: NeighborhoodConfig
    coverage: float
    mis: float
    feasible: bool
    history: list = field(default_factory=list)


def tune_hyperparams(
    model: LoessModel,
    beta: float,
    variant: str = "adaptive",
    scheme: str = "kfold",
    folds: int = 10,
    seed: int = 0,
    error_set: Optional[ErrorSet] = None,
    gamma0: float = 0.99,
    k_init=None,
    k_step: int = 5,
    outer_iterations: int = 3,
    adaptive_step: int = 1,
) -> TuningResult:
    """Tune (gamma, neighborhood) under a training-coverage constraint.

    Alternates two greedy loops for ``outer_iterations`` rounds: grow
    the neighborhood by ``k_step`` while training coverage stays at or
    above beta and the mean interval size does not increase, then walk
    gamma down the ladder under the same conditions, never below the
    tabled floor for the current minimum neighborhood size. The result
    is the feasible candidate with the smallest mean interval size among
    all candidates evaluated; if none is feasible, the highest-gamma,
    smallest-neighborhood candidate is returned with a warning and
    ``feasible=False``.

    Coverage and interval sizes are evaluated on the training set with
    the same cross-validation scheme that produced the error set.

    ``k_init`` is a single size for the fixed variant and a (low, high)
    pair for the adaptive one; defaults are 20 and (20, 30).
    """
    if variant not in ("fixed", "adaptive"):
        raise DataError(f"variant must be 'fixed' or 'adaptive', got {variant!r}")
    if gamma0 not in GAMMA_LADDER:
        raise DataError(f"gamma0 must be one of {GAMMA_LADDER}")
    d = model.data
    if error_set is None:
        error_set = cv_prediction_errors(model, scheme=scheme, folds=folds, seed=seed)

    k_cap = min(model.k_loess, d.n, MAX_NEIGHBORHOOD)
    if variant == "fixed":
        k_lo = k_hi = int(k_init) if k_init is not None else MIN_NEIGHBORHOOD
    else:
        k_lo, k_hi = (int(k_init[0]), int(k_init[1])) if k_init is not None else (20, 30)
    if k_lo < MIN_NEIGHBORHOOD or k_hi > k_cap:
        raise DataError(f"initial neighborhood ({k_lo}, {k_hi}) outside [20, {k_cap}]")

    table = NeighborErrorTable(d, error_set, d.features, k_cap)
    e = error_set.errors
    step = 1 if variant == "fixed" else adaptive_step

    def evaluate(gamma, lo, hi):
        sizes = tuple(range(lo, hi + 1, step)) if hi > lo else (lo,)
        center, half, _ = _adaptive_scan(table, sizes, beta, gamma)
        covered = (e >= center - half) & (e <= center + half)
        return float(covered.mean()), float(2.0 * half.mean())

    history = []
    visited = {}

    def record(gamma, lo, hi, accepted):
        key = (gamma, lo, hi)
        if key not in visited:
            visited[key] = evaluate(gamma, lo, hi)
        cov, mis = visited[key]
        history.append(TuningStep(gamma, lo, hi, cov, mis, accepted))
        return cov, mis

    g_idx = GAMMA_LADDER.index(gamma0)
    cov, mis = record(GAMMA_LADDER[g_idx], k_lo, k_hi, True)
    for _ in range(outer_iterations):
        # Grow the neighborhood while coverage holds and MIS improves.
        while k_hi + k_step <= k_cap:
            cand = (k_lo + k_step, k_hi + k_step)
            ccov, cmis = record(GAMMA_LADDER[g_idx], *cand, False)
            if ccov >= beta and cmis <= mis:
                history[-1] = TuningStep(GAMMA_LADDER[g_idx], *cand, ccov, cmis, True)
                (k_lo, k_hi), cov, mis = cand, ccov, cmis
            else:
                break
        # Lower gamma while coverage holds, MIS improves and the tabled
        # floor for the minimum neighborhood size allows it.
        while g_idx + 1 < len(GAMMA_LADDER):
            g_next = GAMMA_LADDER[g_idx + 1]
            if g_next < gamma_floor(beta, k_lo):
                break
            ccov, cmis = record(g_next, k_lo, k_hi, False)
            if ccov >= beta and cmis <= mis:
                history[-1] = TuningStep(g_next, k_lo, k_hi, ccov, cmis, True)
                g_idx, cov, mis = g_idx + 1, ccov, cmis
            else:
                break

    feasible = {k: v for k, v in visited.items() if v[0] >= beta}

    def build_config(gamma, lo, hi):
        if variant == "fixed":
            return FixedNeighborhood(lo, gamma)
        return AdaptiveNeighborhood(lo, hi, gamma, step=step)

    if feasible:
        key = min(feasible, key=lambda k: (feasible[k][1], k[1], -k[0]))
        cov, mis = feasible[key]
        return TuningResult(build_config(*key), cov, mis, True, history)

    warnings.warn(
        "no candidate satisfied the coverage constraint; returning the "
        "highest-confidence, smallest-neighborhood configuration"
    )
    if variant == "fixed":
        fallback = (GAMMA_LADDER[0], MIN_NEIGHBORHOOD, MIN_NEIGHBORHOOD)
    else:
        init = k_init if k_init is not None else (20, 30)
        fallback = (GAMMA_LADDER[0], int(init[0]), int(init[1]))
    cov, mis = visited.get(fallback[:3], (math.nan, math.nan))
    if math.isnan(cov):
        cov, mis = evaluate(*fallback)
    return TuningResult(build_config(*fallback), cov, mis, False, history)
