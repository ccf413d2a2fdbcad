"""Self-checks certifying that tolerance intervals dominate prediction
intervals on the documented (n, beta, gamma) domain.

Two checks are exposed:

* the containment table: smallest sample sizes at which a gamma-coverage
  beta-content tolerance interval contains the beta prediction interval,
  for gamma in {0.55, 0.6, 0.65, 0.7} and beta in {0.8, 0.9, 0.95, 0.99},
  together with negative probes showing the smaller grid sizes fail;
* the containment grid: ratio >= 1 for every n in [20, 10000]
  (all integers up to 200 plus a log sweep), gamma in {0.7, 0.8, 0.9,
  0.99} and beta in {0.01, ..., 0.99}.

Both return structured reports so callers can render or serialize them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .distributions import chi_square_quantile, std_normal_quantile, student_t_quantile
from .intervals import tolerance_prediction_ratio

__all__ = [
    "CONTAINMENT_TABLE",
    "CONTAINMENT_TABLE_GRID",
    "gamma_floor",
    "CellCheck",
    "TableCheckReport",
    "GridCheckReport",
    "check_containment_table",
    "check_containment_grid",
]

# Smallest sample size (searched on CONTAINMENT_TABLE_GRID) for which the
# gamma-coverage beta-content tolerance interval contains the beta
# prediction interval.
CONTAINMENT_TABLE = {
    0.55: {0.8: 20, 0.9: 50, 0.95: 100, 0.99: 350},
    0.60: {0.8: 20, 0.9: 20, 0.95: 50, 0.99: 80},
    0.65: {0.8: 20, 0.9: 20, 0.95: 20, 0.99: 40},
    0.70: {0.8: 20, 0.9: 20, 0.95: 20, 0.99: 20},
}

CONTAINMENT_TABLE_GRID = (20, 40, 50, 80, 100, 350)

# Grid sizes below each tabled entry at which the ratio genuinely drops
# under 1. The (gamma=0.6, beta=0.95) entry is tabled at 50 although
# containment already holds at n=40, so only n=20 is probed there.
_NEGATIVE_PROBES = [
    (0.55, 0.9, (20, 40)),
    (0.55, 0.95, (20, 40, 50, 80)),
    (0.55, 0.99, (20, 40, 50, 80, 100)),
    (0.60, 0.95, (20,)),
    (0.60, 0.99, (20, 40, 50)),
    (0.65, 0.99, (20,)),
]


def gamma_floor(beta: float, k: int) -> float:
    """Smallest tabled confidence gamma valid for a neighborhood of size k.

    Looks up CONTAINMENT_TABLE conservatively: beta is rounded up to the
    next tabled column and the returned gamma is the smallest row whose
    required sample size does not exceed k. Sizes below 20 (or beta
    beyond 0.99) fall back to 0.7, the row that certifies every tabled
    case at n >= 20.
    """
    cols = sorted(CONTAINMENT_TABLE[0.7])
    col = next((b for b in cols if beta <= b), None)
    if col is None or k < 20:
        return 0.7
    for g in sorted(CONTAINMENT_TABLE):
        if CONTAINMENT_TABLE[g][col] <= k:
            return g
    return 0.7


@dataclass(frozen=True)
class CellCheck:
    gamma: float
    beta: float
    n: int
    ratio: float
    expect_contained: bool

    @property
    def passed(self) -> bool:
        return (self.ratio >= 1.0) == self.expect_contained


@dataclass
class TableCheckReport:
    cells: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)

    @property
    def failures(self) -> list:
        return [c for c in self.cells if not c.passed]


@dataclass
class GridCheckReport:
    n_checked: int = 0
    violations: list = field(default_factory=list)
    min_ratio: float = math.inf
    min_ratio_at: tuple = ()
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.n_checked > 0 and not self.violations


def check_containment_table() -> TableCheckReport:
    """Verify every tabled containment threshold, plus negative probes."""
    start = time.perf_counter()
    report = TableCheckReport()
    for gamma, row in CONTAINMENT_TABLE.items():
        for beta, n in row.items():
            ratio = tolerance_prediction_ratio(n, beta, gamma)
            report.cells.append(CellCheck(gamma, beta, n, ratio, True))
    for gamma, beta, below in _NEGATIVE_PROBES:
        for n in below:
            ratio = tolerance_prediction_ratio(n, beta, gamma)
            report.cells.append(CellCheck(gamma, beta, n, ratio, False))
    report.elapsed = time.perf_counter() - start
    return report


def _grid_sizes(log_points: int) -> list:
    log_part = {int(round(v)) for v in np.logspace(math.log10(20.0), 4.0, log_points)}
    return sorted(set(range(20, 201)) | log_part)


def check_containment_grid(
    gammas=(0.7, 0.8, 0.9, 0.99),
    beta_step: float = 0.01,
    log_points: int = 40,
) -> GridCheckReport:
    """Scan the containment ratio over the full documented domain."""
    start = time.perf_counter()
    report = GridCheckReport()
    betas = np.round(np.arange(beta_step, 1.0, beta_step), 10)
    for n in _grid_sizes(log_points):
        chis = {g: chi_square_quantile(1.0 - g, n - 1) for g in gammas}
        for beta in betas:
            p = 1.0 - (1.0 - float(beta)) / 2.0
            z = std_normal_quantile(p)
            t = student_t_quantile(p, n - 1)
            base = z * math.sqrt(n - 1) / t
            for g, chi in chis.items():
                ratio = base / math.sqrt(chi)
                report.n_checked += 1
                if ratio < report.min_ratio:
                    report.min_ratio = ratio
                    report.min_ratio_at = (n, float(beta), g)
                if ratio < 1.0:
                    report.violations.append((n, float(beta), g, ratio))
    report.elapsed = time.perf_counter() - start
    return report
