"""Synthetic regression benchmarks and the Monte Carlo harness that
compares interval methods on them.

Randomness policy: every stream is a PCG64 generator keyed through
``numpy.random.SeedSequence``; iteration substreams are spawned from the
harness seed so iterations are independent and the run is reproducible
whether executed sequentially or in parallel. Normal variates are drawn
by inverse-CDF transform of uniforms (scipy.special.ndtri), keeping the
draw sequence well defined.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .distributions import std_normal_quantile
from .intervals import two_sided_upper
from .llr import Dataset, DataError, FeatureScaler, LoessModel, cv_prediction_errors, predict_many
from .prediction import NeighborErrorTable, _adaptive_scan

__all__ = [
    "FRIEDMAN1_NOISE_SD",
    "FRIEDMAN2_NOISE_SD",
    "METHODS",
    "DgpSpec",
    "SimHyper",
    "MethodSeries",
    "SimulationResult",
    "friedman1",
    "friedman2",
    "friedman1_mean",
    "friedman2_mean",
    "run_simulation",
]

FRIEDMAN1_NOISE_SD = 1.0
# Default error variance 125 for the second benchmark family.
FRIEDMAN2_NOISE_SD = math.sqrt(125.0)

METHODS = ("conventional", "f-bopi", "a-bopi")


@dataclass(frozen=True)
class DgpSpec:
    """A data-generating process: family, sample size, noise scale, seed."""

    family: str
    n: int
    noise_sd: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("friedman1", "friedman2"):
            raise DataError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise DataError(f"sample size must be positive, got {self.n}")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise DataError(f"noise_sd must be nonnegative, got {self.noise_sd}")

    @property
    def effective_noise_sd(self) -> float:
        if self.noise_sd is not None:
            return self.noise_sd
        return FRIEDMAN1_NOISE_SD if self.family == "friedman1" else FRIEDMAN2_NOISE_SD


def _generator(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def _normals(rng: np.random.Generator, size) -> np.ndarray:
    return ndtri(rng.random(size))


def friedman1_mean(X) -> np.ndarray:
    """10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5."""
    X = np.asarray(X, dtype=float)
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def friedman2_mean(X) -> np.ndarray:
    """sqrt( x1^2 + (x2 x3 - 1/(x2 x4))^2 )."""
    X = np.asarray(X, dtype=float)
    return np.sqrt(X[:, 0] ** 2 + (X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])) ** 2)


def _friedman_sample(spec: DgpSpec, rng: np.random.Generator):
    if spec.family == "friedman1":
        X = rng.random((spec.n, 10))
        mean = friedman1_mean(X)
    else:
        U = rng.random((spec.n, 4))
        X = np.empty_like(U)
        X[:, 0] = 100.0 * U[:, 0]
        X[:, 1] = 40.0 * np.pi + (560.0 - 40.0) * np.pi * U[:, 1]
        X[:, 2] = U[:, 2]
        X[:, 3] = 1.0 + 10.0 * U[:, 3]
        mean = friedman2_mean(X)
    noise = spec.effective_noise_sd * _normals(rng, spec.n)
    return X, mean + noise


def _as_dataset(family: str, X, y) -> Dataset:
    names = tuple(f"x{i + 1}" for i in range(X.shape[1]))
    return Dataset(X, y, names)


def friedman1(spec: DgpSpec) -> Dataset:
    """Draw a Friedman #1 sample: ten [0,1] predictors, five active."""
    if spec.family != "friedman1":
        raise DataError("spec.family must be 'friedman1'")
    X, y = _friedman_sample(spec, _generator(spec.seed))
    return _as_dataset(spec.family, X, y)


def friedman2(spec: DgpSpec) -> Dataset:
    """Draw a Friedman #2 sample: four predictors on fixed ranges."""
    if spec.family != "friedman2":
        raise DataError("spec.family must be 'friedman2'")
    X, y = _friedman_sample(spec, _generator(spec.seed))
    return _as_dataset(spec.family, X, y)


@dataclass(frozen=True)
class SimHyper:
    """Interval-method hyper-parameters held fixed across iterations."""

    k_loess: int = 100
    k_fixed: int = 40
    k_min: int = 30
    k_max: int = 50
    cv_folds: int = 10


@dataclass
class MethodSeries:
    coverage: np.ndarray
    mis: np.ndarray

    def summary(self) -> dict:
        cov_sd = float(self.coverage.std(ddof=1)) if self.coverage.size > 1 else 0.0
        mis_sd = float(self.mis.std(ddof=1)) if self.mis.size > 1 else 0.0
        return {
            "coverage_mean": float(self.coverage.mean()),
            "coverage_sd": cov_sd,
            "mis_mean": float(self.mis.mean()),
            "mis_sd": mis_sd,
        }


@dataclass
class SimulationResult:
    """Per-iteration coverage and mean interval size for every
    (method, beta, gamma) combination, plus aggregate summaries."""

    family: str
    n: int
    n_sim: int
    betas: tuple
    gammas: tuple
    methods: tuple
    hyper: SimHyper
    seed: int
    series: dict = field(default_factory=dict)

    def get(self, method: str, beta: float, gamma: float) -> MethodSeries:
        return self.series[(method, beta, gamma)]

    def aggregate_rows(self) -> list:
        rows = []
        for (method, beta, gamma), s in sorted(self.series.items()):
            row = {
                "family": self.family,
                "method": method,
                "beta": beta,
                "gamma": gamma,
                "n": self.n,
                "n_sim": self.n_sim,
            }
            row.update(s.summary())
            rows.append(row)
        return rows

    def iteration_rows(self) -> list:
        rows = []
        for (method, beta, gamma), s in sorted(self.series.items()):
            for it in range(self.n_sim):
                rows.append(
                    {
                        "iteration": it,
                        "method": method,
                        "beta": beta,
                        "gamma": gamma,
                        "coverage": float(s.coverage[it]),
                        "mis": float(s.mis[it]),
                    }
                )
        return rows


def _one_iteration(spec, betas, gammas, methods, hyper, child_seed):
    rng = _generator(child_seed)
    X, y = _friedman_sample(spec, rng)
    fold_seed = int(rng.integers(2**63))

    n_train = (2 * spec.n) // 3
    scaler = FeatureScaler(
        X[:n_train].mean(axis=0), X[:n_train].std(axis=0, ddof=1)
    )
    train = Dataset(
        scaler.transform(X[:n_train]),
        y[:n_train],
        tuple(f"x{i + 1}" for i in range(X.shape[1])),
        scaler=scaler,
    )
    Q = scaler.transform(X[n_train:])
    y_test = y[n_train:]

    model = LoessModel(train, min(hyper.k_loess, train.n))
    es = cv_prediction_errors(model, scheme="kfold", folds=hyper.cv_folds, seed=fold_seed)
    fhat = predict_many(model, Q)

    k_cap = max(hyper.k_fixed, hyper.k_max)
    table = NeighborErrorTable(train, es, Q, min(k_cap, train.n))
    adaptive_sizes = tuple(range(hyper.k_min, hyper.k_max + 1))

    out = {}
    for beta in betas:
        z_half = std_normal_quantile(two_sided_upper(beta)) * es.rmse
        for gamma in gammas:
            for method in methods:
                if method == "conventional":
                    lo, hi = fhat - z_half, fhat + z_half
                elif method == "f-bopi":
                    center, half = table.tolerance_halves(hyper.k_fixed, beta, gamma)
                    lo, hi = fhat + center - half, fhat + center + half
                elif method == "a-bopi":
                    center, half, _ = _adaptive_scan(table, adaptive_sizes, beta, gamma)
                    lo, hi = fhat + center - half, fhat + center + half
                else:
                    raise DataError(f"unknown method {method!r}")
                covered = (y_test >= lo) & (y_test <= hi)
                out[(method, beta, gamma)] = (
                    float(covered.mean()),
                    float((hi - lo).mean()),
                )
    return out


def run_simulation(
    dgp: DgpSpec,
    n_sim: int,
    betas,
    gammas,
    methods: Sequence[str] = METHODS,
    hyper: SimHyper = SimHyper(),
    seed: int = 0,
    threads: Optional[int] = None,
) -> SimulationResult:
    """Monte Carlo comparison of interval methods on a synthetic process.

    Each iteration draws a fresh sample, uses the first two thirds for
    training (features standardized with training statistics) and the
    remaining third for evaluation, fits the loess model, computes the
    cross-validated error set, and scores every requested method at
    every (beta, gamma) combination.

    ``threads`` (or the BOPI_THREADS environment variable) parallelizes
    iterations; results are identical to a sequential run.
    """
    if n_sim < 1:
        raise DataError(f"n_sim must be positive, got {n_sim}")
    if not methods:
        raise DataError("methods must be nonempty")
    betas = tuple(float(b) for b in (betas if np.iterable(betas) else [betas]))
    gammas = tuple(float(g) for g in (gammas if np.iterable(gammas) else [gammas]))
    for v in betas + gammas:
        if not 0.0 < v < 1.0:
            raise DataError(f"beta and gamma values must lie in (0, 1), got {v}")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise DataError(f"unknown methods: {sorted(unknown)}")

    if threads is None:
        threads = int(os.environ.get("BOPI_THREADS", "1"))
    children = np.random.SeedSequence(seed).spawn(n_sim)

    def work(i):
        return _one_iteration(dgp, betas, gammas, methods, hyper, children[i])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(n_sim)))
    else:
        results = [work(i) for i in range(n_sim)]

    series = {}
    for key in results[0]:
        cov = np.array([r[key][0] for r in results])
        mis = np.array([r[key][1] for r in results])
        series[key] = MethodSeries(cov, mis)
    return SimulationResult(
        family=dgp.family,
        n=dgp.n,
        n_sim=n_sim,
        betas=betas,
        gammas=gammas,
        methods=tuple(methods),
        hyper=hyper,
        seed=seed,
        series=series,
    )
