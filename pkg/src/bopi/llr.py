"""Dataset encoding, k-nearest-neighbor search, degree-1 locally weighted
regression (loess) with tricube weights, cross-validated prediction
errors, bandwidth selection, and an ordinary least-squares baseline.

Conventions
-----------
* Features live in an encoded, z-score-standardized matrix; queries are
  always expressed in that space.
* The loess bandwidth at a query is the Euclidean distance to its
  k_loess-th nearest neighbor, so that neighbor receives tricube weight
  zero and the fit effectively uses k_loess - 1 points.
* Nearest-neighbor ties at equal distance are resolved toward the
  lowest training index, deterministically.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

__all__ = [
    "DataError",
    "Dataset",
    "FeatureScaler",
    "TabularEncoder",
    "ErrorSet",
    "LoessModel",
    "LocalFit",
    "OlsModel",
    "encode_dataset",
    "knn",
    "KdTreeIndex",
    "tricube_weights",
    "fit_local",
    "predict",
    "predict_many",
    "cv_prediction_errors",
    "select_bandwidth",
    "fit_ols",
    "ols_predict",
    "ols_prediction_interval",
    "ols_band",
    "FIT_DIAGNOSTICS",
]

# Counts of numerically degenerate local fits, kept for post-mortems.
FIT_DIAGNOSTICS = Counter()


class DataError(ValueError):
    """Raised when input data violates a structural requirement."""


@dataclass(frozen=True)
class FeatureScaler:
    """Per-column z-score parameters (sample standard deviation)."""

    mean: np.ndarray
    sd: np.ndarray

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.mean) / self.sd

    def inverse(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) * self.sd + self.mean


@dataclass(frozen=True)
class TabularEncoder:
    """Column transforms fitted on a raw frame: one-hot maps for
    categorical columns and the ordering of encoded columns."""

    numeric_columns: tuple
    categorical_levels: dict
    encoded_names: tuple

    def encode_frame(self, frame: pd.DataFrame) -> np.ndarray:
        """Encode a raw frame to the (unstandardized) column layout."""
        blocks = {}
        for col in self.numeric_columns:
            blocks[col] = frame[col].to_numpy(dtype=float)
        for col, levels in self.categorical_levels.items():
            values = frame[col].astype(str).to_numpy()
            for lev in levels:
                blocks[f"{col}={lev}"] = (values == lev).astype(float)
        return np.column_stack([blocks[name] for name in self.encoded_names])


@dataclass(frozen=True)
class Dataset:
    """Encoded feature matrix plus response and encoding metadata."""

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple
    scaler: Optional[FeatureScaler] = None
    encoder: Optional[TabularEncoder] = None
    n_dropped_rows: int = 0
    dropped_columns: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise DataError("features must be (n, d) with a matching response vector")
        if X.shape[0] < 1:
            raise DataError("dataset must contain at least one row")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("dataset contains missing or non-finite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_numeric(cls, X, y, standardize: bool = True, names=None) -> "Dataset":
        """Build a dataset from numeric arrays, optionally z-scoring columns."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if names is None:
            names = tuple(f"x{i + 1}" for i in range(X.shape[1]))
        scaler = None
        if standardize:
            sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(X.shape[1])
            if np.any(sd <= 0):
                raise DataError("cannot standardize a constant feature column")
            scaler = FeatureScaler(X.mean(axis=0), sd)
            X = scaler.transform(X)
        return cls(X, y, tuple(names), scaler=scaler)


def encode_dataset(raw, response: str) -> Dataset:
    """Encode a raw table into a modeling-ready dataset.

    Rows with any missing value are dropped, categorical columns are
    one-hot expanded (one indicator per level), and every encoded column
    is z-score standardized using the full input. Constant columns are
    dropped with a warning; a non-numeric response is an error.
    """
    frame = raw if isinstance(raw, pd.DataFrame) else pd.DataFrame(raw)
    if response not in frame.columns:
        raise DataError(f"response column {response!r} not found")
    clean = frame.dropna()
    n_dropped = len(frame) - len(clean)
    if clean.empty:
        raise DataError("no rows remain after dropping missing values")
    y_col = clean[response]
    if not pd.api.types.is_numeric_dtype(y_col):
        raise DataError(f"response column {response!r} must be numeric")
    y = y_col.to_numpy(dtype=float)

    numeric_cols, categorical = [], {}
    for col in clean.columns:
        if col == response:
            continue
        if pd.api.types.is_numeric_dtype(clean[col]):
            numeric_cols.append(col)
        else:
            categorical[col] = tuple(sorted(clean[col].astype(str).unique()))
    names = list(numeric_cols)
    for col, levels in categorical.items():
        names.extend(f"{col}={lev}" for lev in levels)
    encoder = TabularEncoder(tuple(numeric_cols), categorical, tuple(names))
    X = encoder.encode_frame(clean)

    sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    keep = sd > 0
    dropped_cols = tuple(n for n, k in zip(names, keep) if not k)
    if dropped_cols:
        warnings.warn(f"dropping constant feature columns: {dropped_cols}")
    if not keep.any():
        raise DataError("no non-constant feature columns remain")
    kept_names = tuple(n for n, k in zip(names, keep) if k)
    scaler = FeatureScaler(X[:, keep].mean(axis=0), sd[keep])
    return Dataset(
        scaler.transform(X[:, keep]),
        y,
        kept_names,
        scaler=scaler,
        encoder=encoder,
        n_dropped_rows=n_dropped,
        dropped_columns=dropped_cols,
    )


# ---------------------------------------------------------------------------
# Nearest neighbors
# ---------------------------------------------------------------------------

def _ordered_neighbors(X: np.ndarray, x: np.ndarray) -> tuple:
    d2 = ((X - x) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    return order, np.sqrt(d2[order])


def knn(d: Dataset, x, k: int):
    """Indices and distances of the k nearest training points to x.

    Brute-force Euclidean scan; distances are nondecreasing and ties are
    broken toward the lowest index.
    """
    if not 1 <= k <= d.n:
        raise DataError(f"k must lie in [1, {d.n}], got {k}")
    x = np.asarray(x, dtype=float).ravel()
    order, dist = _ordered_neighbors(d.features, x)
    return order[:k], dist[:k]


class KdTreeIndex:
    """Optional spatial index over a dataset's features.

    Returns exactly the brute-force ordering: results are re-ranked by
    (distance, index) after the tree query.
    """

    def __init__(self, d: Dataset):
        from scipy.spatial import cKDTree

        self._dataset = d
        self._tree = cKDTree(d.features)

    def query(self, x, k: int):
        if not 1 <= k <= self._dataset.n:
            raise DataError(f"k must lie in [1, {self._dataset.n}], got {k}")
        x = np.asarray(x, dtype=float).ravel()
        dist, idx = self._tree.query(x, k=k)
        dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
        # Re-derive distances in the brute-force arithmetic and re-rank so
        # ties resolve identically to knn().
        exact = np.sqrt(((self._dataset.features[idx] - x) ** 2).sum(axis=1))
        rerank = np.lexsort((idx, exact))
        return idx[rerank], exact[rerank]


# ---------------------------------------------------------------------------
# Local weighted least squares
# ---------------------------------------------------------------------------

def tricube_weights(distances, bandwidth: float) -> np.ndarray:
    """Tricube kernel weights (1 - (d/b)^3)^3 for d < b, else 0.

    The 1/b normalization is omitted: weighted least squares is
    invariant to a positive rescaling of all weights.
    """
    if bandwidth <= 0:
        raise DataError(f"bandwidth must be positive, got {bandwidth}")
    u = np.asarray(distances, dtype=float) / bandwidth
    w = np.zeros_like(u)
    inside = u < 1.0
    w[inside] = (1.0 - u[inside] ** 3) ** 3
    return w


@dataclass(frozen=True)
class LoessModel:
    """Degree-1 locally weighted regression with a kNN bandwidth."""

    data: Dataset
    k_loess: int
    kernel: str = "tricube"

    def __post_init__(self):
        p = self.data.n_features + 1
        if not p + 1 <= self.k_loess <= self.data.n:
            raise DataError(
                f"k_loess must lie in [{p + 1}, {self.data.n}] "
                f"for a full-rank degree-1 fit, got {self.k_loess}"
            )
        if self.kernel != "tricube":
            raise DataError(f"unsupported kernel {self.kernel!r}")


@dataclass(frozen=True)
class LocalFit:
    """Coefficients of a local fit in centered coordinates.

    ``coefficients[0]`` is the prediction at the query point and the
    remaining entries are the local slopes.
    """

    coefficients: np.ndarray
    neighbor_indices: np.ndarray
    weights: np.ndarray
    ridged: bool = False
    degenerate: bool = False

    @property
    def prediction(self) -> float:
        return float(self.coefficients[0])


# Relative singular-value cutoff below which a weighted normal matrix is
# treated as rank deficient.
_RCOND = 1e-10


def _local_weights(dist: np.ndarray) -> np.ndarray:
    """Tricube weights with the bandwidth at the farthest neighbor.

    Degenerate geometries (bandwidth zero, or every neighbor exactly on
    the bandwidth boundary) fall back to equal weights.
    """
    b = dist[-1]
    if b > 0:
        w = tricube_weights(dist, b)
        if w.max() > 0:
            return w
    return np.ones_like(dist)


def _fit_point(X, y, x, k):
    """Scalar local fit core. Returns (coef, idx, w, ridged, degenerate)."""
    d2 = ((X - x) ** 2).sum(axis=1)
    idx = np.argsort(d2, kind="stable")[:k]
    dist = np.sqrt(d2[idx])
    w = _local_weights(dist)
    Xc = X[idx] - x
    A = np.concatenate([np.ones((k, 1)), Xc], axis=1)
    p = A.shape[1]
    Aw = A * w[:, None]
    M = Aw.T @ A
    v = Aw.T @ y[idx]
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] > 0 and s[-1] > _RCOND * s[0]:
        coef = np.linalg.solve(M, v)
        if np.isfinite(coef).all():
            return coef, idx, w, False, False
    # With fewer positive-weight points than parameters the degree-1 fit
    # is underdetermined; only the weighted mean is identifiable.
    if (w > 0).sum() >= p:
        jitter = 1e-8 * np.trace(M) / p
        if jitter > 0 and np.isfinite(jitter):
            coef = np.linalg.solve(M + jitter * np.eye(p), v)
            if np.isfinite(coef).all():
                FIT_DIAGNOSTICS["ridged_fits"] += 1
                return coef, idx, w, True, False
    # Weighted mean (degree-0) as the last resort.
    FIT_DIAGNOSTICS["degenerate_fits"] += 1
    total = w.sum()
    mean = float((w * y[idx]).sum() / total) if total > 0 else float(y[idx].mean())
    coef = np.zeros(p)
    coef[0] = mean
    return coef, idx, w, False, True


def fit_local(m: LoessModel, x) -> LocalFit:
    """Weighted degree-1 fit in coordinates centered at the query."""
    x = np.asarray(x, dtype=float).ravel()
    coef, idx, w, ridged, degenerate = _fit_point(
        m.data.features, m.data.response, x, m.k_loess
    )
    return LocalFit(coef, idx, w, ridged=ridged, degenerate=degenerate)


def predict(m: LoessModel, x) -> float:
    """Loess prediction at a single query point."""
    return fit_local(m, x).prediction


def _predict_block(X, y, Q, k):
    """Batched loess predictions of Q given training arrays (X, y).

    Mirrors the scalar fit arithmetic; rank-deficient queries are routed
    through the scalar path so both paths agree.
    """
    n = X.shape[0]
    k = min(k, n)
    preds = np.empty(Q.shape[0])
    # Chunk so the (m, n, d) distance tensor stays modest.
    chunk = max(1, int(4_000_000 // max(n * X.shape[1], 1)))
    for start in range(0, Q.shape[0], chunk):
        q = Q[start : start + chunk]
        m_q = q.shape[0]
        diff = q[:, None, :] - X[None, :, :]
        d2 = (diff ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        dist = np.sqrt(np.take_along_axis(d2, order, axis=1))
        b = dist[:, -1]
        w = np.zeros_like(dist)
        pos = b > 0
        if pos.any():
            u = dist[pos] / b[pos, None]
            inside = u < 1.0
            wi = np.zeros_like(u)
            wi[inside] = (1.0 - u[inside] ** 3) ** 3
            w[pos] = wi
        flat = w.max(axis=1) <= 0
        w[flat] = 1.0
        Xn = X[order] - q[:, None, :]
        A = np.concatenate([np.ones(Xn.shape[:2] + (1,)), Xn], axis=2)
        Aw = A * w[..., None]
        M = np.einsum("mki,mkj->mij", Aw, A)
        v = np.einsum("mki,mk->mi", Aw, y[order])
        s = np.linalg.svd(M, compute_uv=False)
        good = (s[:, 0] > 0) & (s[:, -1] > _RCOND * s[:, 0])
        coef0 = np.empty(m_q)
        if good.any():
            solved = np.linalg.solve(M[good], v[good][..., None])[..., 0]
            finite = np.isfinite(solved).all(axis=1)
            coef0[good] = np.where(finite, solved[:, 0], np.nan)
            if not finite.all():
                bad_idx = np.flatnonzero(good)[~finite]
                good = good.copy()
                good[bad_idx] = False
        for j in np.flatnonzero(~good):
            coef0[j] = _fit_point(X, y, q[j], k)[0][0]
        preds[start : start + chunk] = coef0
    return preds


def predict_many(m: LoessModel, queries) -> np.ndarray:
    """Loess predictions at many query points (batched fast path).

    Produces the same values as calling :func:`predict` per query.
    """
    Q = np.asarray(queries, dtype=float)
    if Q.ndim == 1:
        Q = Q[None, :]
    return _predict_block(m.data.features, m.data.response, Q, m.k_loess)


# ---------------------------------------------------------------------------
# Cross-validated prediction errors and bandwidth selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorSet:
    """Per-training-point prediction errors y_i - fhat^{-i}(x_i), each
    computed without observation i in its own fit or fold."""

    errors: np.ndarray
    scheme: str
    folds: Optional[int]
    seed: int
    fold_assignment: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.errors.size

    @property
    def rmse(self) -> float:
        return float(np.sqrt(np.mean(self.errors ** 2)))


def _fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=int)
    for f, chunk in enumerate(np.array_split(perm, folds)):
        assignment[chunk] = f
    return assignment


def cv_prediction_errors(
    m: LoessModel, scheme: str = "kfold", folds: int = 10, seed: int = 0
) -> ErrorSet:
    """Cross-validated prediction errors of the whole training set.

    ``scheme`` is "loo" or "kfold"; fold membership is a deterministic
    function of the seed. The effective neighborhood shrinks when a
    fold's training part has fewer than k_loess points.
    """
    d = m.data
    n, p = d.n, d.n_features + 1
    X, y = d.features, d.response
    errors = np.empty(n)

    if scheme == "loo":
        if n < 2:
            raise DataError("leave-one-out needs at least two rows")
        preds = np.empty(n)
        for i in range(n):
            mask = np.ones(n, dtype=bool)
            mask[i] = False
            preds[i] = _predict_block(X[mask], y[mask], X[i : i + 1], m.k_loess)[0]
        errors = y - preds
        return ErrorSet(errors, "loo", None, seed)

    if scheme != "kfold":
        raise DataError(f"unknown cross-validation scheme {scheme!r}")
    if n < 2 * (p + 1):
        raise DataError(f"need at least {2 * (p + 1)} rows for k-fold errors, got {n}")
    if not 2 <= folds <= n:
        raise DataError(f"folds must lie in [2, {n}], got {folds}")
    assignment = _fold_assignment(n, folds, seed)
    for f in range(folds):
        test = assignment == f
        train = ~test
        if train.sum() < p:
            raise DataError("cross-validation fold leaves too few training rows")
        preds = _predict_block(X[train], y[train], X[test], m.k_loess)
        errors[test] = y[test] - preds
    return ErrorSet(errors, "kfold", folds, seed, fold_assignment=assignment)


def select_bandwidth(
    d: Dataset,
    k_grid: Sequence[int],
    scheme: str = "kfold",
    folds: int = 10,
    seed: int = 0,
) -> int:
    """Neighborhood size minimizing the cross-validated squared error.

    Numerically tied scores resolve toward the smallest k.
    """
    grid = sorted(set(int(k) for k in k_grid))
    if not grid:
        raise DataError("bandwidth grid must be nonempty")
    p = d.n_features + 1
    for k in grid:
        if not p + 1 <= k <= d.n:
            raise DataError(f"grid value {k} outside [{p + 1}, {d.n}]")
    scores = []
    for k in grid:
        es = cv_prediction_errors(LoessModel(d, k), scheme=scheme, folds=folds, seed=seed)
        scores.append(float((es.errors ** 2).sum()))
    best = min(scores)
    tol = best * 1e-9 + 1e-12
    return next(k for k, s in zip(grid, scores) if s <= best + tol)


# ---------------------------------------------------------------------------
# Ordinary least squares baseline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OlsModel:
    """Global linear fit with intercept.

    ``sigma2`` is the maximum-likelihood error variance SSE / n; the
    unbiased variant SSE / (n - p) enters interval widths.
    """

    coefficients: np.ndarray
    sigma2: float
    xtx_inv: np.ndarray
    n_obs: int
    n_params: int


def fit_ols(d: Dataset) -> OlsModel:
    """Fit ordinary least squares on the encoded features."""
    X = np.concatenate([np.ones((d.n, 1)), d.features], axis=1)
    n, p = X.shape
    if n <= p:
        raise DataError(f"need more than {p} rows to fit {p} coefficients")
    if np.linalg.matrix_rank(X) < p:
        raise DataError("singular design matrix")
    xtx = X.T @ X
    xtx_inv = np.linalg.inv(xtx)
    coef = xtx_inv @ (X.T @ d.response)
    resid = d.response - X @ coef
    return OlsModel(coef, float((resid ** 2).sum() / n), xtx_inv, n, p)


def _augment(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    return np.concatenate([[1.0], x])


def ols_predict(model: OlsModel, x) -> float:
    return float(_augment(x) @ model.coefficients)


def ols_prediction_interval(model: OlsModel, x, beta: float):
    """Classical OLS prediction interval at a query point.

    Half-width is t_{1-(1-beta)/2, n-p} * sqrt( n sigma2 / (n-p) *
    (1 + x*' (X'X)^-1 x*) ) with x* the intercept-augmented query.
    """
    from .distributions import student_t_quantile
    from .intervals import Interval, two_sided_upper

    xa = _augment(x)
    leverage = float(xa @ model.xtx_inv @ xa)
    c = np.sqrt(model.n_obs * model.sigma2 / (model.n_obs - model.n_params) * (1.0 + leverage))
    t = student_t_quantile(two_sided_upper(beta), model.n_obs - model.n_params)
    center = float(xa @ model.coefficients)
    return Interval(center - c * t, center + c * t)


def ols_band(model: OlsModel, queries, beta: float):
    """OLS prediction intervals at many query points."""
    from .distributions import student_t_quantile
    from .intervals import IntervalBand, two_sided_upper

    Q = np.asarray(queries, dtype=float)
    if Q.ndim == 1:
        Q = Q[None, :]
    Xa = np.concatenate([np.ones((Q.shape[0], 1)), Q], axis=1)
    leverage = np.einsum("ij,jk,ik->i", Xa, model.xtx_inv, Xa)
    c = np.sqrt(model.n_obs * model.sigma2 / (model.n_obs - model.n_params) * (1.0 + leverage))
    t = student_t_quantile(two_sided_upper(beta), model.n_obs - model.n_params)
    center = Xa @ model.coefficients
    return IntervalBand(center - c * t, center + c * t)
