import numpy as np
import pytest

from bopi.intervals import tolerance_factor
from bopi.llr import DataError, Dataset, ErrorSet, LoessModel, cv_prediction_errors, predict
from bopi.prediction import (
    AdaptiveNeighborhood,
    FixedNeighborhood,
    a_bopi_band,
    a_bopi_interval,
    conventional_band,
    error_tolerance_interval,
    eset,
    f_bopi_band,
    f_bopi_interval,
    tune_hyperparams,
)


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


def make_setup(n=120, d=2, k_loess=60, noise=0.3, seed=4, hetero=False):
    rng = rng_for(seed)
    X = rng.random((n, d)) * 2
    f = 3 * X[:, 0] + np.sin(2 * X[:, min(1, d - 1)])
    scale = noise * (1 + X[:, 0]) if hetero else noise
    y = f + scale * rng.normal(size=n)
    ds = Dataset.from_numeric(X, y, standardize=False)
    model = LoessModel(ds, k_loess)
    es = cv_prediction_errors(model, scheme="kfold", folds=10, seed=seed)
    return model, es, rng


# --- eset -----------------------------------------------------------------------

def test_eset_full_size_returns_whole_error_set():
    model, es, _ = make_setup(n=40, k_loess=30)
    got = eset(es, model.data, model.data.features[0], 40)
    assert sorted(got.tolist()) == sorted(es.errors.tolist())


def test_eset_at_training_point_includes_own_error():
    model, es, _ = make_setup()
    i = 17
    got = eset(es, model.data, model.data.features[i], 20)
    assert got[0] == es.errors[i]


def test_eset_matches_brute_force_distance_sort():
    model, es, rng = make_setup()
    X = model.data.features
    for q in rng.random((100, X.shape[1])) * 2:
        got = eset(es, model.data, q, 25)
        d2 = ((X - q) ** 2).sum(axis=1)
        order = np.argsort(d2, kind="stable")[:25]
        np.testing.assert_array_equal(got, es.errors[order])


def test_eset_k_bounds():
    model, es, _ = make_setup(n=50, k_loess=30)
    with pytest.raises(DataError):
        eset(es, model.data, model.data.features[0], 19)
    with pytest.raises(DataError):
        eset(es, model.data, model.data.features[0], 51)


# --- error tolerance interval ------------------------------------------------------

def test_error_tolerance_all_zero():
    iv = error_tolerance_interval(np.zeros(25), 0.9, 0.9)
    assert (iv.lower, iv.upper) == (0.0, 0.0)


def test_error_tolerance_matches_factor():
    rng = rng_for(8)
    e = rng.normal(size=20)
    e = (e - e.mean()) / e.std(ddof=1)  # mean 0, sd 1 exactly
    iv = error_tolerance_interval(e, 0.95, 0.9)
    c = tolerance_factor(20, 0.95, 0.9)
    assert iv.upper == pytest.approx(c, abs=1e-9)
    assert iv.lower == pytest.approx(-c, abs=1e-9)


def test_error_tolerance_shift_equivariance():
    rng = rng_for(9)
    e = rng.normal(size=30)
    base = error_tolerance_interval(e, 0.9, 0.8)
    moved = error_tolerance_interval(e + 2.5, 0.9, 0.8)
    assert moved.lower == pytest.approx(base.lower + 2.5, abs=1e-10)
    assert moved.upper == pytest.approx(base.upper + 2.5, abs=1e-10)


def test_error_tolerance_minimum_size():
    with pytest.raises(DataError):
        error_tolerance_interval(np.zeros(19), 0.9, 0.9)


# --- interval constructions ----------------------------------------------------------

def test_f_bopi_decomposition_exact():
    model, es, rng = make_setup()
    cfg = FixedNeighborhood(25, 0.9)
    q = rng.random(2) * 2
    iv = f_bopi_interval(model, es, q, 0.95, cfg)
    tol = error_tolerance_interval(eset(es, model.data, q, 25), 0.95, 0.9)
    fhat = predict(model, q)
    assert iv.lower == fhat + tol.lower
    assert iv.upper == fhat + tol.upper


def test_f_bopi_center_is_bias_corrected():
    model, es, rng = make_setup()
    cfg = FixedNeighborhood(30, 0.9)
    q = rng.random(2) * 2
    iv = f_bopi_interval(model, es, q, 0.9, cfg)
    local_errors = eset(es, model.data, q, 30)
    center = 0.5 * (iv.lower + iv.upper)
    assert center == pytest.approx(predict(model, q) + local_errors.mean(), abs=1e-10)


def test_f_bopi_width_formula():
    model, es, rng = make_setup()
    cfg = FixedNeighborhood(24, 0.8)
    q = rng.random(2) * 2
    iv = f_bopi_interval(model, es, q, 0.9, cfg)
    e = eset(es, model.data, q, 24)
    expected = 2 * tolerance_factor(24, 0.9, 0.8) * e.std(ddof=1)
    assert iv.size == pytest.approx(expected, abs=1e-10)


def test_a_bopi_degenerate_range_equals_fixed():
    model, es, rng = make_setup()
    q = rng.random(2) * 2
    fixed = f_bopi_interval(model, es, q, 0.9, FixedNeighborhood(25, 0.9))
    adaptive, chosen = a_bopi_interval(model, es, q, 0.9, AdaptiveNeighborhood(25, 25, 0.9))
    assert chosen == 25
    assert adaptive.lower == pytest.approx(fixed.lower, abs=1e-12)
    assert adaptive.upper == pytest.approx(fixed.upper, abs=1e-12)


def test_a_bopi_never_wider_than_f_bopi():
    model, es, rng = make_setup()
    for q in rng.random((50, 2)) * 2:
        fixed = f_bopi_interval(model, es, q, 0.95, FixedNeighborhood(30, 0.9))
        adaptive, _ = a_bopi_interval(model, es, q, 0.95, AdaptiveNeighborhood(22, 40, 0.9))
        assert adaptive.size <= fixed.size + 1e-12


def test_a_bopi_matches_exhaustive_scan():
    model, es, rng = make_setup()
    cfg = AdaptiveNeighborhood(20, 45, 0.9)
    for q in rng.random((50, 2)) * 2:
        iv, chosen = a_bopi_interval(model, es, q, 0.9, cfg)
        sizes = {}
        for k in range(20, 46):
            e = eset(es, model.data, q, k)
            sizes[k] = error_tolerance_interval(e, 0.9, 0.9).size
        best = min(sizes.values())
        expected_k = min(k for k, s in sizes.items() if s == best)
        assert chosen == expected_k
        assert iv.size == pytest.approx(best, abs=1e-12)


def test_conventional_band_constant_width_and_rmse():
    model, es, rng = make_setup()
    Q = rng.random((20, 2)) * 2
    band = conventional_band(model, es, Q, 0.95)
    sizes = band.sizes()
    assert np.allclose(sizes, sizes[0])
    rmse = float(np.sqrt(np.mean(es.errors ** 2)))
    assert rmse == pytest.approx(es.rmse)
    from bopi.distributions import std_normal_quantile

    assert sizes[0] == pytest.approx(2 * std_normal_quantile(0.975) * rmse, abs=1e-10)


def test_conventional_band_zero_errors():
    model, es, rng = make_setup()
    zero = ErrorSet(np.zeros(len(es)), "kfold", 10, 0)
    band = conventional_band(model, zero, rng.random((5, 2)), 0.9)
    assert np.allclose(band.sizes(), 0.0)


def test_band_paths_match_single_query_paths():
    model, es, rng = make_setup()
    Q = rng.random((30, 2)) * 2
    fcfg = FixedNeighborhood(26, 0.85)
    fband = f_bopi_band(model, es, Q, 0.9, fcfg)
    acfg = AdaptiveNeighborhood(21, 38, 0.85)
    aband, chosen = a_bopi_band(model, es, Q, 0.9, acfg)
    for j, q in enumerate(Q):
        iv = f_bopi_interval(model, es, q, 0.9, fcfg)
        assert fband[j].lower == pytest.approx(iv.lower, abs=1e-8)
        assert fband[j].upper == pytest.approx(iv.upper, abs=1e-8)
        iva, k = a_bopi_interval(model, es, q, 0.9, acfg)
        assert chosen[j] == k
        assert aband[j].lower == pytest.approx(iva.lower, abs=1e-8)
        assert aband[j].upper == pytest.approx(iva.upper, abs=1e-8)


def test_config_validation_against_model():
    model, es, _ = make_setup(n=120, k_loess=60)
    with pytest.raises(DataError):
        f_bopi_interval(model, es, model.data.features[0], 0.9, FixedNeighborhood(61, 0.9))
    with pytest.raises(DataError):
        a_bopi_interval(model, es, model.data.features[0], 0.9, AdaptiveNeighborhood(20, 61, 0.9))
    # The adaptive bound may pass the regression bandwidth only on request.
    cfg = AdaptiveNeighborhood(20, 80, 0.9, allow_beyond_regression=True)
    iv, _ = a_bopi_interval(model, es, model.data.features[0], 0.9, cfg)
    assert iv.size > 0


def test_config_invariant_errors():
    with pytest.raises(DataError):
        FixedNeighborhood(19, 0.9)
    with pytest.raises(DataError):
        AdaptiveNeighborhood(25, 24, 0.9)
    with pytest.raises(DataError):
        FixedNeighborhood(30, 1.0)


# --- equivariance properties -----------------------------------------------------------

def band_for(model, es, Q, beta, cfg):
    if isinstance(cfg, FixedNeighborhood):
        return f_bopi_band(model, es, Q, beta, cfg)
    return a_bopi_band(model, es, Q, beta, cfg)[0]


@pytest.mark.parametrize("cfg", [FixedNeighborhood(25, 0.9), AdaptiveNeighborhood(20, 35, 0.9)])
def test_translation_and_scale_equivariance(cfg):
    rng = rng_for(12)
    X = rng.random((100, 2))
    y = np.sin(3 * X[:, 0]) + 0.2 * rng.normal(size=100)
    Q = rng.random((15, 2))

    def bands(yy):
        ds = Dataset.from_numeric(X, yy, standardize=False)
        model = LoessModel(ds, 50)
        es = cv_prediction_errors(model, scheme="kfold", folds=10, seed=3)
        return band_for(model, es, Q, 0.9, cfg)

    base = bands(y)
    shifted = bands(y + 7.0)
    np.testing.assert_allclose(shifted.lower, base.lower + 7.0, atol=1e-8)
    np.testing.assert_allclose(shifted.upper, base.upper + 7.0, atol=1e-8)
    scaled = bands(y * 3.0)
    np.testing.assert_allclose(scaled.sizes(), 3.0 * base.sizes(), atol=1e-8)
    # Coverage decisions are unchanged by positive scaling.
    ytest = np.sin(3 * Q[:, 0])
    np.testing.assert_array_equal(scaled.contains(3.0 * ytest), base.contains(ytest))


@pytest.mark.parametrize("beta_pair", [(0.8, 0.9), (0.9, 0.95), (0.95, 0.99)])
def test_width_strictly_increases_with_beta(beta_pair):
    model, es, rng = make_setup()
    Q = rng.random((10, 2)) * 2
    lo_b, hi_b = beta_pair
    for cfg in [FixedNeighborhood(25, 0.9), AdaptiveNeighborhood(20, 30, 0.9)]:
        narrow = band_for(model, es, Q, lo_b, cfg)
        wide = band_for(model, es, Q, hi_b, cfg)
        assert (wide.sizes() > narrow.sizes() - 1e-12).all()


def test_width_strictly_increases_with_gamma():
    model, es, rng = make_setup()
    Q = rng.random((10, 2)) * 2
    widths = []
    for g in [0.7, 0.8, 0.9, 0.99]:
        band = f_bopi_band(model, es, Q, 0.9, FixedNeighborhood(25, g))
        widths.append(band.sizes())
    for a, b in zip(widths, widths[1:]):
        assert (b > a).all()


def test_variable_width_tracks_heteroscedastic_scale():
    # Width should correlate with the true noise scale when it varies.
    rng = rng_for(44)
    n = 1000
    X = rng.random((n, 1)) * 2
    sigma = 0.2 + 0.8 * X[:, 0]
    y = np.sin(X[:, 0]) + sigma * rng.normal(size=n)
    ds = Dataset.from_numeric(X, y, standardize=False)
    model = LoessModel(ds, 100)
    es = cv_prediction_errors(model, scheme="kfold", folds=10, seed=0)
    Q = rng.random((200, 1)) * 2
    band, _ = a_bopi_band(model, es, Q, 0.9, AdaptiveNeighborhood(30, 50, 0.9))
    true_scale = 0.2 + 0.8 * Q[:, 0]
    sizes = band.sizes()
    rs = np.corrcoef(np.argsort(np.argsort(sizes)), np.argsort(np.argsort(true_scale)))[0, 1]
    assert rs > 0.5
    conv = conventional_band(model, es, Q, 0.9)
    assert np.allclose(conv.sizes(), conv.sizes()[0])


# --- tuner --------------------------------------------------------------------------

def tuning_data(n=300, seed=5):
    rng = rng_for(seed)
    X = rng.random((n, 2)) * 2
    y = 2 * X[:, 0] + np.sin(2 * X[:, 1]) + 0.3 * rng.normal(size=n)
    ds = Dataset.from_numeric(X, y, standardize=False)
    return LoessModel(ds, 60)


def test_tuner_postconditions_and_structure():
    model = tuning_data()
    result = tune_hyperparams(model, 0.9, variant="adaptive", seed=2)
    assert result.feasible
    assert result.coverage >= 0.9
    accepted = [s for s in result.history if s.accepted]
    gammas = [s.gamma for s in accepted]
    assert all(b <= a for a, b in zip(gammas, gammas[1:]))
    # Neighborhood bounds never shrink along the accepted path.
    klos = [s.k_lo for s in accepted]
    assert all(b >= a for a, b in zip(klos, klos[1:]))


def test_tuner_fixed_variant():
    model = tuning_data()
    result = tune_hyperparams(model, 0.9, variant="fixed", seed=2)
    assert result.feasible
    assert result.config.k >= 20
    assert result.coverage >= 0.9


def grid_search_oracle(model, beta, variant, seed):
    from bopi.llr import cv_prediction_errors
    from bopi.prediction import NeighborErrorTable, _adaptive_scan

    es = cv_prediction_errors(model, scheme="kfold", folds=10, seed=seed)
    table = NeighborErrorTable(model.data, es, model.data.features, min(model.k_loess, model.data.n))
    e = es.errors
    gammas = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99]
    best = None
    for g in gammas:
        for k in range(20, 61, 5):
            if variant == "adaptive":
                if k + 10 > model.k_loess:
                    continue
                sizes = tuple(range(k, k + 11))
            else:
                sizes = (k,)
            center, half, _ = _adaptive_scan(table, sizes, beta, g)
            cov = float(((e >= center - half) & (e <= center + half)).mean())
            m = float(2 * half.mean())
            if cov >= beta and (best is None or m < best):
                best = m
    return best


@pytest.mark.parametrize("variant", ["fixed", "adaptive"])
@pytest.mark.parametrize("beta", [0.9, 0.95])
def test_tuner_close_to_grid_search(variant, beta):
    model = tuning_data()
    result = tune_hyperparams(model, beta, variant=variant, seed=7)
    oracle = grid_search_oracle(model, beta, variant, seed=7)
    assert result.feasible and oracle is not None
    assert result.mis <= 1.05 * oracle


def test_tuner_infeasible_fallback():
    # Bimodal errors at +/-5 give local samples with mean ~0 and sd ~5;
    # at beta=0.3 every tolerance factor stays below 1, so no error is
    # ever inside its own interval and no candidate can reach coverage.
    rng = rng_for(3)
    X = rng.random((60, 1))
    y = np.where(np.arange(60) % 2 == 0, 5.0, -5.0)
    ds = Dataset.from_numeric(X, y, standardize=False)
    model = LoessModel(ds, 30)
    with pytest.warns(UserWarning, match="coverage constraint"):
        result = tune_hyperparams(model, 0.3, variant="adaptive", k_init=(20, 22), seed=1)
    assert not result.feasible
    assert result.config.gamma == 0.99
    assert (result.config.k_min, result.config.k_max) == (20, 22)
