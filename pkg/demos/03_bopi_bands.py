"""Bounded-oscillation intervals versus the constant-width baseline.

On heteroscedastic data the constant-width band built from a global
RMSE over-covers where the noise is small and under-covers where it is
large. The fixed and adaptive bounded-oscillation bands rebuild a
tolerance interval from the nearest cross-validated errors at each
query, so their width tracks the local noise level.

Run: python demos/03_bopi_bands.py
"""

import numpy as np

from bopi import (
    AdaptiveNeighborhood,
    Dataset,
    FixedNeighborhood,
    LoessModel,
    a_bopi_band,
    conventional_band,
    coverage,
    cv_prediction_errors,
    f_bopi_band,
    mis,
)

rng = np.random.Generator(np.random.PCG64(7))
n = 1200
x = rng.random(n) * 4
noise_sd = 0.1 + 0.5 * x          # noise grows along x
y = np.sin(2 * x) + noise_sd * rng.normal(size=n)

train, test = slice(0, 800), slice(800, None)
data = Dataset.from_numeric(x[train, None], y[train], standardize=False)
model = LoessModel(data, 100)
errors = cv_prediction_errors(model, scheme="kfold", folds=10, seed=1)

queries = x[test, None]
y_test = y[test]
beta = 0.9

bands = {
    "conventional": conventional_band(model, errors, queries, beta),
    "f-bopi": f_bopi_band(model, errors, queries, beta, FixedNeighborhood(40, 0.9)),
    "a-bopi": a_bopi_band(model, errors, queries, beta, AdaptiveNeighborhood(30, 50, 0.9))[0],
}

print(f"held-out evaluation at beta = {beta} (400 points)\n")
print(f"{'method':<14}{'coverage':>9}{'MIS':>8}{'sd(size)':>10}")
for name, band in bands.items():
    mean_size, sd_size = mis(band)
    print(f"{name:<14}{coverage(band, y_test):>9.3f}{mean_size:>8.3f}{sd_size:>10.3f}")

print("\ncoverage by noise regime (low x = quiet, high x = loud):")
quiet = x[test] < 2
for name, band in bands.items():
    c_quiet = band.contains(y_test)[quiet].mean()
    c_loud = band.contains(y_test)[~quiet].mean()
    print(f"  {name:<14} quiet {c_quiet:.3f}   loud {c_loud:.3f}")
print("\nThe constant-width band hides a quiet/loud imbalance; the")
print("bounded-oscillation bands keep both regimes near the target.")
