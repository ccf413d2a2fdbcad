"""Degree-1 loess with a k-nearest-neighbor bandwidth.

Fits noisy data from a smooth 1-D function, selects the neighborhood
size by 10-fold cross-validation, and prints the fit against the truth
on a coarse grid.

Run: python demos/02_loess_fit.py
"""

import numpy as np

from bopi import Dataset, LoessModel, cv_prediction_errors, predict_many, select_bandwidth

rng = np.random.Generator(np.random.PCG64(42))
n = 400
x = np.sort(rng.random(n)) * 10
y = np.sin(x) + 0.1 * x + 0.25 * rng.normal(size=n)
data = Dataset.from_numeric(x[:, None], y, standardize=False)

grid = [10, 20, 40, 80, 160, 320]
k = select_bandwidth(data, grid, folds=10, seed=0)
print(f"bandwidth grid {grid} -> selected k_loess = {k}")

model = LoessModel(data, k)
errors = cv_prediction_errors(model, scheme="kfold", folds=10, seed=0)
print(f"cross-validated RMSE: {errors.rmse:.4f} (noise sd was 0.25)")

print("\n  x     truth   loess")
for xq in np.linspace(0.5, 9.5, 10):
    fhat = predict_many(model, [[xq]])[0]
    truth = np.sin(xq) + 0.1 * xq
    print(f"{xq:5.2f}  {truth:7.3f}  {fhat:7.3f}")

too_small, too_big = grid[0], grid[-1]
for kk in (too_small, too_big):
    rmse = cv_prediction_errors(LoessModel(data, kk), folds=10, seed=0).rmse
    print(f"\nk={kk:>3}: CV RMSE {rmse:.4f}" + ("  (undersmoothing)" if kk == too_small else "  (oversmoothing)"))
