"""Why tolerance intervals can stand in for prediction intervals.

For a normal sample, the two-sided beta-content prediction interval has
half-width t * sqrt(1 + 1/n) * sd, while the beta-content gamma-coverage
tolerance interval has Howe's half-width c * sd. This demo prints the
smallest sample sizes at which the tolerance interval contains the
prediction interval, then sweeps the size ratio across n to show it
stays above one for gamma >= 0.7.

Run: python demos/01_tolerance_vs_prediction.py
"""

import numpy as np

from bopi import min_n_for_containment, prediction_factor, tolerance_factor, tolerance_prediction_ratio

GRID = [20, 40, 50, 80, 100, 350]

print("Half-width factors for a sample of n=20, beta=0.95:")
print(f"  prediction factor        : {prediction_factor(20, 0.95):.4f}")
for gamma in (0.55, 0.7, 0.9, 0.99):
    c = tolerance_factor(20, 0.95, gamma)
    print(f"  tolerance factor (g={gamma:4}): {c:.4f}")

print("\nSmallest n (on a coarse grid) with tolerance >= prediction:")
print("gamma    beta=0.8  beta=0.9  beta=0.95  beta=0.99")
for gamma in (0.55, 0.60, 0.65, 0.70):
    cells = [min_n_for_containment(b, gamma, GRID) for b in (0.8, 0.9, 0.95, 0.99)]
    print(f"{gamma:5}   " + "  ".join(f"{c!s:>8}" for c in cells))

print("\nWorst-case ratio over beta in [0.01, 0.99] at gamma = 0.7:")
betas = np.round(np.arange(0.01, 1.0, 0.01), 2)
for n in (20, 50, 200, 1000, 10_000):
    worst = min(tolerance_prediction_ratio(n, float(b), 0.7) for b in betas)
    bar = "#" * int((worst - 1.0) * 2000)
    print(f"  n={n:>6}: min ratio = {worst:.5f}  {bar}")
print("\nA ratio >= 1 everywhere means the tolerance interval is a safe,")
print("slightly conservative substitute for the prediction interval.")
