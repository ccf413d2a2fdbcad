"""Seeded Monte Carlo benchmark on the Friedman #1 process.

Each iteration draws a fresh sample, trains on two thirds, and scores
the three interval methods on the held-out third. Shrink n_sim or n for
a quicker pass; the run is bit-reproducible for a fixed seed.

Run: python demos/04_friedman_benchmark.py
"""

from bopi import DgpSpec, SimHyper, run_simulation

dgp = DgpSpec("friedman1", n=900)
hyper = SimHyper(k_loess=100, k_fixed=40, k_min=30, k_max=50, cv_folds=10)

result = run_simulation(
    dgp,
    n_sim=10,
    betas=0.95,
    gammas=[0.8, 0.99],
    hyper=hyper,
    seed=2024,
)

print("friedman1, n=900, 10 iterations, beta=0.95\n")
print(f"{'method':<14}{'gamma':>6}{'coverage%':>11}{'(sd)':>7}{'MIS':>8}")
for row in result.aggregate_rows():
    print(
        f"{row['method']:<14}{row['gamma']:>6}"
        f"{100 * row['coverage_mean']:>11.2f}{100 * row['coverage_sd']:>7.2f}"
        f"{row['mis_mean']:>8.3f}"
    )

print("\nRaising gamma widens the bounded-oscillation bands and lifts")
print("their coverage; the conventional band ignores gamma entirely.")
