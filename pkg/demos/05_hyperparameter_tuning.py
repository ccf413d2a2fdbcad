"""Tuning (gamma, neighborhood) under the coverage constraint.

The tuner alternates two greedy loops: grow the error neighborhood
while training coverage stays at or above beta and the mean interval
size improves, then walk gamma down while the same holds. The result is
the narrowest feasible candidate visited.

Run: python demos/05_hyperparameter_tuning.py
"""

import numpy as np

from bopi import Dataset, LoessModel, tune_hyperparams

rng = np.random.Generator(np.random.PCG64(11))
n = 400
X = rng.random((n, 3)) * 2
y = 2 * X[:, 0] - X[:, 1] + np.sin(3 * X[:, 2]) + 0.4 * rng.normal(size=n)
model = LoessModel(Dataset.from_numeric(X, y, standardize=False), 80)

for variant in ("fixed", "adaptive"):
    result = tune_hyperparams(model, beta=0.9, variant=variant, seed=5)
    print(f"--- {variant} neighborhood ---")
    print(f"chosen config      : {result.config}")
    print(f"training coverage  : {result.coverage:.3f} (constraint >= 0.9)")
    print(f"training mean size : {result.mis:.3f}")
    print("search path (accepted steps):")
    for step in result.history:
        if step.accepted:
            span = f"k={step.k_lo}" if step.k_lo == step.k_hi else f"k=[{step.k_lo},{step.k_hi}]"
            print(
                f"  gamma={step.gamma:<5} {span:<12} "
                f"coverage={step.coverage:.3f} mis={step.mis:.3f}"
            )
    print()
