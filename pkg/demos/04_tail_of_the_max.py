# Completion time is the max of per-processor costs.  Light tails give a
# slowly growing max; a Pareto tail gives a power of n.
#
#   python3 demos/04_tail_of_the_max.py

import numpy as np

from parmc.experiments.scenarios import simulate_maxima
from parmc.tails import (
    ExactExponential,
    Normal,
    RegularVarying,
    SubExponential,
    SubGaussian,
    bound_expected_max,
    empirical_max_quantile,
    evt_quantile,
)

reps = 10_000
for n in (10, 100, 1000):
    mx = simulate_maxima("exponential", n, reps, seed=n)
    h_n = np.sum(1 / np.arange(1, n + 1))
    print(f"Exp(1)  n={n:>4}: E[max] {mx.mean():.3f}  H_n {h_n:.3f}  bound {bound_expected_max(SubExponential(1, mean=1), n):.3f}"
          f"  median {empirical_max_quantile(mx, 0.5):.3f} vs Gumbel {evt_quantile(ExactExponential(1), n, 0.5):.3f}")

for n in (10, 100, 1000):
    mx = simulate_maxima("normal", n, reps, seed=n + 1)
    print(f"N(0,1)  n={n:>4}: E[max] {mx.mean():.3f}  bound {bound_expected_max(SubGaussian(1.0), n):.3f}"
          f"  median {np.median(mx):.3f} vs EVT {evt_quantile(Normal(0, 1), n, 0.5):.3f}")

for n in (10, 100, 1000):
    mx = simulate_maxima("pareto", n, reps, seed=n + 2, pareto_gamma=2.0)
    print(f"Pareto2 n={n:>4}: median {np.median(mx):8.3f} vs Frechet {evt_quantile(RegularVarying(1, 2), n, 0.5):8.3f}")
