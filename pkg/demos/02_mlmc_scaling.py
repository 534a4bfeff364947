# Four MLMC estimators on the synthetic level family (alpha=1, beta=2, gamma=1).
# Total cost grows like eps^-2 for Giles and rMLMC but eps^-3 for the naive
# one-sample-per-level farm; the worst processor under rMLMC waits ~eps^-4/3.
#
#   python3 demos/02_mlmc_scaling.py

import numpy as np

from parmc import metrics
from parmc.experiments.fit import fit_loglog
from parmc.experiments.scenarios import build_mlmc_run, run_farm_for
from parmc.mlmc import giles_levels, synthetic_family
from parmc.rng import derive_seed

fam = synthetic_family(1, 2, 1)
eps_grid = [0.2, 0.1, 0.05, 0.025]

for eps in eps_grid:
    L = giles_levels(eps, fam.alpha, fam.c1)
    print(f"eps={eps:<6} L={L}  bias={1 - fam.partial_sum(L):.5f}  (eps/2={eps / 2})")

reps = 200
for name in ("giles", "naive", "rmlmc", "truncated"):
    total, worst = [], []
    for i, eps in enumerate(eps_grid):
        plan, sampler, is_batch, var = build_mlmc_run(name, fam, eps)
        ms = [metrics(run_farm_for(plan, sampler, is_batch, derive_seed(3, i, r))) for r in range(reps)]
        total.append(np.mean([m.total_cost for m in ms]))
        worst.append(np.mean([m.worst_case for m in ms]))
    inv = [1 / e for e in eps_grid]
    print(f"{name:>9}: total-cost slope {fit_loglog(inv, total).slope:5.2f}   "
          f"worst-case slope {fit_loglog(inv, worst).slope:5.2f}")
