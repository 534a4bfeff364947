# Virtual processor farm: plan, run, and read the three cost norms.
#
#   python3 demos/01_virtual_farm.py

import numpy as np

from parmc import FarmPlan, metrics, plan_biased, plan_unbiased, run_farm, run_farm_batch
from parmc.costsim import CostedSample
from parmc.rng import Stream

# how many processors / replications does an unbiased sampler with variance 4 need for eps=0.1?
print(plan_unbiased(4.0, 0.1))          # no processor cap -> 400 x 1
print(plan_unbiased(4.0, 0.1, 100))     # 100 processors   -> 100 x 4
print(plan_biased(3.0, 0.1, 40))        # bias eats a quarter of the MSE budget -> 40 x 10


# a toy sampler: value ~ N(0,1), cost ~ 1 + Geometric(1/2) ticks
def toy(stream: Stream) -> CostedSample:
    z = stream.normal()
    extra = int(np.floor(np.log(stream.uniform()) / np.log(0.5)))
    return CostedSample(z, 1 + extra)


ledger = run_farm(FarmPlan(8, 5), toy, seed=2024)
print(ledger.per_processor_costs[:3])
m = metrics(ledger)
print("total (L1):", m.total_cost, " worst (Linf):", m.worst_case, " average:", m.average)

# same farm, vectorised: lane k is processor k // n, replication k % n
def toy_batch(b):
    z = b.normal_at(0)
    extra = np.floor(np.log(b.uniform_at(1)) / np.log(0.5)).astype(np.int64)
    return z, 1 + extra

# the scalar sampler used blocks 0 and 1 in order, so this reproduces it exactly
print(run_farm_batch(FarmPlan(8, 5), toy_batch, seed=2024) == ledger)
