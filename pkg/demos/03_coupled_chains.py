# Lag-one coupled random-walk Metropolis chains for N(0,1), started at N(1,1).
# Each run returns an unbiased H_0; averaging M of them beats the bias floor of
# a length-N chain once M is large enough.
#
#   python3 demos/03_coupled_chains.py

import numpy as np

from parmc.mcmc import coupling_time_tail, gaussian_target, rwm_chain_batch, unbiased_mcmc_batch
from parmc.rng import BatchStream

target = gaussian_target(mean=0.0, var=1.0, init_mean=1.0, init_sd=1.0)
M = 200_000
batch = BatchStream(11, np.arange(M), np.zeros(M))

h, tau, cost = unbiased_mcmc_batch(target, lambda x: x, 0, 2.38, batch)
print(f"mean H_0 = {h.mean():+.4f} +- {h.std() / np.sqrt(M):.4f}   Var(H_0) = {h.var():.1f}")
print(f"meeting time: mean {tau.mean():.2f}, max {tau.max()};  cost in ticks: mean {cost.mean():.2f}")

# geometric tail: P[tau > n] ~ kappa^n
surv, kappa, r2 = coupling_time_tail(tau, with_r2=True)
print(f"kappa = {kappa:.3f}, r^2 = {r2:.4f}")
print("P[tau > n]:", [f"{s:.2e}" for _, s in surv[:10]])

# standard MCMC: ergodic averages have bias ~ 1/N
est = rwm_chain_batch(target, lambda x: x, [10, 30, 100], batch)
for n, row in zip([10, 30, 100], est):
    print(f"N={n:>3}: bias {row.mean():+.4f}  variance {row.var():.4f}")

# break-even processor count for N=100: Var(H_0)/M = bias^2
bias2 = est[2].mean() ** 2
print(f"unbiased beats N=100 once M > {h.var() / bias2:,.0f}")
