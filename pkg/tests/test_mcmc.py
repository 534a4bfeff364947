import math

import numpy as np
import pytest
from scipy import integrate, stats

from parmc.costsim import DomainError
from parmc.mcmc import (
    CoupledState,
    FaithfulnessError,
    NonTerminationError,
    coupled_kernel_step,
    coupled_kernel_step_batch,
    coupling_time_tail,
    flat_target,
    gaussian_target,
    h_estimator,
    mcmc_estimate,
    reflection_coupled_proposal,
    reflection_coupled_proposal_batch,
    rwm_chain_batch,
    rwm_step,
    rwm_step_batch,
    unbiased_mcmc_batch,
    unbiased_mcmc_run,
)
from parmc.rng import BatchStream, Stream
from parmc.tails import FitError

STD = gaussian_target()


def ident(x):
    return x


def lanes(seed, n):
    return BatchStream(seed, np.arange(n), np.zeros(n))


# --- random-walk Metropolis ------------------------------------------------


def test_flat_target_always_moves():
    s = Stream(1)
    x1 = rwm_step(0.5, flat_target(), 2.0, s)
    assert x1 == 0.5 + 2.0 * Stream(1).normal_at(0)
    assert s.cursor == 2


def test_acceptance_rate_matches_quadrature():
    sigma = 2.38
    oracle, _ = integrate.quad(lambda z: stats.norm.pdf(z) * min(1.0, math.exp(-0.5 * (sigma * z) ** 2)), -10, 10)
    x1 = rwm_step_batch(np.zeros(100_000), STD, sigma, lanes(3, 100_000))
    assert abs(np.mean(x1 != 0.0) - oracle) <= 0.01


def test_tiny_sigma_is_stuck():
    assert rwm_step(1.0, STD, 1e-300, Stream(0)) == 1.0


def test_rwm_rejects_bad_inputs():
    with pytest.raises(DomainError):
        rwm_step(0.0, STD, 0.0, Stream(0))
    bad = gaussian_target()
    with pytest.raises(DomainError):
        rwm_step(math.inf, bad, 1.0, Stream(0))


def test_mcmc_estimate_deterministic_kernel():
    start_zero = flat_target(0.0, 1e-300)
    out = mcmc_estimate(start_zero, ident, 3, Stream(0), kernel=lambda x, s: round(x) + 1)
    assert out.value == 2 and out.cost == 3


def test_mcmc_estimate_n1_and_batch_agreement():
    s = Stream(4, 2, 0)
    one = mcmc_estimate(STD, ident, 1, s)
    x0 = STD.initial_sampler(Stream(4, 2, 0), 0)
    assert one.value == rwm_step(x0, STD, 2.38, Stream(4, 2, 0, start=2))
    b = BatchStream(4, np.arange(5), np.zeros(5))
    est = rwm_chain_batch(STD, ident, [1, 7, 30], b)
    for j in range(5):
        for r, n in enumerate([1, 7, 30]):
            assert est[r, j] == pytest.approx(mcmc_estimate(STD, ident, n, b.lane(j)).value, abs=1e-15)


def test_standard_mcmc_bias_decays_like_one_over_n():
    est = rwm_chain_batch(STD, ident, [10, 100], lanes(5, 100_000))
    b10, b100 = est.mean(axis=1)
    assert 0 < b100 <= 0.05
    assert 5 <= b10 / b100 <= 20


# --- proposal coupling -----------------------------------------------------


def test_equal_states_always_couple():
    b = lanes(6, 10_000)
    _, _, eq = reflection_coupled_proposal_batch(np.ones(10_000), np.ones(10_000), 1.3, b)
    assert eq.all()


def test_scalar_and_batch_proposals_agree():
    b = lanes(7, 4)
    xp, yp, eq = reflection_coupled_proposal_batch(np.zeros(4), np.full(4, 2.0), 1.0, b)
    for j in range(4):
        assert reflection_coupled_proposal(0.0, 2.0, 1.0, b.lane(j)) == (xp[j], yp[j], eq[j])


def test_meeting_probability_and_y_marginal():
    n = 1_000_000
    _, yp, eq = reflection_coupled_proposal_batch(np.zeros(n), np.full(n, 2.0), 1.0, lanes(8, n))
    assert abs(eq.mean() - 0.3173) <= 0.002
    assert stats.kstest(yp, stats.norm(2, 1).cdf).pvalue > 1e-3


# --- coupled kernel --------------------------------------------------------


def test_met_state_stays_met():
    st = CoupledState(0.3, 0.3, 5, True)
    for i in range(50):
        st = coupled_kernel_step(st, STD, 2.38, Stream(9, 0, i))
        assert st.y == st.z


def test_faithfulness_violation_raises():
    # flagged as met but far apart: the step cannot bring them together
    st = CoupledState(0.0, 50.0, 3, True)
    with pytest.raises(FaithfulnessError):
        coupled_kernel_step(st, STD, 1.0, Stream(0))


def test_flat_target_meets_iff_proposals_equal():
    n = 20_000
    b = lanes(10, n)
    y, z = np.zeros(n), np.full(n, 1.5)
    y1, z1 = coupled_kernel_step_batch(y, z, flat_target(), 1.0, b, index=2)
    _, _, eq = reflection_coupled_proposal_batch(y, z, 1.0, b, index=2)
    assert np.array_equal(y1 == z1, eq)


def _rwm_one_step_law(x, sigma):
    """Rejection mass and CDF of the moved part for one RWM step on N(0,1)."""

    def accept(xp):
        return min(1.0, math.exp(-0.5 * (xp * xp - x * x)))

    def density(xp):
        return stats.norm.pdf(xp, x, sigma) * accept(xp)

    moved, _ = integrate.quad(density, -np.inf, np.inf)
    grid = np.linspace(x - 9 * sigma, x + 9 * sigma, 4001)
    pdf = np.array([density(g) for g in grid])
    cdf = integrate.cumulative_trapezoid(pdf, grid, initial=0.0) / moved
    return 1.0 - moved, lambda t: np.interp(t, grid, cdf)


@pytest.mark.parametrize("which,start", [(0, 0.0), (1, 2.0)])
def test_coupled_marginals_match_rwm(which, start):
    n, sigma = 1_000_000, 2.38
    y1, z1 = coupled_kernel_step_batch(np.zeros(n), np.full(n, 2.0), STD, sigma, lanes(11, n))
    out = (y1, z1)[which]
    reject, cdf = _rwm_one_step_law(start, sigma)
    stayed = out == start
    se = math.sqrt(reject * (1 - reject) / n)
    assert abs(stayed.mean() - reject) <= 3.3 * se
    assert stats.kstest(out[~stayed], cdf).pvalue > 1e-3


# --- unbiased estimator ----------------------------------------------------


def test_scalar_run_equals_batch_lane():
    b = BatchStream(12, np.arange(40), np.zeros(40))
    for k in (0, 1, 3):
        h, tau, cost = unbiased_mcmc_batch(STD, ident, k, 2.38, b)
        for j in range(40):
            run = unbiased_mcmc_run(STD, ident, k, 2.38, b.lane(j))
            assert (run.h_k, run.tau, run.cost) == (h[j], tau[j], cost[j])


def test_h_estimator_sum_limits():
    fy, fz = [7.0, 1.0, 4.0], [2.0, 5.0]
    assert h_estimator(fy, fz, 1, 0) == 7.0
    assert h_estimator(fy, fz, 2, 0) == 7.0 + (1.0 - 2.0)
    assert h_estimator(fy, fz, 3, 0) == 7.0 + (1.0 - 2.0) + (4.0 - 5.0)
    assert h_estimator(fy, fz, 2, 1) == 1.0


def test_cost_accounting():
    run = unbiased_mcmc_run(STD, ident, 0, 2.38, Stream(14, 0, 3))
    assert run.cost == 2 * run.tau - 1
    run5 = unbiased_mcmc_run(STD, ident, 20, 2.38, Stream(14, 0, 3))
    assert run5.cost == 2 * run.tau - 1 + (21 - run.tau)


def test_argument_validation():
    with pytest.raises(DomainError):
        unbiased_mcmc_run(STD, ident, -1, 2.38, Stream(0))
    with pytest.raises(NonTerminationError):
        unbiased_mcmc_batch(STD, ident, 0, 2.38, lanes(0, 1000), max_joint_steps=1)


def _discrete_expectation(f, nu, horizon):
    """E[H_0] for a lag-coupled lazy-free walk on {0,1,2}, by enumeration.

    Marginal kernel: jump uniformly to one of the other two states (the
    Metropolis kernel of the uniform target).  Joint kernel from y != z:
    with probability 1/2 both jump to the third state, otherwise they
    swap, which is the maximal coupling of the two rows.
    """
    total, missing = 0.0, 0.0

    def walk(p, ys, zs):
        nonlocal total, missing
        t = len(ys) - 1
        if ys[-1] == zs[-1]:
            total += p * h_estimator([f[s] for s in ys], [f[s] for s in zs], t, 0)
            return
        if t >= horizon:
            missing += p
            return
        y, z = ys[-1], zs[-1]
        third = 3 - y - z
        walk(p / 2, ys + [third], zs + [third])
        walk(p / 2, ys + [z], zs + [y])

    for y0 in range(3):
        for z0 in range(3):
            for y1 in range(3):
                if y1 == y0:
                    continue
                walk(nu[y0] * nu[z0] / 2, [y0, y1], [z0])
    return total, missing


def test_discrete_enumeration_oracle():
    f = (1.0, -1.0, 0.0)
    total, missing = _discrete_expectation(f, (0.6, 0.3, 0.1), horizon=12)
    # |H_0| <= 1 + 2 (tau - 1) on unmet paths; their mass halves every step
    slack = sum(2.0 ** -(t - 12) * missing * (2 * t) for t in range(13, 80))
    assert abs(total - np.mean(f)) <= slack
    assert missing < 1e-3


def test_coupling_time_tail():
    with pytest.raises(FitError) as info:
        coupling_time_tail([3] * 50)
    assert info.value.survival == [(1, 1.0), (2, 1.0), (3, 0.0)]
    u = Stream(15).uniforms(100_000)
    geo = 1 + np.floor(np.log(u) / math.log(0.5)).astype(int)
    surv, kappa = coupling_time_tail(geo)
    assert kappa == pytest.approx(0.5, abs=0.02)
    assert surv[0] == (1, pytest.approx(0.5, abs=0.01))
