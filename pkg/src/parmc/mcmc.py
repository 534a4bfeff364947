"""Random-walk Metropolis, its reflection-maximal coupling, and the
lag-coupled unbiased estimator.

Draw layout on a replication stream (one Philox block per slot):

* block 0, 1 -- initial states ``Y_0`` and ``Z_0``;
* block ``2t``   -- the standard normal behind the proposal that produces ``Y_t``;
* block ``2t+1`` -- a uniform pair ``(u_couple, u_accept)``.

Single-chain steps ignore ``u_couple``.  The scalar functions and the
vectorised ``*_batch`` engines address the same blocks, so lane ``j`` of
a batch reproduces the scalar run bit for bit.  Ticks: one per
single-chain kernel transition, two per joint (unmet) coupled step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .costsim import CostedSample, DomainError
from .rng import BatchStream, Stream
from .tails import FitError, fit_tail_exponent

DEFAULT_SIGMA = 2.38
DEFAULT_MAX_JOINT_STEPS = 10**6
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class NonTerminationError(RuntimeError):
    """The coupled chains did not meet within the joint-step budget."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class FaithfulnessError(AssertionError):
    """Chains that had met drifted apart."""


@dataclass(frozen=True)
class Target:
    """Target log-density (vectorised) and an initial-state sampler.

    ``initial_sampler(stream, index)`` must accept a :class:`Stream` or a
    :class:`BatchStream` and return a float or an array accordingly.
    """

    log_density: Callable
    initial_sampler: Callable
    mean: Optional[float] = None


def gaussian_target(mean=0.0, var=1.0, init_mean=1.0, init_sd=1.0) -> Target:
    """N(mean, var) target started from N(init_mean, init_sd**2)."""
    inv = 1.0 / var

    def log_density(x):
        return -0.5 * inv * (x - mean) ** 2

    def initial(stream, index):
        return init_mean + init_sd * stream.normal_at(index)

    return Target(log_density, initial, mean=mean)


def flat_target(init_mean=0.0, init_sd=1.0) -> Target:
    def log_density(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def initial(stream, index):
        return init_mean + init_sd * stream.normal_at(index)

    return Target(log_density, initial)


# ---------------------------------------------------------------------------
# pure kernels on arrays of pre-drawn randomness


def _std_normal_log_pdf(z):
    return -0.5 * z * z - _LOG_SQRT_2PI


def _rwm(x, log_density, sigma, z, u_accept):
    prop = x + sigma * z
    log_ratio = log_density(prop) - log_density(x)
    accept = np.log(u_accept) <= log_ratio
    return np.where(accept, prop, x)


def _reflection_proposals(x, y, sigma, z, u):
    x_prop = x + sigma * z
    delta = (x - y) / sigma
    equal = np.log(u) + _std_normal_log_pdf(z) <= _std_normal_log_pdf(z + delta)
    y_prop = np.where(equal, x_prop, y - sigma * z)
    return x_prop, y_prop, equal


def _coupled_step(y, z, log_density, sigma, zn, u_couple, u_accept):
    y_prop, z_prop, _ = _reflection_proposals(y, z, sigma, zn, u_couple)
    log_u = np.log(u_accept)
    y_new = np.where(log_u <= log_density(y_prop) - log_density(y), y_prop, y)
    z_new = np.where(log_u <= log_density(z_prop) - log_density(z), z_prop, z)
    return y_new, z_new


# ---------------------------------------------------------------------------
# scalar API


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0):
        raise DomainError(f"sigma must be positive, got {sigma!r}")


def rwm_step(x: float, target: Target, sigma: float, stream: Stream) -> float:
    """One RWM transition; consumes two blocks from ``stream``."""
    _check_sigma(sigma)
    if not np.isfinite(target.log_density(x)):
        raise DomainError(f"log density is not finite at current state {x!r}")
    c = stream.cursor
    stream.cursor += 2
    z = stream.normal_at(c)
    _, u_accept = _pair(stream, c + 1)
    return float(_rwm(x, target.log_density, sigma, z, u_accept))


def _pair(stream: Stream, index: int):
    from .rng import _uniform_pair

    u1, u2 = _uniform_pair(stream.seed, stream.processor, stream.replication, index)
    return float(u1), float(u2)


def reflection_coupled_proposal(x: float, y: float, sigma: float, stream: Stream):
    """Maximal-reflection coupled draws from N(x, sigma^2) and N(y, sigma^2).

    Returns ``(x_prop, y_prop, proposals_equal)``; consumes two blocks.
    """
    _check_sigma(sigma)
    c = stream.cursor
    stream.cursor += 2
    z = stream.normal_at(c)
    u, _ = _pair(stream, c + 1)
    xp, yp, eq = _reflection_proposals(x, y, sigma, z, u)
    return float(xp), float(yp), bool(eq)


def reflection_coupled_proposal_batch(x, y, sigma, batch: BatchStream, index: int = 0):
    """Vectorised proposal coupling using blocks ``index`` and ``index + 1``."""
    _check_sigma(sigma)
    z = batch.normal_at(index)
    u, _ = batch.uniform_pair_at(index + 1)
    return _reflection_proposals(np.asarray(x, float), np.asarray(y, float), sigma, z, u)


@dataclass
class CoupledState:
    y: float
    z: float
    t: int
    met: bool = False
    y_history: List[float] = field(default_factory=list)
    z_history: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class CouplingRun:
    tau: int
    h_k: float
    cost: int


def coupled_kernel_step(state: CoupledState, target: Target, sigma: float, stream: Stream,
                        keep_history: bool = True) -> CoupledState:
    """Advance ``(Y_t, Z_{t-1})`` to ``(Y_{t+1}, Z_t)``; consumes two blocks."""
    _check_sigma(sigma)
    c = stream.cursor
    stream.cursor += 2
    zn = stream.normal_at(c)
    u_couple, u_accept = _pair(stream, c + 1)
    y_new, z_new = _coupled_step(state.y, state.z, target.log_density, sigma, zn, u_couple, u_accept)
    y_new, z_new = float(y_new), float(z_new)
    if state.met and y_new != z_new:
        raise FaithfulnessError(f"met chains separated at t={state.t + 1}: {y_new!r} != {z_new!r}")
    yh = state.y_history + [y_new] if keep_history else state.y_history
    zh = state.z_history + [z_new] if keep_history else state.z_history
    return CoupledState(y_new, z_new, state.t + 1, state.met or y_new == z_new, yh, zh)


def h_estimator(f_y, f_z, tau: int, k: int) -> float:
    """``f(Y_k) + sum_{i=k+1}^{tau-1} (f(Y_i) - f(Z_{i-1}))`` from recorded f-values."""
    corr = 0.0
    for i in range(k + 1, tau):
        corr += float(f_y[i]) - float(f_z[i - 1])
    return float(f_y[k]) + corr


def unbiased_mcmc_run(target: Target, f: Callable, k: int, sigma: float, stream: Stream,
                      max_joint_steps: int = DEFAULT_MAX_JOINT_STEPS) -> CouplingRun:
    """One draw of the lag-one coupled estimator H_k."""
    if k < 0:
        raise DomainError("k must be non-negative")
    _check_sigma(sigma)
    y0 = float(target.initial_sampler(stream, 0))
    z0 = float(target.initial_sampler(stream, 1))
    stream.cursor = 2
    y1 = rwm_step(y0, target, sigma, stream)
    state = CoupledState(y1, z0, 1, y1 == z0, [y0, y1], [z0])
    tau = 1 if state.met else None
    cost = 1
    joint = 0
    while not (state.met and state.t >= k + 1):
        was_met = state.met
        if not was_met:
            joint += 1
            if joint > max_joint_steps:
                raise NonTerminationError(f"no meeting after {max_joint_steps} joint steps", state)
        state = coupled_kernel_step(state, target, sigma, stream)
        cost += 1 if was_met else 2
        if tau is None and state.met:
            tau = state.t
    fy = f(np.asarray(state.y_history))
    fz = f(np.asarray(state.z_history))
    return CouplingRun(tau=tau, h_k=h_estimator(fy, fz, tau, k), cost=cost)


def mcmc_estimate(target: Target, f: Callable, n: int, stream: Stream, sigma: float = DEFAULT_SIGMA,
                  kernel: Optional[Callable] = None) -> CostedSample:
    """Ergodic average of ``f`` over ``Phi_1..Phi_n`` (no burn-in), cost ``n`` ticks.

    ``kernel(x, stream)`` replaces the RWM transition when given.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    x = float(target.initial_sampler(stream, 0))
    stream.cursor = 2
    acc = 0.0
    for _ in range(n):
        x = rwm_step(x, target, sigma, stream) if kernel is None else kernel(x, stream)
        acc += float(f(x))
    return CostedSample(acc / n, n)


def coupling_time_tail(taus, with_r2: bool = False):
    """Empirical survival ``[(n, P[tau > n])]`` and the fitted geometric rate.

    The rate is ``exp(slope)`` of the log-survival line.  Degenerate input
    raises :class:`~parmc.tails.FitError` with the survival list attached
    as ``exc.survival``.
    """
    taus = np.asarray(taus, dtype=np.int64)
    if taus.size == 0:
        raise DomainError("no coupling times")
    ns = np.arange(1, int(taus.max()) + 1)
    ordered = np.sort(taus)
    tail = 1.0 - np.searchsorted(ordered, ns, side="right") / taus.size
    surv = [(int(n), float(s)) for n, s in zip(ns, tail)]
    try:
        slope, r2 = fit_tail_exponent(taus)
    except FitError as exc:
        exc.survival = surv
        raise
    kappa = float(np.exp(slope))
    return (surv, kappa, r2) if with_r2 else (surv, kappa)


# ---------------------------------------------------------------------------
# vectorised engines


def rwm_step_batch(x, target: Target, sigma: float, batch: BatchStream, index: int = 2):
    """One RWM transition per lane from blocks ``index`` and ``index + 1``."""
    _check_sigma(sigma)
    _, ua = batch.uniform_pair_at(index + 1)
    return _rwm(np.asarray(x, dtype=float), target.log_density, sigma, batch.normal_at(index), ua)


def coupled_kernel_step_batch(y, z, target: Target, sigma: float, batch: BatchStream, index: int = 2):
    """One coupled transition per lane from blocks ``index`` and ``index + 1``."""
    _check_sigma(sigma)
    uc, ua = batch.uniform_pair_at(index + 1)
    return _coupled_step(np.asarray(y, dtype=float), np.asarray(z, dtype=float), target.log_density,
                         sigma, batch.normal_at(index), uc, ua)


def rwm_chain_batch(target: Target, f: Callable, ns, batch: BatchStream, sigma: float = DEFAULT_SIGMA):
    """Standard MCMC estimates for every ``n`` in ``ns`` from one chain per lane.

    Returns an array of shape ``(len(ns), lanes)`` whose row ``r`` is
    ``mcmc_estimate(..., n=ns[r])`` for each lane.
    """
    _check_sigma(sigma)
    ns = sorted(int(n) for n in ns)
    if ns[0] < 1:
        raise DomainError("chain lengths must be positive")
    out = np.empty((len(ns), len(batch)))
    x = np.asarray(target.initial_sampler(batch, 0), dtype=float)
    acc = np.zeros(len(batch))
    r = 0
    for i in range(1, ns[-1] + 1):
        z = batch.normal_at(2 * i)
        _, ua = batch.uniform_pair_at(2 * i + 1)
        x = _rwm(x, target.log_density, sigma, z, ua)
        acc += f(x)
        while r < len(ns) and ns[r] == i:
            out[r] = acc / i
            r += 1
    return out


def unbiased_mcmc_batch(target: Target, f: Callable, k: int, sigma: float, batch: BatchStream,
                        max_joint_steps: int = DEFAULT_MAX_JOINT_STEPS):
    """Vectorised :func:`unbiased_mcmc_run`; returns ``(h_k, tau, cost)`` arrays.

    Faithfulness is asserted for every lane at every step.
    """
    if k < 0:
        raise DomainError("k must be non-negative")
    _check_sigma(sigma)
    n = len(batch)
    logp = target.log_density
    y0 = np.asarray(target.initial_sampler(batch, 0), dtype=float)
    z = np.asarray(target.initial_sampler(batch, 1), dtype=float)
    _, ua = batch.uniform_pair_at(3)
    y = _rwm(y0, logp, sigma, batch.normal_at(2), ua)
    met = y == z
    tau = np.where(met, 1, 0).astype(np.int64)
    cost = np.ones(n, dtype=np.int64)
    fyk = f(y0) if k == 0 else (f(y) if k == 1 else np.zeros(n))
    fyk = np.array(fyk, dtype=float)
    corr = np.zeros(n)
    if k == 0:
        corr += np.where(met, 0.0, f(y) - f(z))
    t = 1
    idx = np.flatnonzero(~met | (t < k + 1))
    while idx.size:
        t += 1
        if t - 1 > max_joint_steps:
            raise NonTerminationError(
                f"{idx.size} lanes unmet after {max_joint_steps} joint steps",
                {"t": t, "lanes": idx},
            )
        sub = batch.subset(idx)
        zn = sub.normal_at(2 * t)
        uc, ua = sub.uniform_pair_at(2 * t + 1)
        yy, zz, mm = y[idx], z[idx], met[idx]
        y_new, z_new = _coupled_step(yy, zz, logp, sigma, zn, uc, ua)
        same = y_new == z_new
        if np.any(mm & ~same):
            raise FaithfulnessError(f"met chains separated at t={t}")
        cost[idx] += np.where(mm, 1, 2)
        newly = ~mm & same
        tau[idx[newly]] = t
        met_new = mm | same
        if t == k:
            fyk[idx] = f(y_new)
        if t >= k + 1:
            still = ~met_new
            corr[idx[still]] += f(y_new[still]) - f(z_new[still])
        y[idx], z[idx], met[idx] = y_new, z_new, met_new
        idx = idx[~met_new | (t < k + 1)]
    return fyk + corr, tau, cost


def unbiased_batch_sampler(target: Target, f: Callable, k: int = 0, sigma: float = DEFAULT_SIGMA):
    """Adapter for :func:`parmc.costsim.run_farm_batch`."""

    def sampler(batch):
        h, _, cost = unbiased_mcmc_batch(target, f, k, sigma, batch)
        return h, cost

    return sampler
