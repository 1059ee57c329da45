"""Dual subgradient design of channel-aware access policies.

The design problem minimizes total expected transmit power subject to
each link's delivery probability meeting its contract requirement c_i.
The product form of the delivery probability separates after taking
logs and introducing auxiliary shares beta:

    log c_i <= log beta_ii + sum_{j != i} log(1 - beta_ji),
    beta_ii <= E[alpha_i q],    beta_ji >= E[alpha_j] q_ji,

with beta boxed inside (0, 1). Dualizing all three families with
multipliers lambda_i >= 0 (contracts) and nu_ij >= 0 (shares) makes the
Lagrangian separable: each sensor's best alpha is a fade threshold set
by its prices, each beta entry has a closed-form boxed minimizer, and
the duals ascend along subgradients with diminishing steps a/(b+t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import MonteCarlo, Quadrature, expected_policy_rate, expected_policy_success
from .policy import PricingVector, threshold_from_prices
from .serialize import write_csv

__all__ = [
    "DivergenceError",
    "ProblemInstance",
    "DualState",
    "StepSchedule",
    "StopRule",
    "IterationTrace",
    "OptimizationResult",
    "beta_update",
    "primal_policies",
    "subgradient",
    "dual_step",
    "stepsize",
    "lagrangian_value",
    "run_algorithm1",
]

DEFAULT_BOX = (1e-3, 1.0 - 1e-3)


class DivergenceError(RuntimeError):
    """Raised when the dual iterates blow up (requirements likely infeasible)."""


@dataclass(frozen=True)
class ProblemInstance:
    """One shared-channel design problem.

    Parameters
    ----------
    systems : list of SwitchedSystem
    channels : list of FadingChannel
    collision : CollisionMatrix
    tx_powers : array_like
        Positive per-transmission energy prices p_i.
    success_targets : array_like
        Delivery requirements c_i, strictly inside (0, 1).
    """

    systems: tuple
    channels: tuple
    collision: object
    tx_powers: np.ndarray
    success_targets: np.ndarray

    def __post_init__(self):
        systems = tuple(self.systems)
        channels = tuple(self.channels)
        m = len(systems)
        if m < 1:
            raise ValueError("need at least one loop")
        if len(channels) != m:
            raise ValueError(f"{len(channels)} channels for {m} systems")
        if self.collision.m != m:
            raise ValueError(
                f"collision matrix is {self.collision.m}x{self.collision.m} for m={m}"
            )
        p = np.asarray(self.tx_powers, dtype=float).reshape(-1).copy()
        c = np.asarray(self.success_targets, dtype=float).reshape(-1).copy()
        if p.shape[0] != m or c.shape[0] != m:
            raise ValueError("tx_powers and success_targets must have one entry per loop")
        if np.any(p <= 0.0):
            raise ValueError("tx_powers must be positive")
        if np.any((c <= 0.0) | (c >= 1.0)):
            raise ValueError("success_targets must lie strictly inside (0, 1)")
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "tx_powers", p)
        object.__setattr__(self, "success_targets", c)

    @property
    def m(self):
        return len(self.systems)


@dataclass(frozen=True)
class DualState:
    """Dual multipliers and the matching auxiliary shares at one period."""

    lam: np.ndarray
    nu: np.ndarray
    beta: np.ndarray
    iteration: int = 0


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing stepsize eps(t) = a / (b + t).

    Any positive constants keep the schedule square-summable with a
    divergent sum; the defaults are sized so the dual variables can cover
    the distance from the cold start to a typical fixed point within a
    few hundred periods.
    """

    a: float = 30.0
    b: float = 20.0

    def __post_init__(self):
        if not self.a > 0.0 or not self.b > 0.0:
            raise ValueError("stepsize constants must be positive")


@dataclass(frozen=True)
class StopRule:
    """Combined stopping and divergence guards for the dual loop.

    Convergence requires both the worst constraint slack
    max_i (c_i - P(gamma_i = 1)) <= ``slack_tol`` and the sup-norm change
    of the duals over the last ``window`` periods <= ``dual_change_tol``.
    """

    max_periods: int = 5000
    slack_tol: float = 0.0
    dual_change_tol: float = 1e-3
    window: int = 100
    divergence_bound: float = 1e6


class IterationTrace:
    """Append-only per-period log of the dual loop."""

    def __init__(self, m):
        self.m = m
        self.columns = ["period", "stepsize", "objective"]
        self.columns += [f"lambda_{i}" for i in range(m)]
        self.columns += [f"nu_{i}_{j}" for i in range(m) for j in range(m)]
        self.columns += [f"beta_{i}_{j}" for i in range(m) for j in range(m)]
        self.columns += [f"rate_{i}" for i in range(m)]
        self.columns += [f"success_{i}" for i in range(m)]
        self.columns += [f"link_prob_{i}" for i in range(m)]
        self.columns += [f"slack_{i}" for i in range(m)]
        self.rows = []

    def append(self, period, eps, objective, lam, nu, beta, rates, success, link, slack):
        row = [int(period), float(eps), float(objective)]
        row += [float(v) for v in lam]
        row += [float(v) for v in nu.reshape(-1)]
        row += [float(v) for v in beta.reshape(-1)]
        row += [float(v) for v in rates]
        row += [float(v) for v in success]
        row += [float(v) for v in link]
        row += [float(v) for v in slack]
        self.rows.append(tuple(row))

    def column(self, name):
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path):
        write_csv(path, self.columns, self.rows)


@dataclass(frozen=True)
class OptimizationResult:
    policies: tuple
    state: DualState
    trace: IterationTrace
    converged: bool
    periods: int


def stepsize(t, schedule=StepSchedule()):
    """eps(t) = a / (b + t); summable squares, divergent sum."""
    if t < 0:
        raise ValueError(f"period must be >= 0, got {t}")
    return schedule.a / (schedule.b + t)


def beta_update(lam, nu, box=DEFAULT_BOX):
    """Boxed closed-form minimizers of the Lagrangian over the shares.

    Entry conventions follow the delivery product: beta[i, i] is link i's
    own-delivery share, beta[j, i] the share of link i surviving sensor
    j. The per-entry objectives are convex, so clipping the stationary
    point to the box is exact:

        beta[i, i] = clip(lam[i] / nu[i, i]),
        beta[j, i] = clip(1 - lam[i] / nu[i, j]),   j != i,

    with a zero dual in the denominator clipping to the upper and lower
    edge respectively.
    """
    lam = np.asarray(lam, dtype=float)
    nu = np.asarray(nu, dtype=float)
    m = lam.shape[0]
    lo, hi = box
    if not 0.0 < lo < hi < 1.0:
        raise ValueError(f"box must satisfy 0 < lo < hi < 1, got [{lo:g}, {hi:g}]")
    beta = np.empty((m, m))
    for i in range(m):
        beta[i, i] = hi if nu[i, i] == 0.0 else min(max(lam[i] / nu[i, i], lo), hi)
        for j in range(m):
            if j == i:
                continue
            if nu[i, j] == 0.0:
                beta[j, i] = lo
            else:
                beta[j, i] = min(max(1.0 - lam[i] / nu[i, j], lo), hi)
    return beta


def primal_policies(state, inst):
    """Per-sensor threshold policies minimizing the priced Lagrangian.

    Sensor i is rewarded nu[i, i] per unit of own delivery and charged
    its transmit power plus sum_{j != i} nu[j, i] q[i, j] for the expected
    erasures it inflicts, so it transmits exactly on the fades where the
    reward covers the charge.
    """
    m = inst.m
    q = inst.collision.q
    policies = []
    for i in range(m):
        interference = 0.0
        for j in range(m):
            if j != i:
                interference += state.nu[j, i] * q[i, j]
        pr = PricingVector(
            own_price=float(state.nu[i, i]),
            interference_price=float(interference),
            tx_power=float(inst.tx_powers[i]),
        )
        policies.append(threshold_from_prices(pr, inst.channels[i]))
    return tuple(policies)


def subgradient(state, measured_success, measured_rate, inst):
    """Dual subgradients at the current primal measurements.

    Returns
    -------
    (ndarray, ndarray)
        s_lambda with s_lambda[i] = log c_i - log beta_ii
        - sum_{j != i} log(1 - beta_ji), and s_nu with
        s_nu[i, i] = beta_ii - E[alpha_i q] and
        s_nu[i, j] = E[alpha_j] q_ji - beta_ji for j != i.
    """
    m = inst.m
    beta = state.beta
    q = inst.collision.q
    succ = np.asarray(measured_success, dtype=float)
    rate = np.asarray(measured_rate, dtype=float)
    s_lam = np.empty(m)
    s_nu = np.empty((m, m))
    for i in range(m):
        acc = math.log(inst.success_targets[i]) - math.log(beta[i, i])
        s_nu[i, i] = beta[i, i] - succ[i]
        for j in range(m):
            if j == i:
                continue
            acc -= math.log1p(-beta[j, i])
            s_nu[i, j] = rate[j] * q[j, i] - beta[j, i]
        s_lam[i] = acc
    return s_lam, s_nu


def dual_step(state, s_lambda, s_nu, eps):
    """Projected ascent step; multipliers stay in the nonnegative orthant."""
    lam = np.maximum(state.lam + eps * np.asarray(s_lambda, dtype=float), 0.0)
    nu = np.maximum(state.nu + eps * np.asarray(s_nu, dtype=float), 0.0)
    return DualState(lam=lam, nu=nu, beta=state.beta, iteration=state.iteration + 1)


def lagrangian_value(measured_rate, measured_success, beta, lam, nu, inst):
    """Evaluate the full Lagrangian at given primal measurements and duals."""
    m = inst.m
    beta = np.asarray(beta, dtype=float)
    if np.any((beta <= 0.0) | (beta >= 1.0)):
        raise ValueError("beta entries must lie strictly inside (0, 1)")
    rate = np.asarray(measured_rate, dtype=float)
    succ = np.asarray(measured_success, dtype=float)
    q = inst.collision.q
    value = float(np.dot(inst.tx_powers, rate))
    for i in range(m):
        gap = math.log(inst.success_targets[i]) - math.log(beta[i, i])
        for j in range(m):
            if j != i:
                gap -= math.log1p(-beta[j, i])
        value += lam[i] * gap
        value += nu[i, i] * (beta[i, i] - succ[i])
        for j in range(m):
            if j != i:
                value += nu[i, j] * (rate[j] * q[j, i] - beta[j, i])
    return value


def _initial_state(inst, box):
    m = inst.m
    lam = np.ones(m)
    nu = np.full((m, m), 0.1)
    for i in range(m):
        nu[i, i] = inst.tx_powers[i] + 1.0
    return DualState(lam=lam, nu=nu, beta=beta_update(lam, nu, box), iteration=0)


def _measure(policies, inst, mode, seed, period):
    """Per-sensor E[alpha] and E[alpha q] for one period."""
    m = inst.m
    rates = np.empty(m)
    succ = np.empty(m)
    for i in range(m):
        if isinstance(mode, MonteCarlo):
            # One independent stream per (period, sensor) measurement.
            mode_i = MonteCarlo(mode.samples, seed + period * m + i)
        else:
            mode_i = mode
        rates[i] = expected_policy_rate(policies[i], inst.channels[i], mode_i)
        succ[i] = expected_policy_success(policies[i], inst.channels[i], mode_i)
    return rates, succ


def run_algorithm1(
    inst,
    schedule=StepSchedule(),
    mode=Quadrature(),
    stop=StopRule(),
    seed=0,
    box=DEFAULT_BOX,
):
    """Run the dual subgradient loop until the stop rule fires.

    Each period prices the sensors with the current duals, measures the
    resulting transmit and delivery rates (deterministic quadrature or
    seeded Monte Carlo), refreshes the shares, logs everything, and steps
    the duals along the subgradient. Convergence requires the returned
    policies' worst constraint slack <= ``stop.slack_tol`` together with
    a settled dual trajectory; the loop aborts if any multiplier passes
    ``stop.divergence_bound``, which signals an infeasible or marginal
    set of requirements.

    Returns
    -------
    OptimizationResult
        Policies from the stopping period (they satisfy the slack test
        when ``converged``), the final dual state, and the full trace.
    """
    m = inst.m
    q = inst.collision.q
    state = _initial_state(inst, box)
    trace = IterationTrace(m)
    history = []
    policies = primal_policies(state, inst)

    for t in range(stop.max_periods):
        eps = stepsize(t, schedule)
        beta = beta_update(state.lam, state.nu, box)
        state = DualState(lam=state.lam, nu=state.nu, beta=beta, iteration=t)
        policies = primal_policies(state, inst)
        rates, succ = _measure(policies, inst, mode, seed, t)

        link = np.empty(m)
        for i in range(m):
            prob = succ[i]
            for j in range(m):
                if j != i:
                    prob *= 1.0 - rates[j] * q[j, i]
            link[i] = prob
        slack = inst.success_targets - link
        objective = float(np.dot(inst.tx_powers, rates))
        trace.append(t, eps, objective, state.lam, state.nu, beta, rates, succ, link, slack)

        history.append((state.lam.copy(), state.nu.copy()))
        if len(history) > stop.window + 1:
            history.pop(0)
        if len(history) > stop.window:
            lam_old, nu_old = history[0]
            dual_change = max(
                float(np.max(np.abs(state.lam - lam_old))),
                float(np.max(np.abs(state.nu - nu_old))),
            )
            if dual_change <= stop.dual_change_tol and float(np.max(slack)) <= stop.slack_tol:
                return OptimizationResult(
                    policies=policies,
                    state=state,
                    trace=trace,
                    converged=True,
                    periods=t + 1,
                )

        s_lam, s_nu = subgradient(state, succ, rates, inst)
        state = dual_step(state, s_lam, s_nu, eps)
        top = max(float(np.max(state.lam)), float(np.max(state.nu)))
        if top > stop.divergence_bound:
            raise DivergenceError(
                f"dual variables reached {top:g} at period {t}; the delivery "
                "requirements are likely infeasible for this channel and "
                "collision configuration"
            )

    return OptimizationResult(
        policies=policies,
        state=state,
        trace=trace,
        converged=False,
        periods=stop.max_periods,
    )
