"""Slot-level Monte Carlo of the shared collision channel and the loops.

Per slot, every sensor draws its fade, applies its policy, and the
transmitted packets survive pairwise Bernoulli collision events and a
fade-dependent decode draw. The resulting delivery sequence switches
each loop between its closed and open dynamics.

Fades, transmit decisions, collision events, and decode events do not
depend on the plant states, so ``run_simulation`` precomputes them in
fixed-size vectorized chunks and hands the only sequential part, the
switched-state recursion, to the kernel backend. ``simulate_slot`` is
the one-slot reference sampler of the same process (its stream layout
differs from the chunked scheme, so the two match statistically rather
than sample-for-sample).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import Quadrature, derive_rng, link_success_probability

__all__ = [
    "UnstableSimulationError",
    "SimConfig",
    "SimMetrics",
    "GammaRateRecord",
    "DriftRecord",
    "simulate_slot",
    "run_simulation",
    "empirical_gamma_rate_check",
    "lyapunov_drift_check",
]

_CHUNK = 65536
_NORM_LIMIT = 1e12


class UnstableSimulationError(RuntimeError):
    """Raised when a simulated state trajectory leaves the stable range."""


def _psd_factor(w):
    """Factor F with F F' = W, valid for singular PSD covariances."""
    eigvals, eigvecs = np.linalg.eigh(w)
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


@dataclass(frozen=True)
class SimConfig:
    """Inputs fixing one reproducible simulation run.

    Parameters
    ----------
    instance : ProblemInstance
    policies : sequence of AccessPolicy
    horizon : int
        Number of slots.
    seed : int
        Base seed; identical configs reproduce bit-identical metrics on
        the same kernel backend.
    burn_in : int or None
        Slots dropped from every metric (defaults to horizon // 10).
    thin : int
        Keep every thin-th slot in the trajectory record (0 disables).
    """

    instance: object
    policies: tuple
    horizon: int
    seed: int
    burn_in: int = None
    thin: int = 0

    def __post_init__(self):
        policies = tuple(self.policies)
        if len(policies) != self.instance.m:
            raise ValueError(
                f"{len(policies)} policies for {self.instance.m} loops"
            )
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        burn = self.horizon // 10 if self.burn_in is None else int(self.burn_in)
        if not 0 <= burn < self.horizon:
            raise ValueError(
                f"burn_in must lie in [0, horizon), got {burn} for horizon {self.horizon}"
            )
        if self.thin < 0:
            raise ValueError(f"thin must be >= 0, got {self.thin}")
        factors = tuple(_psd_factor(s.noise_cov) for s in self.instance.systems)
        object.__setattr__(self, "policies", policies)
        object.__setattr__(self, "burn_in", burn)
        object.__setattr__(self, "_noise_factors", factors)


@dataclass(frozen=True)
class SimMetrics:
    """Post-burn-in averages of one run, plus the optional thinned trace."""

    empirical_cost: np.ndarray
    empirical_tx_rate: np.ndarray
    empirical_success_rate: np.ndarray
    horizon: int
    burn_in: int
    trajectory: tuple = None


@dataclass(frozen=True)
class GammaRateRecord:
    link: int
    empirical: float
    analytic: float
    z_score: float


@dataclass(frozen=True)
class DriftRecord:
    system: int
    sample_mean: float
    bound: float
    std_error: float
    z_score: float
    ok: bool


def _transmission_outcomes(policies, channels, qmat, rng, count):
    """Draw one block: fades, transmit decisions, and deliveries.

    Draw order is fixed (fades per link, transmit uniforms, collision
    uniforms per ordered pair, decode uniforms) so a seed pins the block.
    """
    m = len(policies)
    h = np.empty((m, count))
    for i in range(m):
        h[i] = channels[i].dist.sample(rng, size=count)
    u_tx = rng.random((m, count))
    u_coll = rng.random((m, m, count))
    u_dec = rng.random((m, count))

    tx = np.empty((m, count), dtype=bool)
    for i in range(m):
        pol = policies[i]
        if pol.kind == "threshold":
            tx[i] = h[i] >= pol.threshold
        else:
            tx[i] = u_tx[i] < pol.rate

    q = qmat.q
    gamma = np.empty((m, count), dtype=bool)
    for i in range(m):
        alive = tx[i].copy()
        for j in range(m):
            if j == i:
                continue
            alive &= ~(tx[j] & (u_coll[j, i] < q[j, i]))
        gamma[i] = alive & (u_dec[i] < channels[i].curve.value(h[i]))
    return h, tx, gamma


def _draw_gamma(policies, channels, qmat, rng, count):
    """Transmit and delivery indicators for ``count`` slots, chunked."""
    tx_parts = []
    g_parts = []
    done = 0
    while done < count:
        c = min(_CHUNK, count - done)
        _, tx, gamma = _transmission_outcomes(policies, channels, qmat, rng, c)
        tx_parts.append(tx)
        g_parts.append(gamma)
        done += c
    return np.concatenate(tx_parts, axis=1), np.concatenate(g_parts, axis=1)


def simulate_slot(states, cfg, rng):
    """Advance every loop by one slot; reference single-slot sampler.

    Parameters
    ----------
    states : sequence of ndarray
        Current per-loop states.
    cfg : SimConfig
    rng : numpy.random.Generator

    Returns
    -------
    (list of ndarray, ndarray, ndarray)
        Next states, transmit indicators, delivery indicators.
    """
    inst = cfg.instance
    _, tx, gamma = _transmission_outcomes(
        cfg.policies, inst.channels, inst.collision, rng, 1
    )
    next_states = []
    for i, sys in enumerate(inst.systems):
        z = rng.standard_normal(sys.dim)
        w = cfg._noise_factors[i] @ z
        a = sys.a_closed if gamma[i, 0] else sys.a_open
        next_states.append(a @ np.asarray(states[i], dtype=float) + w)
    return next_states, tx[:, 0].astype(int), gamma[:, 0].astype(int)


def run_simulation(cfg):
    """Simulate the full horizon from x_0 = 0 and average the quadratic cost.

    Returns
    -------
    SimMetrics

    Raises
    ------
    UnstableSimulationError
        If any state norm passes 1e12 (reported with system and slot).
    """
    inst = cfg.instance
    m = inst.m
    rng = derive_rng(cfg.seed)
    tx, gamma = _draw_gamma(
        cfg.policies, inst.channels, inst.collision, rng, cfg.horizon
    )

    costs = np.empty(m)
    tx_rates = np.empty(m)
    success_rates = np.empty(m)
    traj_rows = [] if cfg.thin else None

    for i, sys in enumerate(inst.systems):
        n = sys.dim
        z = rng.standard_normal((cfg.horizon, n))
        noise = z @ cfg._noise_factors[i].T
        states = _kernels.state_recursion(
            sys.a_closed,
            sys.a_open,
            gamma[i].astype(np.uint8),
            noise,
            np.zeros(n),
        )
        with np.errstate(over="ignore", invalid="ignore"):
            norm_sq = np.einsum("kn,kn->k", states, states)
            escaped = ~np.isfinite(norm_sq) | (norm_sq > _NORM_LIMIT**2)
            if np.any(escaped):
                k = int(np.argmax(escaped))
                raise UnstableSimulationError(
                    f"loop {i} state norm passed {_NORM_LIMIT:g} at slot "
                    f"{k + 1} of {cfg.horizon}; its access policy does not "
                    "stabilize it"
                )
            v = np.einsum("kn,nl,kl->k", states, sys.lyap_matrix, states)
        costs[i] = float(np.mean(v[cfg.burn_in :]))
        tx_rates[i] = float(np.mean(tx[i, cfg.burn_in :]))
        success_rates[i] = float(np.mean(gamma[i, cfg.burn_in :]))
        if traj_rows is not None:
            for k in range(cfg.thin - 1, cfg.horizon, cfg.thin):
                traj_rows.append(
                    (k + 1, i, float(v[k]), int(tx[i, k]), int(gamma[i, k]))
                )

    if traj_rows is not None:
        traj_rows.sort()
    return SimMetrics(
        empirical_cost=costs,
        empirical_tx_rate=tx_rates,
        empirical_success_rate=success_rates,
        horizon=cfg.horizon,
        burn_in=cfg.burn_in,
        trajectory=tuple(traj_rows) if traj_rows is not None else None,
    )


def empirical_gamma_rate_check(cfg, n_slots, seed=None):
    """Compare slot-frequency deliveries against the analytic product form.

    Returns one record per link with the empirical frequency over
    ``n_slots``, the quadrature value, and the binomial z-score of their
    difference.
    """
    inst = cfg.instance
    rng = derive_rng(cfg.seed if seed is None else seed)
    _, gamma = _draw_gamma(
        cfg.policies, inst.channels, inst.collision, rng, n_slots
    )
    records = []
    for i in range(inst.m):
        emp = float(np.mean(gamma[i]))
        ana = link_success_probability(
            cfg.policies, inst.channels, inst.collision, i, Quadrature()
        )
        se = math.sqrt(max(ana * (1.0 - ana), 0.0) / n_slots)
        if se == 0.0:
            z = 0.0 if emp == ana else math.inf
        else:
            z = (emp - ana) / se
        records.append(
            GammaRateRecord(link=i, empirical=emp, analytic=ana, z_score=z)
        )
    return records


def lyapunov_drift_check(cfg, x_probe, n_replications, seed=None):
    """Monte Carlo check of the expected one-step contract at probe states.

    Requires the policies to meet every link's delivery requirement
    (verified analytically first); the contract then bounds the
    conditional mean of the next quadratic value by
    rho V(x) + tr(P W) at every state.

    Parameters
    ----------
    cfg : SimConfig
    x_probe : sequence of ndarray
        One probe state per loop.
    n_replications : int
    seed : int or None
        Defaults to cfg.seed.

    Returns
    -------
    list of DriftRecord
        Sample mean, bound, standard error, z-score, and the 4-sigma
        verdict per loop.
    """
    inst = cfg.instance
    if len(x_probe) != inst.m:
        raise ValueError(f"{len(x_probe)} probe states for {inst.m} loops")
    for i in range(inst.m):
        prob = link_success_probability(
            cfg.policies, inst.channels, inst.collision, i, Quadrature()
        )
        if prob < inst.success_targets[i] - 1e-9:
            raise ValueError(
                f"policies deliver {prob:.6f} on link {i}, below its "
                f"requirement {inst.success_targets[i]:.6f}; the drift bound "
                "does not apply"
            )
    rng = derive_rng(cfg.seed if seed is None else seed)
    _, gamma = _draw_gamma(
        cfg.policies, inst.channels, inst.collision, rng, n_replications
    )
    records = []
    for i, sys in enumerate(inst.systems):
        x = np.asarray(x_probe[i], dtype=float).reshape(-1)
        if x.shape[0] != sys.dim:
            raise ValueError(
                f"probe state for loop {i} has length {x.shape[0]}, expected {sys.dim}"
            )
        z = rng.standard_normal((n_replications, sys.dim))
        noise = z @ cfg._noise_factors[i].T
        base_closed = sys.a_closed @ x
        base_open = sys.a_open @ x
        nxt = np.where(gamma[i][:, None], base_closed, base_open) + noise
        v_next = np.einsum("rn,nl,rl->r", nxt, sys.lyap_matrix, nxt)
        mean = float(np.mean(v_next))
        se = float(np.std(v_next, ddof=1) / math.sqrt(n_replications))
        v_now = float(x @ sys.lyap_matrix @ x)
        bound = sys.decay_rate * v_now + float(
            np.trace(sys.lyap_matrix @ sys.noise_cov)
        )
        if se == 0.0:
            z_score = 0.0 if mean <= bound else math.inf
        else:
            z_score = (mean - bound) / se
        records.append(
            DriftRecord(
                system=i,
                sample_mean=mean,
                bound=bound,
                std_error=se,
                z_score=z_score,
                ok=mean <= bound + 4.0 * se,
            )
        )
    return records
