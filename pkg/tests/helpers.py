"""Shared builders for the test suite."""

import numpy as np

from raccess import (
    CollisionMatrix,
    ExponentialFading,
    FadingChannel,
    LogisticLogCurve,
    ProblemInstance,
    SaturatingExpCurve,
    SwitchedSystem,
    UniformFading,
    compute_success_requirement,
    constant_policy,
    threshold_policy,
)


def scalar_system(a_open, a_closed, rho=0.8, w=1.0, p=1.0):
    return SwitchedSystem(
        a_closed=a_closed,
        a_open=a_open,
        noise_cov=w,
        lyap_matrix=p,
        decay_rate=rho,
    )


def reference_channel():
    return FadingChannel(
        dist=ExponentialFading(mean=1.0),
        curve=SaturatingExpCurve(kappa=1.5, gain=1.0),
    )


def reference_instance():
    """Two scalar loops on one collision channel; the worked example."""
    systems = (scalar_system(1.1, 0.5), scalar_system(1.0, 0.4))
    ch = reference_channel()
    targets = [compute_success_requirement(s) for s in systems]
    return ProblemInstance(
        systems=systems,
        channels=(ch, ch),
        collision=CollisionMatrix(q=np.array([[0.0, 0.5], [0.5, 0.0]])),
        tx_powers=[1.0, 1.0],
        success_targets=targets,
    )


def random_admissible_system(rng, dims=(2, 3, 4)):
    """Random system whose closed mode certifies the contract.

    Writing A = L^{-T} M L^{T} with P = L L^{T} turns the mode condition
    A' P A <= rho P into a plain spectral-norm bound on M, so scaling M
    places each mode on the intended side: the closed mode strictly
    inside, the open mode strictly outside.
    """
    n = int(rng.choice(dims))
    rho = float(rng.uniform(0.5, 0.95))
    g = rng.standard_normal((n, n))
    p = g @ g.T + n * np.eye(n)
    ell = np.linalg.cholesky(p)
    mc = rng.standard_normal((n, n))
    mc *= rng.uniform(0.4, 0.9) * np.sqrt(rho) / np.linalg.norm(mc, 2)
    mo = rng.standard_normal((n, n))
    mo *= rng.uniform(1.1, 1.6) * np.sqrt(rho) / np.linalg.norm(mo, 2)
    a_c = np.linalg.solve(ell.T, mc @ ell.T)
    a_o = np.linalg.solve(ell.T, mo @ ell.T)
    w = rng.standard_normal((n, n))
    w = w @ w.T
    return SwitchedSystem(
        a_closed=a_c, a_open=a_o, noise_cov=w, lyap_matrix=p, decay_rate=rho
    )


def random_channel(rng):
    if rng.random() < 0.5:
        dist = ExponentialFading(mean=float(rng.uniform(0.4, 2.5)))
    else:
        lo = float(rng.uniform(0.0, 0.8))
        dist = UniformFading(low=lo, high=lo + float(rng.uniform(0.5, 2.0)))
    if rng.random() < 0.5:
        curve = SaturatingExpCurve(
            kappa=float(rng.uniform(0.5, 3.0)), gain=float(rng.uniform(0.5, 2.0))
        )
    else:
        curve = LogisticLogCurve(
            midpoint=float(rng.uniform(0.3, 1.5)),
            steepness=float(rng.uniform(1.0, 4.0)),
        )
    return FadingChannel(dist=dist, curve=curve)


def random_policy(rng, dist):
    """A policy whose transmit and delivery probability are both in (0, 1)."""
    if rng.random() < 0.5:
        if isinstance(dist, UniformFading):
            thr = float(rng.uniform(dist.low, 0.5 * (dist.low + dist.high)))
        else:
            thr = float(rng.uniform(0.0, 1.5 * dist.mean))
        return threshold_policy(thr)
    return constant_policy(float(rng.uniform(0.15, 0.85)))


def random_shared_channel_setup(rng, m):
    """Channels, policies, and a collision matrix for m interfering links."""
    channels = tuple(random_channel(rng) for _ in range(m))
    policies = tuple(random_policy(rng, ch.dist) for ch in channels)
    q = rng.uniform(0.0, 0.8, size=(m, m))
    np.fill_diagonal(q, 0.0)
    return channels, policies, CollisionMatrix(q=q)
