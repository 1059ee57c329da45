"""Block-fading channel model and policy expectations.

Each sensor sees an i.i.d. per-slot fade h drawn from its own
distribution and, if it transmits, delivers with probability q(h) given
by a saturating success curve. Concurrent transmissions interact through
a pairwise collision matrix: sensor j's transmission erases sensor i's
packet with probability q_ji, independently across pairs and slots, so

    P(gamma_i = 1) = E[alpha_i(h_i) q(h_i)] * prod_{j != i} (1 - E[alpha_j] q_ji).

This module owns the fade distributions, the success-curve families, the
collision matrix, and the expectation operators (deterministic adaptive
quadrature or Monte Carlo) used everywhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .policy import AccessPolicy

__all__ = [
    "ExponentialFading",
    "UniformFading",
    "SaturatingExpCurve",
    "LogisticLogCurve",
    "FadingChannel",
    "CollisionMatrix",
    "Quadrature",
    "MonteCarlo",
    "sample_channel",
    "decode_success_prob",
    "invert_success_curve",
    "expected_policy_rate",
    "expected_policy_success",
    "link_success_probability",
    "derive_rng",
    "dist_from_dict",
    "curve_from_dict",
    "channel_from_dict",
]


def derive_rng(base_seed, stream=0):
    """Generator for one execution context, offset by a stream index."""
    return np.random.default_rng(int(base_seed) + int(stream))


@dataclass(frozen=True)
class ExponentialFading:
    """Exponential fade magnitude with the given mean."""

    mean: float = 1.0

    def __post_init__(self):
        if not self.mean > 0.0:
            raise ValueError(f"mean must be positive, got {self.mean:g}")

    def sample(self, rng, size=None):
        return rng.exponential(self.mean, size=size)

    def pdf(self, h):
        h = np.asarray(h, dtype=float)
        return np.where(h >= 0.0, np.exp(-h / self.mean) / self.mean, 0.0)

    def survival(self, h):
        """P(fade >= h)."""
        h = np.asarray(h, dtype=float)
        return np.where(h >= 0.0, np.exp(-h / self.mean), 1.0)

    def upper_cutoff(self, eps):
        """Point beyond which the tail mass is below eps."""
        return -self.mean * math.log(eps)

    @property
    def lower(self):
        return 0.0

    def to_dict(self):
        return {"family": "exponential", "mean": self.mean}


@dataclass(frozen=True)
class UniformFading:
    """Bounded fade magnitude, uniform on [low, high]."""

    low: float
    high: float

    def __post_init__(self):
        if not 0.0 <= self.low < self.high:
            raise ValueError(
                f"need 0 <= low < high, got low={self.low:g} high={self.high:g}"
            )

    def sample(self, rng, size=None):
        return rng.uniform(self.low, self.high, size=size)

    def pdf(self, h):
        h = np.asarray(h, dtype=float)
        dens = 1.0 / (self.high - self.low)
        return np.where((h >= self.low) & (h <= self.high), dens, 0.0)

    def survival(self, h):
        h = np.asarray(h, dtype=float)
        frac = (self.high - np.clip(h, self.low, self.high)) / (self.high - self.low)
        return np.where(h < self.low, 1.0, frac)

    def upper_cutoff(self, eps):
        return self.high

    @property
    def lower(self):
        return self.low

    def to_dict(self):
        return {"family": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class SaturatingExpCurve:
    """Decode probability q(h) = 1 - exp(-kappa * gain * h).

    Strictly increasing from q(0) = 0 toward 1; ``gain`` scales the fade
    (e.g. a fixed transmit power multiplier).
    """

    kappa: float = 1.5
    gain: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa:g}")
        if not self.gain > 0.0:
            raise ValueError(f"gain must be positive, got {self.gain:g}")

    def value(self, h):
        h = np.asarray(h, dtype=float)
        return -np.expm1(-self.kappa * self.gain * h)

    def inverse(self, t):
        """Fade level at which the curve reaches t in (q(0), sup)."""
        return -math.log1p(-t) / (self.kappa * self.gain)

    @property
    def at_zero(self):
        return 0.0

    @property
    def sup(self):
        return 1.0

    def to_dict(self):
        return {"family": "exp_saturating", "kappa": self.kappa, "gain": self.gain}


@dataclass(frozen=True)
class LogisticLogCurve:
    """Decode probability logistic in log-fade: q(h) = h^s / (h^s + m^s)."""

    midpoint: float
    steepness: float

    def __post_init__(self):
        if not self.midpoint > 0.0:
            raise ValueError(f"midpoint must be positive, got {self.midpoint:g}")
        if not self.steepness > 0.0:
            raise ValueError(f"steepness must be positive, got {self.steepness:g}")

    def value(self, h):
        h = np.asarray(h, dtype=float)
        with np.errstate(divide="ignore"):
            r = np.power(h / self.midpoint, self.steepness,
                         where=h > 0.0, out=np.zeros_like(h, dtype=float))
        return r / (1.0 + r)

    def inverse(self, t):
        return self.midpoint * (t / (1.0 - t)) ** (1.0 / self.steepness)

    @property
    def at_zero(self):
        return 0.0

    @property
    def sup(self):
        return 1.0

    def to_dict(self):
        return {
            "family": "logistic_log",
            "midpoint": self.midpoint,
            "steepness": self.steepness,
        }


@dataclass(frozen=True)
class FadingChannel:
    """One link's fade distribution paired with its success curve."""

    dist: object
    curve: object

    def to_dict(self):
        return {"dist": self.dist.to_dict(), "curve": self.curve.to_dict()}


def dist_from_dict(d):
    family = d.get("family")
    if family == "exponential":
        return ExponentialFading(mean=float(d.get("mean", 1.0)))
    if family == "uniform":
        return UniformFading(low=float(d["low"]), high=float(d["high"]))
    raise ValueError(f"unknown fade distribution family {family!r}")


def curve_from_dict(d):
    family = d.get("family")
    if family == "exp_saturating":
        return SaturatingExpCurve(
            kappa=float(d.get("kappa", 1.5)), gain=float(d.get("gain", 1.0))
        )
    if family == "logistic_log":
        return LogisticLogCurve(
            midpoint=float(d["midpoint"]), steepness=float(d["steepness"])
        )
    raise ValueError(f"unknown success curve family {family!r}")


def channel_from_dict(d):
    return FadingChannel(dist=dist_from_dict(d["dist"]), curve=curve_from_dict(d["curve"]))


@dataclass(frozen=True)
class CollisionMatrix:
    """Pairwise erasure probabilities q[j, i] = P(j's transmission kills link i).

    Entries lie in [0, 1]; the diagonal is unused by every formula here
    and is stored as 0.
    """

    q: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.q, dtype=float)).copy()
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"collision matrix must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("collision matrix entries must be finite")
        if np.any((arr < 0.0) | (arr > 1.0)):
            raise ValueError("collision matrix entries must lie in [0, 1]")
        np.fill_diagonal(arr, 0.0)
        arr.setflags(write=False)
        object.__setattr__(self, "q", arr)

    @property
    def m(self):
        return self.q.shape[0]

    @classmethod
    def none(cls, m):
        """No interference between any pair."""
        return cls(q=np.zeros((m, m)))


@dataclass(frozen=True)
class Quadrature:
    """Deterministic expectation via adaptive Simpson integration."""

    abs_tol: float = 1e-10
    tail_eps: float = 1e-13


@dataclass(frozen=True)
class MonteCarlo:
    """Expectation from a finite seeded sample of fades."""

    samples: int = 10_000
    seed: int = 0


def sample_channel(ch, rng, size=None):
    """Draw i.i.d. fades from the channel's distribution."""
    return ch.dist.sample(rng, size=size)


def decode_success_prob(ch, h):
    """q(h) for nonnegative fade levels (scalar or array)."""
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("fade level must be nonnegative")
    out = ch.curve.value(arr)
    return float(out) if np.isscalar(h) or arr.ndim == 0 else out


def invert_success_curve(ch, target):
    """Fade level at which the success curve reaches ``target``.

    Returns 0.0 when the target is already met at zero fade and +inf when
    it exceeds what the curve can ever deliver.
    """
    t = float(target)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"target must lie in [0, 1], got {t:g}")
    curve = ch.curve
    if t >= curve.sup:
        return math.inf
    if t <= curve.at_zero:
        return 0.0
    return float(curve.inverse(t))


def _scalar_pdf(dist):
    """Fast float -> float density for the quadrature inner loop."""
    if isinstance(dist, ExponentialFading):
        inv = 1.0 / dist.mean
        return lambda h: inv * math.exp(-h * inv)
    if isinstance(dist, UniformFading):
        lo, hi = dist.low, dist.high
        dens = 1.0 / (hi - lo)
        return lambda h: dens if lo <= h <= hi else 0.0
    raise TypeError(f"unsupported fade distribution {type(dist).__name__}")


def _scalar_curve(curve):
    if isinstance(curve, SaturatingExpCurve):
        k = curve.kappa * curve.gain
        return lambda h: -math.expm1(-k * h)
    if isinstance(curve, LogisticLogCurve):
        m, s = curve.midpoint, curve.steepness

        def q(h):
            if h <= 0.0:
                return 0.0
            r = (h / m) ** s
            return r / (1.0 + r)

        return q
    raise TypeError(f"unsupported success curve {type(curve).__name__}")


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    mid = 0.5 * (a + b)
    lm = 0.5 * (a + mid)
    rm = 0.5 * (mid + b)
    flm = f(lm)
    frm = f(rm)
    left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    return _simpson_rec(
        f, a, mid, fa, flm, fm, left, 0.5 * tol, depth - 1
    ) + _simpson_rec(f, mid, b, fm, frm, fb, right, 0.5 * tol, depth - 1)


def _adaptive_simpson(f, a, b, tol):
    if not b > a:
        return 0.0
    fa = f(a)
    fb = f(b)
    mid = 0.5 * (a + b)
    fm = f(mid)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth=48)


def _integration_window(policy, ch, tail_eps):
    """Fade interval carrying all but ``tail_eps`` of the policy's mass."""
    lo = ch.dist.lower
    if policy.kind == "threshold":
        lo = max(lo, policy.threshold)
    hi = ch.dist.upper_cutoff(tail_eps)
    return lo, hi


def expected_policy_rate(policy, ch, mode=Quadrature()):
    """E[alpha(h)], the policy's average transmit rate over the fades.

    Parameters
    ----------
    policy : AccessPolicy
    ch : FadingChannel
    mode : Quadrature or MonteCarlo
        Quadrature integrates the fade density over the transmit region
        (mass beyond the truncation point, below ``tail_eps``, is
        dropped); MonteCarlo averages alpha(h) over a seeded sample.

    Returns
    -------
    float in [0, 1]
    """
    if policy.kind == "constant":
        return float(policy.rate)
    if math.isinf(policy.threshold):
        return 0.0
    if isinstance(mode, MonteCarlo):
        rng = derive_rng(mode.seed)
        h = sample_channel(ch, rng, size=mode.samples)
        return float(np.mean(h >= policy.threshold))
    pdf = _scalar_pdf(ch.dist)
    lo, hi = _integration_window(policy, ch, mode.tail_eps)
    val = _adaptive_simpson(pdf, lo, hi, mode.abs_tol)
    return min(max(val, 0.0), 1.0)


def expected_policy_success(policy, ch, mode=Quadrature()):
    """E[alpha(h) q(h)], the policy's collision-free delivery rate."""
    if policy.kind == "threshold" and math.isinf(policy.threshold):
        return 0.0
    if isinstance(mode, MonteCarlo):
        rng = derive_rng(mode.seed)
        h = sample_channel(ch, rng, size=mode.samples)
        alpha = policy.rate_at(h)
        return float(np.mean(alpha * ch.curve.value(h)))
    pdf = _scalar_pdf(ch.dist)
    q = _scalar_curve(ch.curve)
    lo, hi = _integration_window(policy, ch, mode.tail_eps)
    val = _adaptive_simpson(lambda h: pdf(h) * q(h), lo, hi, mode.abs_tol)
    if policy.kind == "constant":
        val *= policy.rate
    return min(max(val, 0.0), 1.0)


def link_success_probability(policies, channels, qmat, i, mode=Quadrature()):
    """P(gamma_i = 1) under independent fades and pairwise collisions.

    Combines sensor i's own delivery rate with the probability that no
    transmitting interferer erases it:

        E[alpha_i q] * prod_{j != i} (1 - E[alpha_j] q[j, i]).
    """
    m = len(policies)
    if len(channels) != m:
        raise ValueError(f"{len(channels)} channels for {m} policies")
    if qmat.m != m:
        raise ValueError(f"collision matrix is {qmat.m}x{qmat.m} for {m} policies")
    if not 0 <= i < m:
        raise ValueError(f"link index {i} out of range for m={m}")
    own = expected_policy_success(policies[i], channels[i], mode)
    for j in range(m):
        if j == i:
            continue
        # Each interferer estimate gets its own stream under Monte Carlo.
        mode_j = (
            MonteCarlo(mode.samples, mode.seed + j + 1)
            if isinstance(mode, MonteCarlo)
            else mode
        )
        rate_j = expected_policy_rate(policies[j], channels[j], mode_j)
        own *= 1.0 - rate_j * qmat.q[j, i]
    return own
